use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmtedge_core::free_conv::find_left_edge;
use rmtedge_core::harness::check::{read_spectrum, regenerate};
use rmtedge_core::harness::ensemble::{run_arm, RunContext};
use rmtedge_core::harness::export::export;
use rmtedge_core::harness::{check_records, goe_reference, read_records_csv, summarize, CheckOptions};
use rmtedge_core::heavy_tail::build_theta;
use rmtedge_core::rng::splitmix64;
use rmtedge_core::spectral::covariance_spectrum;
use rmtedge_core::theory::{edge_sigma_from_kernel, sigma_m, theory_constants, TheoryInputs};
use rmtedge_core::{Arm, Error, ExperimentConfig, Mode, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_ASSERT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rmtedge",
    version,
    about = "Left-edge statistics of heavy-tailed sample covariance matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print sigma_alpha, lambda_shift, the critical sigma and the gamma limit.
    Theory(TheoryArgs),
    /// Locate the left edge for one spectrum or matrix.
    Edge(EdgeArgs),
    /// Run a seeded ensemble from a JSON config and write records.csv and summary.json.
    Ensemble(EnsembleArgs),
    /// Regularity, rigidity and interlacing for an existing records.csv.
    Check(CheckArgs),
    /// Generate the GOE reference sample M^{2/3} (mu_M + 2).
    GoeRef(GoeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PaperEps,
    DirectT,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::PaperEps => Mode::PaperEps,
            ModeArg::DirectT => Mode::DirectT,
        }
    }
}

#[derive(Args)]
struct TheoryArgs {
    /// Take alpha, c_N, N, s0 and t from an experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Aspect ratio c_N = M/N.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Core/tail changeover of the entry law; determines the tail constant.
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    /// Tail constant used directly instead of the one implied by s0.
    #[arg(long)]
    c_const: Option<f64>,
    /// Also evaluate the CLT kernel variance.
    #[arg(long)]
    kernel: bool,
}

#[derive(Args)]
struct EdgeArgs {
    /// Whitespace-separated eigenvalues of S(X).
    #[arg(long, conflicts_with_all = ["matrix", "config"])]
    spectrum: Option<PathBuf>,
    /// Headerless CSV holding the M x N matrix X.
    #[arg(long, conflicts_with = "config")]
    matrix: Option<PathBuf>,
    /// Sample X for one seed of this experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "config")]
    seed: Option<u64>,
    /// N, required with --spectrum.
    #[arg(long)]
    n: Option<usize>,
    /// Gaussian time; taken from the config when sampling.
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of GOE reference draws (default: the replicate count; 0 disables).
    #[arg(long)]
    goe_draws: Option<usize>,
    /// Exit with status 4 if any acceptance verdict fails.
    #[arg(long = "assert")]
    assert_verdicts: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    records: PathBuf,
    /// Directory of stored spectra named <seed>.txt.
    #[arg(long)]
    spectra: Option<PathBuf>,
    #[arg(long)]
    eta_star: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    window: f64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Exit with status 4 unless regularity (>= 90%), rigidity and interlacing pass.
    #[arg(long = "assert")]
    assert_verdicts: bool,
}

#[derive(Args)]
struct GoeArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    mode: Option<ModeArg>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(m) = mode {
        cfg.mode = m.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn theory(a: TheoryArgs) -> Result<bool> {
    let inputs = match &a.config {
        Some(p) => RunContext::new(&ExperimentConfig::from_path(p)?)?.theory_inputs()?,
        None => {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| Error::Config(format!("--{name} is required without --config")))
            };
            let alpha = need(a.alpha, "alpha")?;
            let c_const = match a.c_const {
                Some(k) => k,
                None => build_theta(alpha, a.s0)?.c_const,
            };
            TheoryInputs::new(alpha, need(a.c, "c")?, c_const, need(a.n, "n")?, need(a.t, "t")?)?
        }
    };
    let mut out = serde_json::to_value(theory_constants(&inputs))?;
    out["inputs"] = serde_json::to_value(inputs)?;
    if a.kernel {
        out["sigma_m"] = sigma_m(&inputs)?.into();
        out["edge_sigma_from_kernel"] = edge_sigma_from_kernel(&inputs)?.into();
    }
    print_json(&out)?;
    Ok(true)
}

fn read_matrix(path: &Path) -> Result<nalgebra::DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!(
            "{} is not a non-empty rectangular matrix",
            path.display()
        )));
    }
    Ok(nalgebra::DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

fn edge(a: EdgeArgs) -> Result<bool> {
    let need_t = || a.t.ok_or_else(|| Error::Config("--t is required".into()));
    let (spec, t) = if let Some(p) = &a.spectrum {
        let n =
            a.n.ok_or_else(|| Error::Config("--n is required with --spectrum".into()))?;
        let text = std::fs::read_to_string(p)?;
        let m = text.split_whitespace().count();
        (read_spectrum(p, m, n)?, need_t()?)
    } else if let Some(p) = &a.matrix {
        (covariance_spectrum(&read_matrix(p)?)?, need_t()?)
    } else if let Some(p) = &a.config {
        let ctx = RunContext::new(&ExperimentConfig::from_path(p)?)?;
        let d = regenerate(&ctx, a.seed.unwrap_or(ctx.cfg.master_seed))?;
        (covariance_spectrum(&d.x())?, a.t.unwrap_or(d.t))
    } else {
        return Err(Error::Config("give one of --spectrum, --matrix or --config".into()));
    };
    print_json(&find_left_edge(&spec, t)?)?;
    Ok(true)
}

fn ensemble(a: EnsembleArgs) -> Result<bool> {
    let cfg = load_config(&a.config, a.seed, a.workers, a.mode)?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output_path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rmtedge-out"));
    let records = run_arm(&cfg, cfg.arm)?;
    let draws = a.goe_draws.unwrap_or(cfg.replicates);
    let reference = if draws > 0 {
        Some(goe_reference(
            cfg.m,
            draws,
            splitmix64(cfg.master_seed ^ 0x0047_4F45),
            cfg.workers,
        )?)
    } else {
        None
    };
    let summary = summarize(&cfg, cfg.arm, &records, reference.as_deref())?;
    let (csv, json) = export(&records, &summary, &out)?;
    println!("wrote {} and {}", csv.display(), json.display());
    for (name, pass) in &summary.verdicts {
        println!("{name}: {}", if *pass { "pass" } else { "FAIL" });
    }
    Ok(!a.assert_verdicts || summary.all_pass())
}

fn check(a: CheckArgs) -> Result<bool> {
    let cfg = load_config(&a.config, None, a.workers, a.mode)?;
    let rows = read_records_csv(&a.records)?;
    let opts = CheckOptions {
        eta_star: a.eta_star,
        window: a.window,
        spectra_dir: a.spectra.clone(),
    };
    let rep = check_records(&cfg, &rows, &opts)?;
    print_json(&rep)?;
    let rigidity_min = if cfg.arm == Arm::Heavy { 0.90 } else { 0.95 };
    let pass = rep.rigidity.fraction >= rigidity_min
        && rep.interlacing_true == rep.interlacing_checked
        && rep.regularity_true as f64 >= 0.9 * rep.regularity_checked as f64;
    Ok(!a.assert_verdicts || pass)
}

fn goe_ref(a: GoeArgs) -> Result<bool> {
    let sample = goe_reference(a.m, a.draws, a.seed, a.workers)?;
    let mut text = String::from("goe_stat\n");
    for v in sample {
        text.push_str(&format!("{v:.16e}\n"));
    }
    match a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() || matches!(e, Error::Domain(_) | Error::NonFinite { .. }) {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Theory(a) => theory(a),
        Command::Edge(a) => edge(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Check(a) => check(a),
        Command::GoeRef(a) => goe_ref(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance threshold not met");
            ExitCode::from(EXIT_ASSERT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

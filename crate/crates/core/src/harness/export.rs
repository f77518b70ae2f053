use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::Result;
use crate::harness::ensemble::ReplicateRecord;
use crate::harness::report::Summary;

pub const RECORD_COLUMNS: [&str; 9] = [
    "seed",
    "good_psi",
    "t",
    "lambda_M_Y",
    "lambda_M_X",
    "zeta_minus",
    "lambda_minus_t",
    "gamma_N",
    "tw_stat",
];

/// JSON schema that every `summary.json` satisfies.
pub const SUMMARY_SCHEMA: &str = include_str!("../../schema/summary.schema.json");

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRecord {
    pub seed: u64,
    pub good_psi: bool,
    pub t: f64,
    #[serde(rename = "lambda_M_Y")]
    pub lambda_m_y: f64,
    #[serde(rename = "lambda_M_X")]
    pub lambda_m_x: f64,
    pub zeta_minus: f64,
    pub lambda_minus_t: f64,
    #[serde(rename = "gamma_N")]
    pub gamma_n: f64,
    pub tw_stat: f64,
}

/// Seventeen significant digits, `.` decimal point, independent of locale.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the successful replicates; failed ones are listed in the summary instead.
pub fn write_records_csv<W: Write>(records: &[ReplicateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records.iter().filter(|r| r.is_ok()) {
        w.write_record([
            r.seed.to_string(),
            r.good_psi.to_string(),
            num(r.t),
            num(r.lambda_m_y),
            num(r.lambda_m_x),
            num(r.zeta_minus),
            num(r.lambda_minus_t),
            num(r.gamma_n),
            num(r.tw_stat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<CsvRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Rebuilds replicate records from CSV rows; `lambda_shift` and `M` restore
/// the deterministic centering, which the CSV does not carry.
pub fn records_from_csv(rows: &[CsvRecord], lambda_shift: f64, m: usize) -> Vec<ReplicateRecord> {
    let m23 = (m as f64).powf(2.0 / 3.0);
    rows.iter()
        .enumerate()
        .map(|(index, r)| ReplicateRecord {
            index,
            seed: r.seed,
            good_psi: r.good_psi,
            t: r.t,
            lambda_m_y: r.lambda_m_y,
            lambda_m_x: r.lambda_m_x,
            zeta_minus: r.zeta_minus,
            lambda_minus_t: r.lambda_minus_t,
            gamma_n: r.gamma_n,
            tw_stat: r.tw_stat,
            edge_fluct: r.lambda_minus_t,
            tw_stat_shift: r.gamma_n * m23 * (r.lambda_m_y - lambda_shift),
            failure: None,
            checks: None,
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &Summary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `records.csv` and `summary.json` into `dir`, creating it if needed.
pub fn export(records: &[ReplicateRecord], summary: &Summary, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("records.csv");
    let json_path = dir.join("summary.json");
    write_records_csv(records, BufWriter::new(File::create(&csv_path)?))?;
    let mut f = BufWriter::new(File::create(&json_path)?);
    write_summary(summary, &mut f)?;
    f.flush()?;
    Ok((csv_path, json_path))
}

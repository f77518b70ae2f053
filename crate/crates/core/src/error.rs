use thiserror::Error;

/// Errors raised by the numerical routines and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("input contains non-finite entries ({count} values)")]
    NonFinite { count: usize },

    #[error("pole: z = {z} coincides with eigenvalue {eigenvalue}")]
    Pole { z: String, eigenvalue: f64 },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("branch error: {0}")]
    Branch(String),

    #[error("conditioning error: shift is {distance:e} from the spectrum")]
    Conditioning { distance: f64 },

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e}, damping history {damping:?})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        damping: Vec<f64>,
    },

    #[error("edge location failed: {reason}; Phi' trace {trace:?}")]
    EdgeLocation { reason: String, trace: Vec<(f64, f64)> },

    #[error("quadrature did not converge: {nodes} nodes, last change {delta:e}")]
    Quadrature { nodes: usize, delta: f64 },

    #[error("degenerate decomposition: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("run failed: {0}")]
    Run(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Numeric failures as opposed to bad input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Pole { .. }
                | Error::Branch(_)
                | Error::Conditioning { .. }
                | Error::NoConvergence { .. }
                | Error::EdgeLocation { .. }
                | Error::Quadrature { .. }
                | Error::Degenerate(_)
                | Error::Run(_)
        )
    }
}

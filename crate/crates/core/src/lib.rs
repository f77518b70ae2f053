//! Smallest-eigenvalue statistics of heavy-tailed sample covariance matrices.
//!
//! The crate samples matrices with an exactly Pareto entry tail, splits them
//! into small, intermediate and heavy parts, locates the random left edge of
//! the free convolution with the Marchenko-Pastur law, and runs seeded
//! ensembles that compare the resulting edge statistics against Tracy-Widom
//! and Gaussian references.

pub mod error;
pub mod free_conv;
pub mod harness;
pub mod heavy_tail;
pub mod mp;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use free_conv::{
    find_left_edge, phi_map, solve_subordination, subordination_residuals, EdgeSolution, SubordinationState,
};
pub use harness::{Arm, ExperimentConfig, Mode, ReplicateRecord, Summary};
pub use heavy_tail::{build_theta, decompose, sample_matrix, Decomposition, DecompositionParams, ThetaSpec};
pub use mp::{mp_edges, mp_stieltjes, MPParams};
pub use spectral::{covariance_spectrum, Spectrum};
pub use theory::{TheoryConstants, TheoryInputs};

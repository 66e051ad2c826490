pub mod analytic;
pub mod cli;
pub mod csvio;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod format;
pub mod laplacian;
pub mod measurement;
pub mod metrics;
pub mod netlist;
pub mod rng;

pub use dense::{CMatrix, C64};
pub use error::{Error, Result};

//! Joint estimation of a time-varying mean and a sparse precision matrix in
//! Gaussian graphical models, with an alternating importance-sampling /
//! graphical-lasso scheme (GL-ATAIS) and the synthetic graph-recovery
//! benchmarks around it.

pub mod atais;
pub mod error;
pub mod eval;
pub mod ggm;
pub mod glasso;
pub mod harness;
pub mod mean;
pub mod runner;

pub use error::{Error, Result};

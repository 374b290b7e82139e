use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("solver did not reach tolerance {tol:.3e} within {iters} sweeps (residual {residual:.3e})")]
    Convergence {
        iters: usize,
        tol: f64,
        residual: f64,
        last: Box<nalgebra::DMatrix<f64>>,
    },

    #[error("no finite minimizer: {0}")]
    Infeasible(String),

    #[error("degenerate particle cloud: all log-posteriors are -inf")]
    DegenerateCloud,

    #[error("run failed at iteration {iteration}: {source}")]
    Run {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

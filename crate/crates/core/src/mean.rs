//! Parametric time-varying mean models and parameter priors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Prior on the mean parameters. The normalizing constant is dropped in both
/// variants; only log-density differences matter for MAP selection and
/// self-normalized importance weights.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    ImproperUniform,
    IsotropicGaussian { sigma: f64 },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::ImproperUniform => Ok(()),
            PriorSpec::IsotropicGaussian { sigma } if *sigma > 0.0 => Ok(()),
            PriorSpec::IsotropicGaussian { sigma } => Err(Error::Parameter(format!(
                "gaussian prior sigma must be > 0, got {sigma}"
            ))),
        }
    }

    pub fn log_density(&self, phi: &DVector<f64>) -> f64 {
        match self {
            PriorSpec::ImproperUniform => 0.0,
            PriorSpec::IsotropicGaussian { sigma } => {
                -phi.norm_squared() / (2.0 * sigma * sigma)
            }
        }
    }
}

/// A parametric time-varying mean: phi in R^M and a timestamp map to a mean
/// vector in R^N, together with a prior over phi.
pub trait MeanModel: Sync {
    fn dim_params(&self) -> usize;
    fn dim_nodes(&self) -> usize;
    fn eval(&self, phi: &DVector<f64>, tau: f64) -> Result<DVector<f64>>;
    fn log_prior(&self, phi: &DVector<f64>) -> f64;

    /// Fills `out` (N x R) with columns f_r(phi). Models may override this to
    /// hoist work shared across timestamps.
    fn mean_matrix_into(
        &self,
        phi: &DVector<f64>,
        timestamps: &[f64],
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        debug_assert_eq!(out.shape(), (self.dim_nodes(), timestamps.len()));
        for (c, &tau) in timestamps.iter().enumerate() {
            let col = self.eval(phi, tau)?;
            out.set_column(c, &col);
        }
        Ok(())
    }
}

/// Convenience wrapper allocating the mean matrix.
pub fn mean_matrix(
    model: &dyn MeanModel,
    phi: &DVector<f64>,
    timestamps: &[f64],
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(model.dim_nodes(), timestamps.len());
    model.mean_matrix_into(phi, timestamps, &mut out)?;
    Ok(out)
}

/// The ten-node, four-parameter benchmark mean used by the synthetic
/// experiments. Component 9 is singular at phi3 = -1 and component 6 needs
/// tau > -0.5.
#[derive(Debug, Clone)]
pub struct BenchmarkMean {
    prior: PriorSpec,
}

impl BenchmarkMean {
    pub const NODES: usize = 10;
    pub const PARAMS: usize = 4;

    pub fn new(prior: PriorSpec) -> Self {
        Self { prior }
    }

    fn check_domain(phi: &DVector<f64>, tau: f64) -> Result<()> {
        if phi.len() != Self::PARAMS {
            return Err(Error::Parameter(format!(
                "expected {} parameters, got {}",
                Self::PARAMS,
                phi.len()
            )));
        }
        if phi[2] == -1.0 {
            return Err(Error::Singularity(
                "phi3 = -1 makes component 9 singular".to_string(),
            ));
        }
        if tau < -0.5 {
            return Err(Error::Domain(format!(
                "tau = {tau} < -0.5 leaves the domain of log(1 + 2 tau)"
            )));
        }
        Ok(())
    }
}

impl MeanModel for BenchmarkMean {
    fn dim_params(&self) -> usize {
        Self::PARAMS
    }

    fn dim_nodes(&self) -> usize {
        Self::NODES
    }

    fn eval(&self, phi: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
        Self::check_domain(phi, tau)?;
        let (p1, p2, p3, p4) = (phi[0], phi[1], phi[2], phi[3]);
        let mut f = DVector::zeros(Self::NODES);
        f[0] = -p4 * tau + 5.0 * p1 * p1;
        f[1] = 2.0 * p3 * (-p2 * tau).sin();
        f[2] = p1 - p3 + p1 * (2.0 * tau).cos();
        f[3] = 3.0 * p4 + 3.0 * p2 + p1 * (0.1 * tau).exp();
        f[4] = p3 * p3 - 2.0 * p1 + 3.0 * p2 - (0.8 * p3).exp() * (1.0 - tau).exp();
        f[5] = 5.0 * (p4 + p3) - p2 * (1.0 + 2.0 * tau).ln();
        f[6] = 3.0 * p2 - 0.2 * tau * p3.sin();
        f[7] = 3.0 * p1 + 5.0 * p3 - 20.0 * p4.sin() * (2.0 * tau + std::f64::consts::FRAC_PI_4).cos();
        f[8] = p2 + 4.0 * p4 + 5.0 * (1.0 / (1.0 + p3)).exp() * tau;
        f[9] = 5.0 * p1 + 10.0 * p3 - 5.0 * p4 * tau.sin();
        Ok(f)
    }

    fn log_prior(&self, phi: &DVector<f64>) -> f64 {
        self.prior.log_density(phi)
    }

    fn mean_matrix_into(
        &self,
        phi: &DVector<f64>,
        timestamps: &[f64],
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        debug_assert_eq!(out.shape(), (Self::NODES, timestamps.len()));
        for &tau in timestamps {
            Self::check_domain(phi, tau)?;
        }
        let (p1, p2, p3, p4) = (phi[0], phi[1], phi[2], phi[3]);
        // parameter-only terms, hoisted out of the timestamp loop
        let p1_sq5 = 5.0 * p1 * p1;
        let exp_08p3 = (0.8 * p3).exp();
        let sin_p3 = p3.sin();
        let sin_p4 = p4.sin();
        let exp_inv = (1.0 / (1.0 + p3)).exp();
        let base5 = p3 * p3 - 2.0 * p1 + 3.0 * p2;
        for (c, &tau) in timestamps.iter().enumerate() {
            let mut col = out.column_mut(c);
            col[0] = -p4 * tau + p1_sq5;
            col[1] = 2.0 * p3 * (-p2 * tau).sin();
            col[2] = p1 - p3 + p1 * (2.0 * tau).cos();
            col[3] = 3.0 * p4 + 3.0 * p2 + p1 * (0.1 * tau).exp();
            col[4] = base5 - exp_08p3 * (1.0 - tau).exp();
            col[5] = 5.0 * (p4 + p3) - p2 * (1.0 + 2.0 * tau).ln();
            col[6] = 3.0 * p2 - 0.2 * tau * sin_p3;
            col[7] = 3.0 * p1 + 5.0 * p3
                - 20.0 * sin_p4 * (2.0 * tau + std::f64::consts::FRAC_PI_4).cos();
            col[8] = p2 + 4.0 * p4 + 5.0 * exp_inv * tau;
            col[9] = 5.0 * p1 + 10.0 * p3 - 5.0 * p4 * tau.sin();
        }
        Ok(())
    }
}

//! Adaptive importance sampling: particle generation, conditional
//! log-posterior evaluation, MAP particle selection, weighting and proposal
//! adaptation.

use std::cell::RefCell;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ggm::{is_symmetric, ObservationSet, PrecisionMatrix};
use crate::glasso::off_diagonal_l1;
use crate::mean::MeanModel;

/// Scaling of the log det Theta term in the conditional log-posterior.
///
/// `Paper` uses (1/2) log det Theta; `Full` uses (R/2) log det Theta, which is
/// what the product likelihood over R samples implies. The two differ only by
/// a Theta-dependent constant, so they matter when comparing posteriors across
/// different precision estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    Paper,
    Full,
}

/// Gaussian proposal with mean mu and covariance sigma.
#[derive(Debug, Clone)]
pub struct ProposalState {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl ProposalState {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(Error::Parameter("proposal dimensions mismatch".to_string()));
        }
        if !is_symmetric(&sigma, 1e-10) {
            return Err(Error::Parameter("proposal covariance not symmetric".to_string()));
        }
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("proposal covariance is not PD".to_string())
        })?;
        Ok(Self { mu, sigma, chol })
    }

    pub fn isotropic(mu: DVector<f64>, variance: f64) -> Result<Self> {
        let m = mu.len();
        Self::new(mu, DMatrix::identity(m, m) * variance)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Full Gaussian log-density including the normalizing constant.
    pub fn log_density(&self, phi: &DVector<f64>) -> f64 {
        let m = self.mu.len() as f64;
        let log_det = 2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let d = phi - &self.mu;
        let sol = self.chol.solve(&d);
        -0.5 * m * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * d.dot(&sol)
    }
}

/// i.i.d. draws from N(mu, sigma).
pub fn draw_particles<R: Rng + ?Sized>(
    prop: &ProposalState,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    if count == 0 {
        return Err(Error::Parameter("particle count must be >= 1".to_string()));
    }
    let m = prop.dim();
    let l = prop.chol.l_dirty();
    let mut out = Vec::with_capacity(count);
    let mut z = DVector::<f64>::zeros(m);
    for _ in 0..count {
        for i in 0..m {
            z[i] = rng.sample::<f64, _>(StandardNormal);
        }
        // lower-triangular product
        let mut v = prop.mu.clone();
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += l[(i, k)] * z[k];
            }
            v[i] += acc;
        }
        out.push(v);
    }
    Ok(out)
}

/// Evaluates log pi(phi | X, Theta) repeatedly against fixed data and a fixed
/// precision estimate, hoisting the Theta-only terms.
pub struct PosteriorEvaluator<'a> {
    obs: &'a ObservationSet,
    model: &'a dyn MeanModel,
    theta: &'a PrecisionMatrix,
    /// c * log det Theta - lambda ||Theta||_1(off-diag), shared by all particles
    theta_terms: f64,
    scratch: RefCell<(DMatrix<f64>, DMatrix<f64>)>,
}

impl<'a> PosteriorEvaluator<'a> {
    pub fn new(
        obs: &'a ObservationSet,
        model: &'a dyn MeanModel,
        theta: &'a PrecisionMatrix,
        lambda: f64,
        scaling: Scaling,
    ) -> Result<Self> {
        if obs.node_count() != theta.dim() || obs.node_count() != model.dim_nodes() {
            return Err(Error::Parameter(
                "observation, model and precision dimensions disagree".to_string(),
            ));
        }
        let coeff = match scaling {
            Scaling::Paper => 0.5,
            Scaling::Full => obs.sample_count() as f64 / 2.0,
        };
        let theta_terms = coeff * theta.log_det() - lambda * off_diagonal_l1(theta.matrix());
        let (n, r) = obs.samples().shape();
        Ok(Self {
            obs,
            model,
            theta,
            theta_terms,
            scratch: RefCell::new((DMatrix::zeros(n, r), DMatrix::zeros(n, r))),
        })
    }

    /// Log-posterior of a single particle; -inf when the mean model rejects
    /// the point or the value is not finite.
    pub fn eval(&self, phi: &DVector<f64>) -> f64 {
        let mut scratch = self.scratch.borrow_mut();
        let (means, prod) = &mut *scratch;
        if self
            .model
            .mean_matrix_into(phi, self.obs.timestamps(), means)
            .is_err()
        {
            return f64::NEG_INFINITY;
        }
        // residuals in place
        *means -= self.obs.samples();
        self.theta.matrix().mul_to(means, prod);
        let quad: f64 = means.iter().zip(prod.iter()).map(|(e, t)| e * t).sum();
        let v = -0.5 * quad + self.theta_terms + self.model.log_prior(phi);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Conditional log-posterior of phi given the data and a precision estimate.
pub fn log_posterior(
    phi: &DVector<f64>,
    obs: &ObservationSet,
    model: &dyn MeanModel,
    theta: &PrecisionMatrix,
    lambda: f64,
    scaling: Scaling,
) -> Result<f64> {
    Ok(PosteriorEvaluator::new(obs, model, theta, lambda, scaling)?.eval(phi))
}

/// Index and value of the particle maximizing the log-posterior. Ties go to
/// the lowest index.
pub fn select_map_particle(
    particles: &[DVector<f64>],
    obs: &ObservationSet,
    model: &dyn MeanModel,
    theta: &PrecisionMatrix,
    lambda: f64,
    scaling: Scaling,
) -> Result<(usize, DVector<f64>)> {
    let eval = PosteriorEvaluator::new(obs, model, theta, lambda, scaling)?;
    select_map_with(particles, &eval).map(|(i, _)| (i, particles[i].clone()))
}

pub(crate) fn select_map_with(
    particles: &[DVector<f64>],
    eval: &PosteriorEvaluator,
) -> Result<(usize, f64)> {
    if particles.is_empty() {
        return Err(Error::Parameter("empty particle set".to_string()));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, phi) in particles.iter().enumerate() {
        let v = eval.eval(phi);
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::DegenerateCloud);
    }
    Ok(best)
}

/// Particles with unnormalized log-weights and their softmax normalization.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    particles: Vec<DVector<f64>>,
    log_weights: Vec<f64>,
    norm_weights: Vec<f64>,
}

impl ParticleCloud {
    /// Builds a cloud from raw log-weights via a log-sum-exp normalization.
    pub fn from_log_weights(
        particles: Vec<DVector<f64>>,
        log_weights: Vec<f64>,
    ) -> Result<Self> {
        if particles.len() != log_weights.len() || particles.is_empty() {
            return Err(Error::Parameter("particle/weight count mismatch".to_string()));
        }
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateCloud);
        }
        let sum: f64 = log_weights.iter().map(|lw| (lw - max).exp()).sum();
        let lse = max + sum.ln();
        let norm_weights: Vec<f64> = log_weights.iter().map(|lw| (lw - lse).exp()).collect();
        Ok(Self {
            particles,
            log_weights,
            norm_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[DVector<f64>] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    /// Effective sample size 1 / sum(w_bar^2); lies in [1, P].
    pub fn ess(&self) -> f64 {
        1.0 / self.norm_weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Importance weights w_p = pi(phi_p | X, Theta) / q(phi_p), computed in the
/// log domain and self-normalized.
#[allow(clippy::too_many_arguments)]
pub fn importance_weights(
    particles: Vec<DVector<f64>>,
    obs: &ObservationSet,
    model: &dyn MeanModel,
    theta: &PrecisionMatrix,
    lambda: f64,
    scaling: Scaling,
    prop: &ProposalState,
) -> Result<ParticleCloud> {
    let eval = PosteriorEvaluator::new(obs, model, theta, lambda, scaling)?;
    let log_weights: Vec<f64> = particles
        .iter()
        .map(|phi| eval.eval(phi) - prop.log_density(phi))
        .collect();
    ParticleCloud::from_log_weights(particles, log_weights)
}

/// Proposal update: mean moves to the new MAP point, covariance becomes the
/// weighted particle covariance plus delta * I.
pub fn adapt_proposal(
    cloud: &ParticleCloud,
    phi_map_new: &DVector<f64>,
    delta: f64,
) -> Result<ProposalState> {
    if delta <= 0.0 {
        return Err(Error::Parameter("delta must be > 0".to_string()));
    }
    let m = phi_map_new.len();
    let mut mean = DVector::zeros(m);
    for (phi, &w) in cloud.particles().iter().zip(cloud.norm_weights()) {
        mean += phi * w;
    }
    let mut sigma = DMatrix::identity(m, m) * delta;
    for (phi, &w) in cloud.particles().iter().zip(cloud.norm_weights()) {
        let d = phi - &mean;
        sigma.ger(w, &d, &d, 1.0);
    }
    ProposalState::new(phi_map_new.clone(), sigma)
}

//! The alternating GL-ATAIS loop: importance-sampling mean estimation,
//! precision estimation on re-centered data, an accept/retain rule on the
//! joint log-posterior, and proposal adaptation.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::atais::{
    adapt_proposal, draw_particles, ParticleCloud, PosteriorEvaluator, ProposalState, Scaling,
};
use crate::error::{Error, Result};
use crate::ggm::{centered_covariance, ObservationSet, PrecisionMatrix};
use crate::glasso::{graphical_lasso, GlassoOptions};
use crate::mean::{mean_matrix, MeanModel, PriorSpec};

/// Jitter added to the adapted proposal covariance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeltaSchedule {
    Constant { value: f64 },
    /// delta_k = initial / k for iteration k = 1, 2, ...
    Decay { initial: f64 },
}

impl DeltaSchedule {
    pub fn at(&self, iteration: usize) -> f64 {
        match self {
            DeltaSchedule::Constant { value } => *value,
            DeltaSchedule::Decay { initial } => initial / (iteration + 1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match self {
            DeltaSchedule::Constant { value } => *value,
            DeltaSchedule::Decay { initial } => *initial,
        };
        if v > 0.0 {
            Ok(())
        } else {
            Err(Error::Parameter("delta must be > 0".to_string()))
        }
    }
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        DeltaSchedule::Constant { value: 1e-3 }
    }
}

/// How Step 2 turns a centered covariance into a precision candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum PrecisionStep {
    Glasso(GlassoOptions),
    /// Theta = (Sigma_hat + ridge * I)^{-1}; no sparsity penalty enters the
    /// acceptance posterior in this mode.
    RidgeInverse(RidgeSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RidgeSpec {
    Absolute { value: f64 },
    /// ridge = factor * tr(Sigma_hat) / N, which stays usable across sample
    /// sizes where the raw covariance may be near-singular
    TraceScaled { factor: f64 },
}

impl RidgeSpec {
    fn at(&self, sigma: &DMatrix<f64>) -> f64 {
        match self {
            RidgeSpec::Absolute { value } => *value,
            RidgeSpec::TraceScaled { factor } => factor * sigma.trace() / sigma.nrows() as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match self {
            RidgeSpec::Absolute { value } => *value,
            RidgeSpec::TraceScaled { factor } => *factor,
        };
        if v >= 0.0 {
            Ok(())
        } else {
            Err(Error::Parameter("ridge must be >= 0".to_string()))
        }
    }
}

impl Default for RidgeSpec {
    fn default() -> Self {
        RidgeSpec::TraceScaled { factor: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct GlAtaisConfig {
    /// total iterations K
    pub iterations: usize,
    /// warm-up iterations K0 using identity precision in the phi objective
    pub warmup: usize,
    /// particles per iteration
    pub particles: usize,
    /// sparsity weight, shared by the solver and the acceptance posterior
    pub lambda: f64,
    pub delta: DeltaSchedule,
    pub prior: PriorSpec,
    pub scaling: Scaling,
    pub init_proposal: ProposalState,
    pub glasso_opts: GlassoOptions,
}

impl GlAtaisConfig {
    /// Defaults: K0 = 5, P particles, improper prior, full-likelihood scaling,
    /// proposal N(0, 4 I).
    pub fn new(iterations: usize, particles: usize, lambda: f64, dim_params: usize) -> Self {
        Self {
            iterations,
            warmup: 5.min(iterations.saturating_sub(1)),
            particles,
            lambda,
            delta: DeltaSchedule::default(),
            prior: PriorSpec::ImproperUniform,
            scaling: Scaling::Full,
            init_proposal: ProposalState::isotropic(DVector::zeros(dim_params), 4.0)
                .expect("isotropic proposal"),
            glasso_opts: GlassoOptions::new(lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Parameter("K must be >= 1".to_string()));
        }
        if self.warmup >= self.iterations {
            return Err(Error::Parameter("K0 must satisfy 0 <= K0 < K".to_string()));
        }
        if self.particles == 0 {
            return Err(Error::Parameter("P must be >= 1".to_string()));
        }
        if self.lambda != self.glasso_opts.lambda {
            return Err(Error::Parameter(
                "config lambda and solver lambda disagree".to_string(),
            ));
        }
        self.delta.validate()?;
        self.prior.validate()?;
        self.glasso_opts.validate()
    }
}

/// Per-iteration record of the run.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// candidate selected in Step 1
    pub phi_hat: DVector<f64>,
    /// accepted MAP estimate after Step 3
    pub phi_map: DVector<f64>,
    /// accepted precision estimate after Step 3
    pub theta_gl: PrecisionMatrix,
    /// log-posterior of the accepted pair (nondecreasing over iterations)
    pub best_log_posterior: f64,
    /// log-posterior of the candidate pair
    pub candidate_log_posterior: f64,
    /// proposal used on the NEXT iteration
    pub proposal: ProposalState,
    pub ess: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    /// log-posterior of the iteration-0 record
    pub initial_value: f64,
    pub iterations: Vec<IterationRecord>,
}

/// 0.5 sum_r ||x_r - f_r(phi)||^2 - log g(phi). Minimizing this ranks
/// particles identically to the log-posterior with Theta = I.
pub fn warmup_objective(
    phi: &DVector<f64>,
    obs: &ObservationSet,
    model: &dyn MeanModel,
) -> Result<f64> {
    let means = mean_matrix(model, phi, obs.timestamps())?;
    let e = obs.samples() - means;
    Ok(0.5 * e.norm_squared() - model.log_prior(phi))
}

/// Iteration-0 state for the acceptance comparison: the proposal mean paired
/// with the identity precision.
pub fn initial_record(
    obs: &ObservationSet,
    model: &dyn MeanModel,
    cfg: &GlAtaisConfig,
) -> Result<(DVector<f64>, PrecisionMatrix, f64)> {
    cfg.validate()?;
    let phi0 = cfg.init_proposal.mean().clone();
    let theta0 = PrecisionMatrix::identity(obs.node_count());
    let eval = PosteriorEvaluator::new(obs, model, &theta0, cfg.lambda, cfg.scaling)?;
    let value = eval.eval(&phi0);
    Ok((phi0, theta0, value))
}

pub fn run<R: Rng + ?Sized>(
    obs: &ObservationSet,
    model: &dyn MeanModel,
    cfg: &GlAtaisConfig,
    rng: &mut R,
) -> Result<(PrecisionMatrix, DVector<f64>, RunTrace)> {
    run_with_step(
        obs,
        model,
        cfg,
        &PrecisionStep::Glasso(cfg.glasso_opts),
        rng,
    )
}

pub fn run_with_step<R: Rng + ?Sized>(
    obs: &ObservationSet,
    model: &dyn MeanModel,
    cfg: &GlAtaisConfig,
    step: &PrecisionStep,
    rng: &mut R,
) -> Result<(PrecisionMatrix, DVector<f64>, RunTrace)> {
    cfg.validate()?;
    if obs.sample_count() == 0 {
        return Err(Error::Parameter("observation set is empty".to_string()));
    }
    if cfg.init_proposal.dim() != model.dim_params() {
        return Err(Error::Parameter(
            "proposal dimension does not match the mean model".to_string(),
        ));
    }
    // the ridge variant carries no sparsity prior in its posterior
    let pi_lambda = match step {
        PrecisionStep::Glasso(_) => cfg.lambda,
        PrecisionStep::RidgeInverse(_) => 0.0,
    };
    let n = obs.node_count();
    let identity = PrecisionMatrix::identity(n);

    let mut phi_map = cfg.init_proposal.mean().clone();
    let mut theta_gl = identity.clone();
    let init_eval = PosteriorEvaluator::new(obs, model, &theta_gl, pi_lambda, cfg.scaling)?;
    let mut best_value = init_eval.eval(&phi_map);
    drop(init_eval);
    let initial_value = best_value;

    let mut proposal = cfg.init_proposal.clone();
    let mut records: Vec<IterationRecord> = Vec::with_capacity(cfg.iterations);

    for k in 0..cfg.iterations {
        let at = |e: Error| Error::Run {
            iteration: k,
            source: Box::new(e),
        };
        let theta_for_phi = if k < cfg.warmup { &identity } else { &theta_gl };

        // Step 1: draw particles and pick the posterior maximizer
        let particles = draw_particles(&proposal, cfg.particles, rng).map_err(at)?;
        let eval = PosteriorEvaluator::new(obs, model, theta_for_phi, pi_lambda, cfg.scaling)
            .map_err(at)?;
        let values: Vec<f64> = particles.iter().map(|p| eval.eval(p)).collect();
        drop(eval);
        let (best_idx, _) = values
            .iter()
            .enumerate()
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &v)| {
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        if best_idx == usize::MAX {
            return Err(at(Error::DegenerateCloud));
        }
        let phi_hat = particles[best_idx].clone();

        // Step 2: center, covariance, precision candidate
        let means = mean_matrix(model, &phi_hat, obs.timestamps()).map_err(at)?;
        let sigma_hat = centered_covariance(obs, &means).map_err(at)?;
        let theta_cand = match step {
            PrecisionStep::Glasso(opts) => graphical_lasso(&sigma_hat, opts).map_err(at)?,
            PrecisionStep::RidgeInverse(ridge) => {
                let r = ridge.at(&sigma_hat);
                let shifted = &sigma_hat + DMatrix::identity(n, n) * r;
                let inv = Cholesky::new(shifted)
                    .ok_or_else(|| {
                        at(Error::NotPositiveDefinite(
                            "ridged covariance is not invertible".to_string(),
                        ))
                    })?
                    .inverse();
                PrecisionMatrix::new(inv).map_err(at)?
            }
        };

        // Step 3: accept or retain
        let cand_eval = PosteriorEvaluator::new(obs, model, &theta_cand, pi_lambda, cfg.scaling)
            .map_err(at)?;
        let cand_value = cand_eval.eval(&phi_hat);
        drop(cand_eval);
        let accepted = cand_value > best_value;
        if accepted {
            phi_map = phi_hat.clone();
            theta_gl = theta_cand;
            best_value = cand_value;
        }

        // weights against the proposal the particles came from, with the
        // precision that was live when they were drawn
        let log_weights: Vec<f64> = particles
            .iter()
            .zip(&values)
            .map(|(p, &v)| v - proposal.log_density(p))
            .collect();
        let cloud = ParticleCloud::from_log_weights(particles, log_weights).map_err(at)?;
        let ess = cloud.ess();
        proposal = adapt_proposal(&cloud, &phi_map, cfg.delta.at(k)).map_err(at)?;

        records.push(IterationRecord {
            phi_hat,
            phi_map: phi_map.clone(),
            theta_gl: theta_gl.clone(),
            best_log_posterior: best_value,
            candidate_log_posterior: cand_value,
            proposal: proposal.clone(),
            ess,
            accepted,
        });
    }

    Ok((
        theta_gl,
        phi_map,
        RunTrace {
            initial_value,
            iterations: records,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atais::select_map_particle;
    use crate::ggm::{generate_er_graph, make_precision, sample_observations};
    use crate::mean::{BenchmarkMean, PriorSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct ZeroMean {
        n: usize,
        m: usize,
    }
    impl MeanModel for ZeroMean {
        fn dim_params(&self) -> usize {
            self.m
        }
        fn dim_nodes(&self) -> usize {
            self.n
        }
        fn eval(&self, _phi: &DVector<f64>, _tau: f64) -> Result<DVector<f64>> {
            Ok(DVector::zeros(self.n))
        }
        fn log_prior(&self, _phi: &DVector<f64>) -> f64 {
            0.0
        }
    }

    fn small_dataset(seed: u64) -> (ObservationSet, PrecisionMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_er_graph(5, 0.3, &mut rng).unwrap();
        let theta = make_precision(&g, 0.5).unwrap();
        let model = ZeroMean { n: 5, m: 2 };
        let phi = DVector::zeros(2);
        let taus: Vec<f64> = (0..60).map(|i| i as f64 * 4.0 / 59.0).collect();
        let obs = sample_observations(&theta, &model, &phi, &taus, &mut rng).unwrap();
        (obs, theta)
    }

    #[test]
    fn zero_mean_reduces_to_plain_glasso() {
        let (obs, _) = small_dataset(71);
        let model = ZeroMean { n: 5, m: 2 };
        let mut cfg = GlAtaisConfig::new(4, 20, 0.1, 2);
        cfg.warmup = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let (theta, _, _) = run(&obs, &model, &cfg, &mut rng).unwrap();
        let raw =
            centered_covariance(&obs, &DMatrix::zeros(5, obs.sample_count())).unwrap();
        let direct = graphical_lasso(&raw, &cfg.glasso_opts).unwrap();
        assert_relative_eq!(theta.matrix(), direct.matrix(), epsilon = 1e-6);
    }

    #[test]
    fn single_iteration_contract() {
        let (obs, _) = small_dataset(73);
        let model = ZeroMean { n: 5, m: 2 };
        let mut cfg = GlAtaisConfig::new(1, 1, 0.1, 2);
        cfg.warmup = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let (_, _, trace) = run(&obs, &model, &cfg, &mut rng).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        let rec = &trace.iterations[0];
        assert_eq!(
            rec.accepted,
            rec.candidate_log_posterior > trace.initial_value
        );
    }

    #[test]
    fn best_log_posterior_is_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let g = generate_er_graph(10, 0.1, &mut rng).unwrap();
        let theta = make_precision(&g, 0.1).unwrap();
        let model = BenchmarkMean::new(PriorSpec::ImproperUniform);
        let phi_true = DVector::from_vec(vec![0.5, -1.0, 0.3, 1.2]);
        let taus: Vec<f64> = (0..50).map(|i| i as f64 * 4.0 / 49.0).collect();
        let obs = sample_observations(&theta, &model, &phi_true, &taus, &mut rng).unwrap();
        let cfg = GlAtaisConfig::new(10, 200, 0.1, 4);
        let (_, _, trace) = run(&obs, &model, &cfg, &mut rng).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for rec in &trace.iterations {
            assert!(rec.best_log_posterior >= prev);
            if rec.accepted {
                assert!(rec.best_log_posterior > prev);
            }
            prev = rec.best_log_posterior;
        }
    }

    #[test]
    fn retention_keeps_estimates_bit_identical() {
        let (obs, _) = small_dataset(77);
        let model = ZeroMean { n: 5, m: 2 };
        let cfg = GlAtaisConfig::new(8, 10, 0.1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let (_, _, trace) = run(&obs, &model, &cfg, &mut rng).unwrap();
        for w in trace.iterations.windows(2) {
            if !w[1].accepted {
                assert_eq!(w[1].phi_map, w[0].phi_map);
                assert_eq!(w[1].theta_gl.matrix(), w[0].theta_gl.matrix());
            }
        }
    }

    #[test]
    fn proposal_mean_tracks_map_estimate() {
        let (obs, _) = small_dataset(79);
        let model = ZeroMean { n: 5, m: 2 };
        let cfg = GlAtaisConfig::new(6, 15, 0.1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let (_, _, trace) = run(&obs, &model, &cfg, &mut rng).unwrap();
        for rec in &trace.iterations {
            assert_eq!(rec.proposal.mean(), &rec.phi_map);
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let (obs, _) = small_dataset(81);
        let model = ZeroMean { n: 5, m: 2 };
        let cfg = GlAtaisConfig::new(5, 12, 0.1, 2);
        let run_once = || {
            let mut rng = ChaCha8Rng::seed_from_u64(82);
            run(&obs, &model, &cfg, &mut rng).unwrap()
        };
        let (t1, p1, tr1) = run_once();
        let (t2, p2, tr2) = run_once();
        assert_eq!(t1.matrix(), t2.matrix());
        assert_eq!(p1, p2);
        assert_eq!(tr1.iterations.len(), tr2.iterations.len());
        for (a, b) in tr1.iterations.iter().zip(&tr2.iterations) {
            assert_eq!(a.phi_hat, b.phi_hat);
            assert_eq!(a.best_log_posterior, b.best_log_posterior);
            assert_eq!(a.ess, b.ess);
        }
    }

    #[test]
    fn warmup_ranking_matches_identity_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let g = generate_er_graph(10, 0.2, &mut rng).unwrap();
        let theta = make_precision(&g, 0.1).unwrap();
        let model = BenchmarkMean::new(PriorSpec::ImproperUniform);
        let phi_true = DVector::from_vec(vec![0.1, 0.4, -0.3, 0.9]);
        let taus: Vec<f64> = (0..20).map(|i| i as f64 / 5.0).collect();
        let obs = sample_observations(&theta, &model, &phi_true, &taus, &mut rng).unwrap();
        let prop = ProposalState::isotropic(DVector::zeros(4), 2.0).unwrap();
        let particles = draw_particles(&prop, 40, &mut rng).unwrap();
        let identity = PrecisionMatrix::identity(10);
        let (idx, _) =
            select_map_particle(&particles, &obs, &model, &identity, 0.1, Scaling::Full).unwrap();
        let warmup_best = particles
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                warmup_objective(a, &obs, &model)
                    .unwrap()
                    .total_cmp(&warmup_objective(b, &obs, &model).unwrap())
            })
            .map(|(i, _)| i)
            .unwrap();
        assert_eq!(idx, warmup_best);
    }

    #[test]
    fn initial_record_contract() {
        let (obs, _) = small_dataset(85);
        let model = ZeroMean { n: 5, m: 2 };
        let cfg = GlAtaisConfig::new(3, 5, 0.1, 2);
        let (phi0, theta0, value) = initial_record(&obs, &model, &cfg).unwrap();
        assert_eq!(phi0, DVector::zeros(2));
        assert_eq!(theta0.matrix(), PrecisionMatrix::identity(5).matrix());
        assert!(value.is_finite());
    }

    #[test]
    fn config_validation() {
        let mut cfg = GlAtaisConfig::new(5, 10, 0.1, 4);
        assert!(cfg.validate().is_ok());
        cfg.warmup = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = GlAtaisConfig::new(5, 10, 0.1, 4);
        cfg.glasso_opts.lambda = 0.2;
        assert!(cfg.validate().is_err());
        let mut cfg = GlAtaisConfig::new(5, 0, 0.1, 4);
        cfg.particles = 0;
        assert!(cfg.validate().is_err());
    }
}

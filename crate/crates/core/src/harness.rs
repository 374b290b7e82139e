//! Experiment orchestration: configuration, seeding, repetition sweeps over
//! the number of observations and particles, and CSV/SVG result emission.

use std::hash::{Hash, Hasher};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{
    baseline_atais_inverse, baseline_oracle_gl, baseline_standard_gl, f_score,
    support_from_precision, EdgeSet, ThresholdSpec,
};
use crate::ggm::{generate_er_graph, make_precision, sample_observations};
use crate::glasso::GlassoOptions;
use crate::mean::{BenchmarkMean, PriorSpec};
use crate::runner::{run, GlAtaisConfig, RidgeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    StandardGl,
    OracleGl,
    GlAtais,
    AtaisInv,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::StandardGl,
        Method::OracleGl,
        Method::GlAtais,
        Method::AtaisInv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::StandardGl => "standard-gl",
            Method::OracleGl => "oracle-gl",
            Method::GlAtais => "gl-atais",
            Method::AtaisInv => "atais-inv",
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default = "defaults::p_edge")]
    pub p_edge: f64,
    #[serde(rename = "R_grid", default = "defaults::r_grid")]
    pub r_grid: Vec<usize>,
    #[serde(rename = "P_grid", default = "defaults::p_grid")]
    pub p_grid: Vec<usize>,
    #[serde(default = "defaults::reps")]
    pub reps: usize,
    #[serde(rename = "K", default = "defaults::k")]
    pub k: usize,
    #[serde(rename = "K0", default = "defaults::k0")]
    pub k0: usize,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::phi_range")]
    pub phi_range: Vec<[f64; 2]>,
    #[serde(default = "defaults::tau_interval")]
    pub tau_interval: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::methods")]
    pub methods: Vec<Method>,
    /// particle count held fixed while R sweeps
    #[serde(default = "defaults::fixed_p")]
    pub fixed_p: usize,
    /// observation count held fixed while P sweeps
    #[serde(default = "defaults::fixed_r")]
    pub fixed_r: usize,
    /// when false, wall_time_ms is left blank so result files are
    /// byte-reproducible
    #[serde(default = "defaults::record_timing")]
    pub record_timing: bool,
}

mod defaults {
    use super::Method;

    pub fn n() -> usize {
        10
    }
    pub fn p_edge() -> f64 {
        0.1
    }
    pub fn r_grid() -> Vec<usize> {
        vec![50, 100, 150, 200]
    }
    pub fn p_grid() -> Vec<usize> {
        vec![30, 300, 3000, 30000]
    }
    pub fn reps() -> usize {
        100
    }
    pub fn k() -> usize {
        30
    }
    pub fn k0() -> usize {
        5
    }
    pub fn lambda() -> f64 {
        0.1
    }
    pub fn phi_range() -> Vec<[f64; 2]> {
        vec![[-2.0, 2.0]; 4]
    }
    pub fn tau_interval() -> [f64; 2] {
        [0.0, 4.0]
    }
    pub fn methods() -> Vec<Method> {
        Method::ALL.to_vec()
    }
    pub fn fixed_p() -> usize {
        3000
    }
    pub fn fixed_r() -> usize {
        100
    }
    pub fn record_timing() -> bool {
        true
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are complete")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.p_edge) {
            return Err(Error::Config("p_edge must lie in [0,1]".to_string()));
        }
        if self.r_grid.is_empty() || self.p_grid.is_empty() {
            return Err(Error::Config("grids must be nonempty".to_string()));
        }
        if self.r_grid.iter().chain(&self.p_grid).any(|&v| v == 0) {
            return Err(Error::Config("grid values must be >= 1".to_string()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".to_string()));
        }
        if self.k == 0 || self.k0 >= self.k {
            return Err(Error::Config("need K >= 1 and 0 <= K0 < K".to_string()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".to_string()));
        }
        if self.phi_range.len() != BenchmarkMean::PARAMS {
            return Err(Error::Config(format!(
                "phi_range must have {} entries",
                BenchmarkMean::PARAMS
            )));
        }
        if self.phi_range.iter().any(|r| r[0] > r[1]) {
            return Err(Error::Config("phi_range bounds out of order".to_string()));
        }
        if self.tau_interval[0] > self.tau_interval[1] {
            return Err(Error::Config("tau_interval out of order".to_string()));
        }
        if self.n != BenchmarkMean::NODES {
            return Err(Error::Config(format!(
                "the benchmark mean is defined on {} nodes",
                BenchmarkMean::NODES
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".to_string()));
        }
        if self.fixed_p == 0 || self.fixed_r < 2 {
            return Err(Error::Config(
                "need fixed_p >= 1 and fixed_r >= 2".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub r: usize,
    pub p: usize,
    pub rep: usize,
    pub seed: u64,
    pub f_score: Option<f64>,
    pub wall_time_ms: Option<u64>,
    pub log_posterior: Option<f64>,
    pub error: Option<String>,
    /// digest of the shared repetition data; not serialized
    pub data_digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// iterate the R grid at fixed P
    ObsSweep,
    /// iterate the P grid at fixed R
    ParticleSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub grid: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub mode: SweepMode,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Counter-based seed mix: independent of the order repetitions run in.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    splitmix64(master ^ splitmix64(counter.wrapping_add(1)))
}

fn linspace(interval: [f64; 2], count: usize) -> Vec<f64> {
    let [lo, hi] = interval;
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn digest_matrix(m: &DMatrix<f64>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in m.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Runs every configured method on one shared synthetic dataset. Per-method
/// failures are recorded in the row instead of aborting the repetition.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    rep: usize,
    r: usize,
    p: usize,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if rep >= cfg.reps {
        return Err(Error::Parameter(format!(
            "rep index {rep} out of range (reps = {})",
            cfg.reps
        )));
    }
    let seed = derive_seed(cfg.seed, rep as u64);
    let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = generate_er_graph(cfg.n, cfg.p_edge, &mut data_rng)?;
    let theta_true = make_precision(&graph, 0.1)?;
    let model = BenchmarkMean::new(PriorSpec::ImproperUniform);
    let phi_true = DVector::from_fn(BenchmarkMean::PARAMS, |i, _| {
        let [lo, hi] = cfg.phi_range[i];
        lo + (hi - lo) * data_rng.random::<f64>()
    });
    let timestamps = linspace(cfg.tau_interval, r);
    // phi_true can land close enough to the benchmark mean's singularity that
    // the observations overflow; report that per method instead of aborting
    // the sweep
    let obs = match sample_observations(&theta_true, &model, &phi_true, &timestamps, &mut data_rng)
    {
        Ok(obs) => obs,
        Err(e) => {
            let msg = e.to_string().replace(',', ";");
            return Ok(cfg
                .methods
                .iter()
                .map(|&method| ResultRow {
                    method,
                    r,
                    p,
                    rep,
                    seed,
                    f_score: None,
                    wall_time_ms: cfg.record_timing.then_some(0),
                    log_posterior: None,
                    error: Some(msg.clone()),
                    data_digest: 0,
                })
                .collect());
        }
    };
    let digest = digest_matrix(obs.samples());
    let truth = EdgeSet::from_graph(&graph);
    let threshold = ThresholdSpec::default();
    let glasso_opts = GlassoOptions::new(cfg.lambda);

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let mut method_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x1000 + mi as u64));
        let started = Instant::now();
        let outcome: Result<(DMatrix<f64>, Option<f64>)> = match method {
            Method::StandardGl => {
                baseline_standard_gl(&obs, &glasso_opts).map(|t| (t.into_matrix(), None))
            }
            Method::OracleGl => baseline_oracle_gl(&obs, &model, &phi_true, &glasso_opts)
                .map(|t| (t.into_matrix(), None)),
            Method::GlAtais => {
                let mut rc = GlAtaisConfig::new(cfg.k, p, cfg.lambda, BenchmarkMean::PARAMS);
                rc.warmup = cfg.k0;
                run(&obs, &model, &rc, &mut method_rng).map(|(t, _, trace)| {
                    let last = trace
                        .iterations
                        .last()
                        .map(|rec| rec.best_log_posterior);
                    (t.into_matrix(), last)
                })
            }
            Method::AtaisInv => {
                let mut rc = GlAtaisConfig::new(cfg.k, p, cfg.lambda, BenchmarkMean::PARAMS);
                rc.warmup = cfg.k0;
                baseline_atais_inverse(
                    &obs,
                    &model,
                    &rc,
                    RidgeSpec::default(),
                    &mut method_rng,
                )
                .map(|t| (t, None))
            }
        };
        let wall = started.elapsed().as_millis() as u64;
        let row = match outcome {
            Ok((est, log_posterior)) => {
                let support = support_from_precision(&est, &threshold);
                ResultRow {
                    method,
                    r,
                    p,
                    rep,
                    seed,
                    f_score: Some(f_score(&support, &truth)?),
                    wall_time_ms: cfg.record_timing.then_some(wall),
                    log_posterior,
                    error: None,
                    data_digest: digest,
                }
            }
            Err(e) => ResultRow {
                method,
                r,
                p,
                rep,
                seed,
                f_score: None,
                wall_time_ms: cfg.record_timing.then_some(wall),
                log_posterior: None,
                error: Some(e.to_string().replace(',', ";")),
                data_digest: digest,
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn run_sweep(cfg: &ExperimentConfig, mode: SweepMode) -> Result<SweepResult> {
    cfg.validate()?;
    let grid: Vec<(usize, usize)> = match mode {
        SweepMode::ObsSweep => cfg.r_grid.iter().map(|&r| (r, cfg.fixed_p)).collect(),
        SweepMode::ParticleSweep => cfg.p_grid.iter().map(|&p| (cfg.fixed_r, p)).collect(),
    };
    let mut rows = Vec::new();
    for &(r, p) in &grid {
        for rep in 0..cfg.reps {
            rows.extend(run_repetition(cfg, rep, r, p)?);
        }
    }
    let aggregates = aggregate(&rows, mode, &cfg.methods);
    Ok(SweepResult {
        mode,
        rows,
        aggregates,
    })
}

pub fn aggregate(rows: &[ResultRow], mode: SweepMode, methods: &[Method]) -> Vec<Aggregate> {
    let grid_of = |row: &ResultRow| match mode {
        SweepMode::ObsSweep => row.r,
        SweepMode::ParticleSweep => row.p,
    };
    let mut grids: Vec<usize> = rows.iter().map(grid_of).collect();
    grids.sort_unstable();
    grids.dedup();
    let mut out = Vec::new();
    for &method in methods {
        for &g in &grids {
            let scores: Vec<f64> = rows
                .iter()
                .filter(|row| row.method == method && grid_of(row) == g)
                .filter_map(|row| row.f_score)
                .collect();
            if scores.is_empty() {
                continue;
            }
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = if scores.len() > 1 {
                scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            out.push(Aggregate {
                method,
                grid: g,
                mean,
                stderr: (var / n).sqrt(),
            });
        }
    }
    out
}

pub const RESULTS_HEADER: &str = "method,R,P,rep,seed,f_score,wall_time_ms,log_posterior,error";

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parameter("result table is empty".to_string()));
    }
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.method.name(),
            row.r,
            row.p,
            row.rep,
            row.seed,
            fmt_opt_f64(row.f_score),
            row.wall_time_ms.map(|w| w.to_string()).unwrap_or_default(),
            fmt_opt_f64(row.log_posterior),
            row.error.as_deref().unwrap_or(""),
        ));
    }
    Ok(out)
}

/// Parses output of [`results_csv`]; used to round-trip result tables.
pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        _ => return Err(Error::Parameter("bad results header".to_string())),
    }
    let mut rows = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(Error::Parameter(format!("bad row: {line}")));
        }
        let method = Method::ALL
            .into_iter()
            .find(|m| m.name() == parts[0])
            .ok_or_else(|| Error::Parameter(format!("unknown method {}", parts[0])))?;
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::Parameter(e.to_string()))
            }
        };
        let num = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|e| Error::Parameter(e.to_string()))
        };
        rows.push(ResultRow {
            method,
            r: num(parts[1])? as usize,
            p: num(parts[2])? as usize,
            rep: num(parts[3])? as usize,
            seed: num(parts[4])?,
            f_score: parse_opt(parts[5])?,
            wall_time_ms: if parts[6].is_empty() {
                None
            } else {
                Some(num(parts[6])?)
            },
            log_posterior: parse_opt(parts[7])?,
            error: if parts[8].is_empty() {
                None
            } else {
                Some(parts[8].to_string())
            },
            data_digest: 0,
        });
    }
    Ok(rows)
}

pub fn summary_csv(aggregates: &[Aggregate]) -> Result<String> {
    if aggregates.is_empty() {
        return Err(Error::Parameter("summary table is empty".to_string()));
    }
    let mut out = String::from("method,grid,mean,stderr\n");
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            a.method.name(),
            a.grid,
            a.mean,
            a.stderr
        ));
    }
    Ok(out)
}

/// Line chart of mean F-score versus the swept grid variable, one polyline per
/// method with standard-error bars.
pub fn figure_svg(result: &SweepResult) -> Result<String> {
    let aggregates = &result.aggregates;
    if aggregates.is_empty() {
        return Err(Error::Parameter("nothing to plot".to_string()));
    }
    let (width, height) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 30.0, 30.0, 60.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;
    let mut grids: Vec<usize> = aggregates.iter().map(|a| a.grid).collect();
    grids.sort_unstable();
    grids.dedup();
    let x_of = |g: usize| {
        let idx = grids.iter().position(|&v| v == g).unwrap() as f64;
        if grids.len() == 1 {
            ml + plot_w / 2.0
        } else {
            ml + plot_w * idx / (grids.len() - 1) as f64
        }
    };
    let y_of = |f: f64| mt + plot_h * (1.0 - f.clamp(0.0, 1.0));
    let x_label = match result.mode {
        SweepMode::ObsSweep => "observations R",
        SweepMode::ParticleSweep => "particles P",
    };
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + plot_h,
        ml + plot_w,
        mt + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + plot_h
    ));
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_of(tick);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{tick:.2}</text>\n",
            ml - 6.0,
            y + 4.0
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ml}\" y2=\"{y}\" stroke=\"black\"/>\n",
            ml - 4.0
        ));
    }
    for &g in &grids {
        let x = x_of(g);
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{g}</text>\n",
            mt + plot_h + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>\n",
        ml + plot_w / 2.0,
        height - 18.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">mean F-score</text>\n",
        mt + plot_h / 2.0,
        mt + plot_h / 2.0
    ));

    let mut methods: Vec<Method> = Vec::new();
    for a in aggregates {
        if !methods.contains(&a.method) {
            methods.push(a.method);
        }
    }
    for (mi, &method) in methods.iter().enumerate() {
        let color = colors[mi % colors.len()];
        let pts: Vec<&Aggregate> = grids
            .iter()
            .filter_map(|&g| {
                aggregates
                    .iter()
                    .find(|a| a.method == method && a.grid == g)
            })
            .collect();
        let path: Vec<String> = pts
            .iter()
            .map(|a| format!("{:.2},{:.2}", x_of(a.grid), y_of(a.mean)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for a in &pts {
            let x = x_of(a.grid);
            let (y0, y1) = (y_of(a.mean - a.stderr), y_of(a.mean + a.stderr));
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{y1:.2}\" stroke=\"{color}\"/>\n"
            ));
            svg.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                y_of(a.mean)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            ml + plot_w - 110.0,
            mt + 16.0 + 16.0 * mi as f64,
            method.name()
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            reps: 2,
            k: 3,
            k0: 1,
            r_grid: vec![30],
            p_grid: vec![10],
            fixed_p: 10,
            fixed_r: 30,
            record_timing: false,
            methods: vec![Method::OracleGl, Method::StandardGl],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn repetition_is_deterministic() {
        let cfg = tiny_config();
        let a = run_repetition(&cfg, 0, 30, 10).unwrap();
        let b = run_repetition(&cfg, 0, 30, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repetition_row_shape() {
        let mut cfg = tiny_config();
        cfg.methods = vec![Method::OracleGl];
        let rows = run_repetition(&cfg, 0, 30, 10).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].method, Method::OracleGl);

        cfg.methods = Method::ALL.to_vec();
        cfg.k = 2;
        cfg.k0 = 0;
        let rows = run_repetition(&cfg, 1, 50, 10).unwrap();
        assert_eq!(rows.len(), 4);
        let d = rows[0].data_digest;
        assert!(rows.iter().all(|r| r.data_digest == d));
        assert!(rows.iter().all(|r| r.r == 50 && r.p == 10));
    }

    #[test]
    fn seed_derivation_is_order_free() {
        let a = derive_seed(42, 3);
        let b = derive_seed(42, 7);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(42, 3));
    }

    #[test]
    fn sweep_aggregates() {
        let cfg = tiny_config();
        let result = run_sweep(&cfg, SweepMode::ObsSweep).unwrap();
        assert_eq!(result.rows.len(), 2 * 2);
        assert_eq!(result.aggregates.len(), 2);
        for a in &result.aggregates {
            let scores: Vec<f64> = result
                .rows
                .iter()
                .filter(|r| r.method == a.method)
                .filter_map(|r| r.f_score)
                .collect();
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(a.mean >= lo - 1e-12 && a.mean <= hi + 1e-12);
        }
    }

    #[test]
    fn single_row_aggregate_is_the_row() {
        let mut cfg = tiny_config();
        cfg.reps = 1;
        cfg.methods = vec![Method::OracleGl];
        let result = run_sweep(&cfg, SweepMode::ObsSweep).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.aggregates.len(), 1);
        assert_eq!(result.aggregates[0].mean, result.rows[0].f_score.unwrap());
        assert_eq!(result.aggregates[0].stderr, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = tiny_config();
        let rows = run_repetition(&cfg, 0, 30, 10).unwrap();
        let text = results_csv(&rows).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER);
        assert_eq!(text.lines().count(), rows.len() + 1);
        let parsed = parse_results_csv(&text).unwrap();
        assert_eq!(parsed.len(), rows.len());
        for (p, r) in parsed.iter().zip(&rows) {
            assert_eq!(p.method, r.method);
            assert_eq!(p.rep, r.rep);
            assert_eq!(p.seed, r.seed);
            // values are re-serialized identically
            let reser = results_csv(&parsed).unwrap();
            assert_eq!(reser, text);
        }
    }

    #[test]
    fn empty_tables_are_rejected() {
        assert!(results_csv(&[]).is_err());
        assert!(summary_csv(&[]).is_err());
    }

    #[test]
    fn svg_structure() {
        let cfg = tiny_config();
        let result = run_sweep(&cfg, SweepMode::ObsSweep).unwrap();
        let svg = figure_svg(&result).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), cfg.methods.len());
        // every opened tag family is balanced or self-closed
        assert_eq!(svg.matches("<svg").count(), svg.matches("</svg>").count());
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.p_edge = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.r_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.k0 = cfg.k;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_field_names() {
        let json = r#"{"n":10,"p_edge":0.1,"R_grid":[50],"P_grid":[30],"reps":1,
                       "K":3,"K0":1,"lambda":0.1,"seed":7,
                       "methods":["oracle-gl","gl-atais"]}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.r_grid, vec![50]);
        assert_eq!(cfg.methods, vec![Method::OracleGl, Method::GlAtais]);
        // unknown fields are rejected
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    }
}

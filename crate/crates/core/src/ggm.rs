//! Core Gaussian graphical model types: random graphs, precision matrices,
//! multivariate normal sampling and centered covariance estimation.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mean::MeanModel;

/// An undirected weighted graph without self-loops. Edges are stored as
/// ordered pairs (i, j) with i < j.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        if edges.len() != weights.len() {
            return Err(Error::Parameter(
                "edge and weight counts differ".to_string(),
            ));
        }
        for &(i, j) in &edges {
            if i == j {
                return Err(Error::Parameter(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Parameter(format!("edge ({i},{j}) out of range")));
            }
        }
        if weights.iter().any(|&w| w == 0.0) {
            return Err(Error::Parameter("zero edge weight".to_string()));
        }
        let mut pairs: Vec<((usize, usize), f64)> = edges
            .into_iter()
            .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
            .zip(weights)
            .collect();
        pairs.sort_by_key(|&(e, _)| e);
        pairs.dedup_by_key(|&mut (e, _)| e);
        let (edges, weights) = pairs.into_iter().unzip();
        Ok(Self { n, edges, weights })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Symmetric weighted adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        a
    }
}

/// A symmetric positive definite precision matrix. The nonzero off-diagonal
/// entries encode the edges of the underlying graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    theta: DMatrix<f64>,
}

impl PrecisionMatrix {
    /// Validates symmetry (1e-12 relative) and positive definiteness via a
    /// Cholesky factorization.
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if !is_symmetric(&theta, 1e-12) {
            return Err(Error::Parameter("matrix is not symmetric".to_string()));
        }
        if Cholesky::new(theta.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "Cholesky factorization failed".to_string(),
            ));
        }
        Ok(Self { theta })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            theta: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.theta
    }

    pub fn cholesky(&self) -> Cholesky<f64, nalgebra::Dyn> {
        // cannot fail: PD was checked at construction
        Cholesky::new(self.theta.clone()).expect("precision matrix is PD")
    }

    /// log det Theta, via the Cholesky factor.
    pub fn log_det(&self) -> f64 {
        let l = self.cholesky();
        2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.cholesky().inverse()
    }
}

/// R samples of an N-dimensional signal with their timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    x: DMatrix<f64>,
    timestamps: Vec<f64>,
}

impl ObservationSet {
    pub fn new(x: DMatrix<f64>, timestamps: Vec<f64>) -> Result<Self> {
        if x.ncols() != timestamps.len() {
            return Err(Error::Parameter(format!(
                "column count {} does not match timestamp count {}",
                x.ncols(),
                timestamps.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("non-finite entries".to_string()));
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parameter("timestamps must be nondecreasing".to_string()));
        }
        Ok(Self { x, timestamps })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn node_count(&self) -> usize {
        self.x.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.x.ncols()
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Draws an Erdos-Renyi graph: each of the n(n-1)/2 pairs is included
/// independently with probability p, with unit weight.
pub fn generate_er_graph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("edge probability {p} not in [0,1]")));
    }
    if n == 0 {
        return Err(Error::Parameter("node count must be >= 1".to_string()));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let weights = vec![1.0; edges.len()];
    Graph::new(n, edges, weights)
}

/// Builds Theta = A + eps*I with eps = max(0, -lambda_min(A)) + eps_margin,
/// so that lambda_min(Theta) >= eps_margin.
pub fn make_precision(g: &Graph, eps_margin: f64) -> Result<PrecisionMatrix> {
    if eps_margin <= 0.0 {
        return Err(Error::Parameter("eps_margin must be > 0".to_string()));
    }
    let a = g.adjacency();
    let lambda_min = a
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let eps = (-lambda_min).max(0.0) + eps_margin;
    let theta = a + DMatrix::identity(g.node_count(), g.node_count()) * eps;
    PrecisionMatrix::new(theta)
}

/// Samples x_r = f_r(phi_true) + v_r with v_r ~ N(0, Theta^{-1}).
///
/// The noise is drawn by solving L^T v = z against the Cholesky factor
/// L L^T = Theta, so Theta is never inverted explicitly.
pub fn sample_observations<R: Rng + ?Sized>(
    theta: &PrecisionMatrix,
    mean: &dyn MeanModel,
    phi_true: &DVector<f64>,
    timestamps: &[f64],
    rng: &mut R,
) -> Result<ObservationSet> {
    let n = theta.dim();
    if mean.dim_nodes() != n {
        return Err(Error::Parameter(format!(
            "mean model has {} nodes, precision has {n}",
            mean.dim_nodes()
        )));
    }
    let chol = theta.cholesky();
    let r = timestamps.len();
    let mut x = DMatrix::zeros(n, r);
    let mut means = DMatrix::zeros(n, r);
    mean.mean_matrix_into(phi_true, timestamps, &mut means)?;
    let mut z = DVector::zeros(n);
    for c in 0..r {
        for i in 0..n {
            z[i] = StandardNormal.sample(rng);
        }
        // v = L^{-T} z  =>  cov(v) = (L L^T)^{-1} = Theta^{-1}
        let v = chol
            .l_dirty()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("triangular solve failed".to_string()))?;
        x.set_column(c, &(means.column(c) + v));
    }
    ObservationSet::new(x, timestamps.to_vec())
}

/// (1/R) sum_r (x_r - m_r)(x_r - m_r)^T.
pub fn centered_covariance(obs: &ObservationSet, means: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = obs.samples();
    if means.shape() != x.shape() {
        return Err(Error::Parameter(format!(
            "means shape {:?} does not match observations {:?}",
            means.shape(),
            x.shape()
        )));
    }
    let e = x - means;
    let r = x.ncols() as f64;
    let mut s = &e * e.transpose() / r;
    // enforce exact symmetry against accumulation order effects
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

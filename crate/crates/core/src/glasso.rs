//! L1-regularized Gaussian maximum-likelihood precision estimation.
//!
//! The objective is the half-scaled form
//!     (1/2) tr(S Theta) - (1/2) log det Theta + lambda * ||Theta||_1(off-diag).
//! Doubling it gives the common form tr(S Theta) - log det Theta + rho ||Theta||_1
//! with rho = 2 lambda; keep that in mind when comparing against other tools.
//!
//! The solver is a primal block coordinate descent over rows/columns: for each
//! column the subproblem over (theta_12, theta_22) reduces to a lasso solved by
//! coordinate descent, which yields exact zeros in the estimated support.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ggm::{is_symmetric, PrecisionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GlassoOptions {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl GlassoOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iter: 500,
            tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Parameter("lambda must be >= 0".to_string()));
        }
        if self.tol <= 0.0 {
            return Err(Error::Parameter("tol must be > 0".to_string()));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be >= 1".to_string()));
        }
        Ok(())
    }
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self::new(0.1)
    }
}

/// Sum of |m_ij| over off-diagonal entries.
pub fn off_diagonal_l1(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                s += m[(i, j)].abs();
            }
        }
    }
    s
}

/// (1/2) tr(S Theta) - (1/2) log det Theta + lambda ||Theta||_1(off-diag).
pub fn gl_objective(theta: &PrecisionMatrix, s: &DMatrix<f64>, lambda: f64) -> f64 {
    let t = theta.matrix();
    0.5 * (s * t).trace() - 0.5 * theta.log_det() + lambda * off_diagonal_l1(t)
}

fn objective_raw(theta: &DMatrix<f64>, chol: &Cholesky<f64, nalgebra::Dyn>, s: &DMatrix<f64>, lambda: f64) -> f64 {
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    0.5 * (s * theta).trace() - 0.5 * log_det + lambda * off_diagonal_l1(theta)
}

/// Maximum stationarity violation of the half-scaled objective at `theta`.
///
/// With W = Theta^{-1}: on the diagonal |S_ii - W_ii| / 2; for zero
/// off-diagonals max(0, |S_ij - W_ij| / 2 - lambda); for nonzero off-diagonals
/// |(S_ij - W_ij) / 2 + lambda sign(Theta_ij)|.
pub fn kkt_residual(theta: &PrecisionMatrix, s: &DMatrix<f64>, lambda: f64) -> f64 {
    kkt_residual_raw(theta.matrix(), &theta.inverse(), s, lambda)
}

fn kkt_residual_raw(theta: &DMatrix<f64>, w: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = theta.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        worst = worst.max(0.5 * (s[(i, i)] - w[(i, i)]).abs());
        for j in 0..n {
            if i == j {
                continue;
            }
            let grad = 0.5 * (s[(i, j)] - w[(i, j)]);
            let v = if theta[(i, j)] != 0.0 {
                (grad + lambda * theta[(i, j)].signum()).abs()
            } else {
                (grad.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Coordinate descent for min_u 0.5 u' A u + b' u + rho ||u||_1.
/// A must be symmetric PD. Updates `u` in place.
fn lasso_cd(a: &DMatrix<f64>, b: &DVector<f64>, rho: f64, u: &mut DVector<f64>, tol: f64) {
    let n = b.len();
    if n == 0 {
        return;
    }
    for _ in 0..5000 {
        let mut max_delta = 0.0_f64;
        for i in 0..n {
            let mut g = b[i];
            for k in 0..n {
                if k != i {
                    g += a[(i, k)] * u[k];
                }
            }
            // minimize 0.5 a_ii u_i^2 + g u_i + rho |u_i|
            let new = soft_threshold(-g, rho) / a[(i, i)];
            max_delta = max_delta.max((new - u[i]).abs());
            u[i] = new;
        }
        if max_delta <= tol {
            break;
        }
    }
}

fn soft_threshold(v: f64, rho: f64) -> f64 {
    if v > rho {
        v - rho
    } else if v < -rho {
        v + rho
    } else {
        0.0
    }
}

/// Solves the graphical lasso problem for a symmetric PSD input `s`.
pub fn graphical_lasso(s: &DMatrix<f64>, opts: &GlassoOptions) -> Result<PrecisionMatrix> {
    graphical_lasso_with_trace(s, opts).map(|(theta, _)| theta)
}

/// Same as [`graphical_lasso`] but also returns the objective value after each
/// sweep.
pub fn graphical_lasso_with_trace(
    s: &DMatrix<f64>,
    opts: &GlassoOptions,
) -> Result<(PrecisionMatrix, Vec<f64>)> {
    opts.validate()?;
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(Error::Parameter("S must be square and nonempty".to_string()));
    }
    if !is_symmetric(s, 1e-10) {
        return Err(Error::Parameter("S must be symmetric".to_string()));
    }
    let lambda = opts.lambda;
    if s.iter().all(|&v| v == 0.0) {
        return Err(Error::Infeasible(
            "S = 0 with an off-diagonal penalty has no finite minimizer".to_string(),
        ));
    }
    if (0..n).any(|i| s[(i, i)] <= 0.0) {
        return Err(Error::Infeasible(
            "S has a nonpositive diagonal entry".to_string(),
        ));
    }
    if lambda == 0.0 && Cholesky::new(s.clone()).is_none() {
        return Err(Error::Infeasible(
            "lambda = 0 requires positive definite S".to_string(),
        ));
    }
    let rho = 2.0 * lambda; // standard-form penalty

    // start at the diagonal MLE; PD and feasible
    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        theta[(i, i)] = 1.0 / s[(i, i)];
    }
    if n == 1 {
        let t = PrecisionMatrix::new(theta.clone())?;
        let obj = gl_objective(&t, s, lambda);
        return Ok((t, vec![obj]));
    }

    let inner_tol = (opts.tol * 1e-3).min(1e-9);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let others: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j).collect())
        .collect();

    for sweep in 0..opts.max_iter {
        for j in 0..n {
            let idx = &others[j];
            // Theta11^{-1} for the current column's complement block
            let theta11 = DMatrix::from_fn(n - 1, n - 1, |a, b| theta[(idx[a], idx[b])]);
            let chol11 = Cholesky::new(theta11).ok_or_else(|| {
                Error::NotPositiveDefinite("principal submatrix lost definiteness".to_string())
            })?;
            let q = chol11.inverse();
            let s22 = s[(j, j)];
            let a = &q * s22;
            let b = DVector::from_fn(n - 1, |i, _| s[(idx[i], j)]);
            let mut u = DVector::from_fn(n - 1, |i, _| theta[(idx[i], j)]);
            lasso_cd(&a, &b, rho, &mut u, inner_tol);
            let theta22 = (&q * &u).dot(&u) + 1.0 / s22;
            for (i, &row) in idx.iter().enumerate() {
                theta[(row, j)] = u[i];
                theta[(j, row)] = u[i];
            }
            theta[(j, j)] = theta22;
        }
        let chol = Cholesky::new(theta.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("iterate lost definiteness".to_string())
        })?;
        trace.push(objective_raw(&theta, &chol, s, lambda));
        let w = chol.inverse();
        residual = kkt_residual_raw(&theta, &w, s, lambda);
        if residual <= opts.tol {
            let _ = sweep;
            return Ok((PrecisionMatrix::new(theta)?, trace));
        }
    }
    Err(Error::Convergence {
        iters: opts.max_iter,
        tol: opts.tol,
        residual,
        last: Box::new(theta),
    })
}

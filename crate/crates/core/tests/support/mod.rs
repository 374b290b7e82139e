//! Shared helpers for integration tests: random PD instances and an
//! independent proximal-gradient reference solver for the penalized
//! log-determinant problem.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;

/// Random symmetric positive definite matrix A Aᵀ/n + 0.5 I with entries of
/// A uniform in [-1, 1].
pub fn random_pd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    let mut s = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Standard-form objective tr(SΘ) − log det Θ + ρ ‖Θ‖₁ (off-diagonal).
pub fn standard_objective(s: &DMatrix<f64>, theta: &DMatrix<f64>, rho: f64) -> f64 {
    let chol = Cholesky::new(theta.clone()).expect("iterate must stay PD");
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut l1 = 0.0;
    for i in 0..theta.nrows() {
        for j in 0..theta.ncols() {
            if i != j {
                l1 += theta[(i, j)].abs();
            }
        }
    }
    (s * theta).trace() - log_det + rho * l1
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Duality gap of the standard-form problem at `theta`: project W = Theta⁻¹
/// onto the dual feasible box (|W_ij − S_ij| ≤ ρ off-diagonal, W_ii = S_ii)
/// and compare the primal objective with log det W + n. Returns None while the
/// projection is not PD.
fn duality_gap(s: &DMatrix<f64>, theta: &DMatrix<f64>, rho: f64, obj: f64) -> Option<f64> {
    let n = s.nrows();
    let mut w = Cholesky::new(theta.clone())?.inverse();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                w[(i, j)] = s[(i, j)];
            } else {
                w[(i, j)] = w[(i, j)].clamp(s[(i, j)] - rho, s[(i, j)] + rho);
            }
        }
    }
    let chol = Cholesky::new(w)?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Some(obj - log_det - n as f64)
}

/// Proximal-gradient (ISTA with backtracking) minimizer of the standard-form
/// objective, run until the duality gap falls below `gap`. Deliberately
/// shares nothing with the library solver.
pub fn prox_gradient_glasso(s: &DMatrix<f64>, rho: f64, gap: f64) -> DMatrix<f64> {
    let n = s.nrows();
    let mut theta = DMatrix::identity(n, n);
    let mut obj = standard_objective(s, &theta, rho);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let w = Cholesky::new(theta.clone()).expect("iterate must stay PD").inverse();
        let grad = s - &w;
        // backtracking until the candidate is PD and does not increase the
        // objective beyond the quadratic model
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = &theta - step * &grad;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        cand[(i, j)] = soft(cand[(i, j)], step * rho);
                    }
                }
            }
            // re-symmetrize against drift
            for i in 0..n {
                for j in 0..i {
                    let v = 0.5 * (cand[(i, j)] + cand[(j, i)]);
                    cand[(i, j)] = v;
                    cand[(j, i)] = v;
                }
            }
            if Cholesky::new(cand.clone()).is_some() {
                let d = &cand - &theta;
                let model = obj + grad.dot(&d) + d.norm_squared() / (2.0 * step)
                    + rho
                        * (0..n)
                            .flat_map(|i| (0..n).map(move |j| (i, j)))
                            .filter(|&(i, j)| i != j)
                            .map(|(i, j)| cand[(i, j)].abs() - theta[(i, j)].abs())
                            .sum::<f64>();
                let cand_obj = standard_objective(s, &cand, rho);
                if cand_obj <= model + 1e-12 {
                    accepted = Some((cand, cand_obj));
                    break;
                }
            }
            step *= 0.5;
        }
        let (cand, cand_obj) = accepted.expect("backtracking found no PD step");
        theta = cand;
        obj = cand_obj;
        step = (step * 1.2).min(10.0);
        if let Some(g) = duality_gap(s, &theta, rho, obj) {
            if g <= gap {
                return theta;
            }
        }
    }
    panic!("reference solver did not reach gap {gap:.1e} (rho = {rho})");
}

//! Damped least-squares (Levenberg–Marquardt) with box bounds.
//!
//! Damping schedule: `λ ← λ/ν` on an accepted step, `λ ← λν` on a rejected
//! one, `ν = 3`, `λ₀ = 10⁻³` relative to the diagonal of `JᵀJ`. Iteration stops
//! when an accepted step changes the residual sum of squares by less than
//! `rss_rtol` relative, or after `max_iterations`. The Jacobian is taken by
//! central differences, so a run is a deterministic function of its inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A vector of residuals depending on a parameter vector.
pub trait LeastSquares {
    fn residual_count(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Name of parameter `i`, used in diagnostics.
    fn param_name(&self, i: usize) -> String {
        format!("p{i}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub rss_rtol: f64,
    pub lambda_init: f64,
    pub nu: f64,
    /// Smallest eigenvalue of the column-normalized `JᵀJ` treated as non-singular.
    pub rank_tol: f64,
    /// Largest accepted `max_i |(Jᵀr)_i| / (‖J_i‖ ‖r‖)` at convergence, over parameters
    /// not held at a bound.
    pub gradient_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rss_rtol: 1e-10,
            lambda_init: 1e-3,
            nu: 3.0,
            rank_tol: 1e-10,
            gradient_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// One-sigma estimates from `s² (JᵀJ)⁻¹`, `s² = rss/(m − n)`.
    pub sigmas: Vec<f64>,
    /// `s² (JᵀJ)⁻¹`, when the normal matrix is invertible.
    pub covariance: Option<DMatrix<f64>>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient: f64,
    /// Indices of parameters that were projected onto a bound at least once.
    pub projected: Vec<usize>,
}

struct State {
    p: Vec<f64>,
    r: Vec<f64>,
    rss: f64,
}

fn rss_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn project(p: &mut [f64], lower: &[f64], upper: &[f64], hit: &mut [bool]) {
    for i in 0..p.len() {
        if p[i] < lower[i] {
            p[i] = lower[i];
            hit[i] = true;
        } else if p[i] > upper[i] {
            p[i] = upper[i];
            hit[i] = true;
        }
    }
}

fn jacobian<P: LeastSquares>(problem: &P, p: &[f64], lower: &[f64], upper: &[f64]) -> DMatrix<f64> {
    let m = problem.residual_count();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut lo = vec![0.0; m];
    let mut hi = vec![0.0; m];
    let mut q = p.to_vec();
    for j in 0..n {
        let h = 1e-6 * p[j].abs().max(1e-6);
        let (a, b) = ((p[j] - h).max(lower[j]), (p[j] + h).min(upper[j]));
        q[j] = a;
        problem.residuals(&q, &mut lo);
        q[j] = b;
        problem.residuals(&q, &mut hi);
        q[j] = p[j];
        let span = b - a;
        for i in 0..m {
            jac[(i, j)] = (hi[i] - lo[i]) / span;
        }
    }
    jac
}

/// Parameters spanning the numerically null space of `JᵀJ`, or `None`.
pub fn unidentifiable(normal: &DMatrix<f64>, rank_tol: f64) -> Option<Vec<usize>> {
    let n = normal.nrows();
    let diag: Vec<f64> = (0..n).map(|i| normal[(i, i)]).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    let zero: Vec<usize> = (0..n)
        .filter(|&i| !(diag[i] > scale * 1e-300) || diag[i] == 0.0)
        .collect();
    if !zero.is_empty() {
        return Some(zero);
    }
    let corr = DMatrix::from_fn(n, n, |i, j| normal[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eig = SymmetricEigen::new(corr);
    let mut bad = vec![false; n];
    let mut any = false;
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < rank_tol * n as f64 {
            any = true;
            for (i, flag) in bad.iter_mut().enumerate() {
                if eig.eigenvectors[(i, k)].abs() > 0.1 {
                    *flag = true;
                }
            }
        }
    }
    any.then(|| (0..n).filter(|&i| bad[i]).collect())
}

/// Parameters sitting on a bound with the descent direction pointing outside.
fn blocked(p: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> Vec<bool> {
    (0..p.len())
        .map(|i| (p[i] <= lower[i] && grad[i] > 0.0) || (p[i] >= upper[i] && grad[i] < 0.0))
        .collect()
}

/// Largest cosine between a Jacobian column and the residual vector. The
/// residual norm is floored at `r_floor` so that an exact fit, whose residuals
/// are pure rounding, does not read as a non-stationary point.
fn gradient_measure(jac: &DMatrix<f64>, r: &[f64], r_floor: f64, held: &[bool]) -> f64 {
    let rn = rss_of(r).sqrt().max(r_floor);
    if rn == 0.0 {
        return 0.0;
    }
    let rv = DVector::from_column_slice(r);
    let g = jac.transpose() * &rv;
    (0..jac.ncols())
        .map(|j| {
            let cn = jac.column(j).norm();
            if cn == 0.0 || held[j] {
                0.0
            } else {
                g[j].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimizes `‖r(p)‖²` from `init` inside `[lower, upper]`.
pub fn minimize<P: LeastSquares>(
    problem: &P,
    init: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LmOptions,
) -> Result<LmOutcome> {
    let n = init.len();
    let m = problem.residual_count();
    if n == 0 {
        return Err(Error::Usage("no free parameters".into()));
    }
    if m < n {
        return Err(Error::Usage(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    for i in 0..n {
        if !(init[i] >= lower[i] && init[i] <= upper[i]) {
            return Err(Error::Usage(format!(
                "initial {} = {} outside bounds [{}, {}]",
                problem.param_name(i),
                init[i],
                lower[i],
                upper[i]
            )));
        }
    }

    let mut hit = vec![false; n];
    let mut r = vec![0.0; m];
    problem.residuals(init, &mut r);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(
            "residuals not finite at the initial point".into(),
        ));
    }
    let mut st = State {
        p: init.to_vec(),
        rss: rss_of(&r),
        r,
    };
    let r0_norm = st.rss.sqrt();
    let floor = f64::EPSILON * f64::EPSILON * m as f64;

    let mut lambda = opts.lambda_init;
    let mut iterations = 0;
    let mut done = false;
    let mut jac = jacobian(problem, &st.p, lower, upper);
    let normal = jac.transpose() * &jac;
    if let Some(bad) = unidentifiable(&normal, opts.rank_tol) {
        return Err(Error::RankDeficient {
            params: bad.into_iter().map(|i| problem.param_name(i)).collect(),
        });
    }

    let mut trial = vec![0.0; m];
    while iterations < opts.max_iterations && !done {
        iterations += 1;
        let normal = jac.transpose() * &jac;
        let mut grad = jac.transpose() * DVector::from_column_slice(&st.r);
        let held = blocked(&st.p, grad.as_slice(), lower, upper);
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = normal.clone();
            for i in 0..n {
                let d = normal[(i, i)].max(1e-300);
                a[(i, i)] += lambda * d;
            }
            for i in (0..n).filter(|&i| held[i]) {
                a.row_mut(i).fill(0.0);
                a.column_mut(i).fill(0.0);
                a[(i, i)] = 1.0;
                grad[i] = 0.0;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= opts.nu;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let mut p_new: Vec<f64> = st.p.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            project(&mut p_new, lower, upper, &mut hit);
            problem.residuals(&p_new, &mut trial);
            let rss_new = rss_of(&trial);
            if rss_new.is_finite() && rss_new < st.rss {
                let rel = (st.rss - rss_new) / st.rss;
                st.p = p_new;
                std::mem::swap(&mut st.r, &mut trial);
                st.rss = rss_new;
                lambda = (lambda / opts.nu).max(1e-15);
                accepted = true;
                if rel < opts.rss_rtol || st.rss <= floor {
                    done = true;
                }
                break;
            }
            lambda *= opts.nu;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            break;
        }
        jac = jacobian(problem, &st.p, lower, upper);
    }

    let g = jac.transpose() * DVector::from_column_slice(&st.r);
    let held = blocked(&st.p, g.as_slice(), lower, upper);
    let gradient = gradient_measure(&jac, &st.r, 1e-8 * r0_norm, &held);
    let converged = st.rss <= floor || gradient <= opts.gradient_tol;
    let normal = jac.transpose() * &jac;
    let dof = (m - n).max(1) as f64;
    let s2 = st.rss / dof;
    let covariance = normal.try_inverse().map(|inv| inv * s2);
    let sigmas = match &covariance {
        Some(c) => (0..n).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; n],
    };
    Ok(LmOutcome {
        params: st.p,
        sigmas,
        covariance,
        rss: st.rss,
        iterations,
        converged,
        gradient,
        projected: (0..n).filter(|&i| hit[i]).collect(),
    })
}

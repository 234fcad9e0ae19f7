//! Unpreconditioned conjugate gradients.

use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b − A u‖ / ‖b‖` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Recursive residual norm after each iteration, starting with `‖b‖`.
    pub residual_history: Vec<f64>,
    /// `½uᵀAu − bᵀu` after each iteration, starting at zero.
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("dimension mismatch: matrix is {matrix}x{matrix}, vector has {vector} entries")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("no convergence after {} iterations (relative residual {:.3e})", .report.iterations, .report.relative_residual)]
    MaxIterations { solution: Vec<f64>, report: SolveReport },
    #[error("non-finite value encountered at iteration {0}")]
    NonFinite(usize),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Default iteration cap: 20 times the number of unknowns.
pub fn default_max_iterations(n: usize) -> usize {
    20 * n.max(1)
}

/// Solves `A u = b` from `u = 0` until `‖r‖ ≤ tol·‖b‖`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iterations: usize) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::DimensionMismatch { matrix: n, vector: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite(0));
    }
    let mut u = vec![0.0; n];
    let norm_b = dot(b, b).sqrt();
    let mut report = SolveReport { residual_history: vec![norm_b], energy_history: vec![0.0], ..Default::default() };
    if norm_b == 0.0 {
        report.converged = true;
        return Ok((u, report));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut energy = 0.0;
    for it in 1..=max_iterations {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(SolveError::NonFinite(it));
        }
        let alpha = rr / pap;
        for k in 0..n {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        // Each step lowers the energy by (rᵀr)² / (2 pᵀAp).
        energy -= 0.5 * alpha * rr;
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(SolveError::NonFinite(it));
        }
        report.iterations = it;
        report.residual_history.push(rr_new.sqrt());
        report.energy_history.push(energy);
        if rr_new.sqrt() <= tol * norm_b {
            report.relative_residual = true_residual(a, b, &u) / norm_b;
            report.converged = true;
            return Ok((u, report));
        }
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    report.relative_residual = true_residual(a, b, &u) / norm_b;
    Err(SolveError::MaxIterations { solution: u, report })
}

fn true_residual(a: &CsrMatrix, b: &[f64], u: &[f64]) -> f64 {
    let au = a.mul_vec(u);
    au.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt()
}

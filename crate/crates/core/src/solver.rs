//! Jacobi-preconditioned conjugate gradients for the assembled SPD system.
//!
//! Serial with fixed-order reductions, so repeated solves are bit-identical.

use crate::assembly::SparseSystem;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("CG did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// Best iterate reached so far.
        best: Vec<f64>,
    },
    #[error("direction of nonpositive curvature at iteration {0}; system is not positive definite")]
    IndefiniteDetected(usize),
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual |b - Ax| / |b|.
    pub residual: f64,
    pub converged: bool,
    /// Preconditioned residual norm r'Mr per iteration (diagnostic).
    pub rho_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub fn solve(
    system: &SparseSystem,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = system.n;
    let b = &system.rhs;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                rho_history: Vec::new(),
            },
        ));
    }
    let mut diag_inv = vec![1.0; n];
    for i in 0..n {
        let d = system.get(i, i);
        if d > 0.0 {
            diag_inv[i] = 1.0 / d;
        }
    }
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag_inv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rho = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rho_history = vec![rho];
    let mut residual = 1.0;
    for it in 1..=maxit {
        system.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(SolveError::IndefiniteDetected(it));
        }
        let alpha = rho / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        residual = dot(&r, &r).sqrt() / bnorm;
        if residual <= tol {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    residual,
                    converged: true,
                    rho_history,
                },
            ));
        }
        for k in 0..n {
            z[k] = r[k] * diag_inv[k];
        }
        let rho_new = dot(&r, &z);
        let beta = rho_new / rho;
        rho = rho_new;
        rho_history.push(rho);
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(SolveError::NotConverged {
        iterations: maxit,
        residual,
        best: x,
    })
}

/// Default iteration cap, `ceil(20 sqrt(n))`.
pub fn default_maxit(n: usize) -> usize {
    (20.0 * (n as f64).sqrt()).ceil() as usize
}

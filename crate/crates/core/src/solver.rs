//! Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { rel_tol: 1e-12, max_iter: 5000 }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `|b - A x| / |b|` of the returned iterate.
    pub residual: f64,
}

/// Solve `A x = b` for symmetric positive definite `A`.
///
/// Convergence is declared on the recursively updated residual and then
/// confirmed against the true residual; on disagreement the iteration is
/// restarted from the current iterate.
pub fn solve_cg(a: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<CgOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().into_iter().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    loop {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);

        while norm2(&r) > opts.rel_tol * b_norm {
            if iterations >= opts.max_iter {
                return Err(Error::NotConverged { iterations, residual: true_residual(a, b, &x) / b_norm });
            }
            a.mul_vec_into(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if curvature <= 0.0 || !curvature.is_finite() {
                return Err(Error::Breakdown { iteration: iterations, curvature });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }

        let residual = true_residual(a, b, &x) / b_norm;
        if residual <= opts.rel_tol {
            return Ok(CgOutcome { x, iterations, residual });
        }
        // recursive residual drifted from the true one; restart
        let ax = a.mul_vec(&x);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
    }
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt()
}

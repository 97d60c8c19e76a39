use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, dot, norm2};

/// A symmetric positive definite operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `out = self * x`.
    fn apply(&self, x: &[f64], out: &mut [f64]);

    /// Diagonal of the operator, used as a Jacobi preconditioner.
    fn diagonal(&self) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from scratch at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradient for SPD systems.
///
/// Stops once the recursively updated residual drops below `tol * ||b||`.
/// A zero right-hand side returns the zero vector immediately.
pub fn conjugate_gradient<Op: LinearOperator + ?Sized>(
    op: &Op,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = op.dim();
    assert_eq!(b.len(), n, "cg: right-hand side has wrong length");
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut ax = vec![0.0; n];
    op.apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = tol * b_norm;

    let mut iterations = 0;
    let mut converged = norm2(&r) <= target;
    while !converged && iterations < max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        if norm2(&r) <= target {
            converged = true;
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    op.apply(&x, &mut ax);
    let true_res: f64 = libm::sqrt(
        b.iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi - ai) * (bi - ai))
            .sum::<f64>(),
    );
    CgOutcome {
        x,
        iterations,
        relative_residual: true_res / b_norm,
        converged,
    }
}

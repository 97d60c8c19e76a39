//! Fitted factorization, prediction head and out-of-sample encoding.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::params::Hyperparams;

/// Learned sources `D` (`K x M`), coefficients `A` (`N x K`) and regression
/// weights `W` (length `K`).
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub d: Mat,
    pub a: Mat,
    pub w: Vec<f64>,
}

impl Factorization {
    pub fn new(d: Mat, a: Mat, w: Vec<f64>) -> Result<Self> {
        let k = d.rows();
        if a.cols() != k || w.len() != k {
            return Err(Error::Shape(alloc::format!(
                "D has {k} sources but A has {} columns and W has {} entries",
                a.cols(),
                w.len()
            )));
        }
        Ok(Self { d, a, w })
    }

    pub fn k(&self) -> usize {
        self.d.rows()
    }

    pub fn n_analytes(&self) -> usize {
        self.d.cols()
    }

    /// Training-set predictions `A W`.
    pub fn fitted(&self) -> Vec<f64> {
        self.a.matvec(&self.w)
    }
}

/// Prediction head `ŷ = A_new W`.
pub fn predict(f: &Factorization, a_new: &Mat) -> Result<Vec<f64>> {
    if a_new.cols() != f.k() {
        return Err(Error::Shape(alloc::format!(
            "coefficients have {} columns, model has {} sources",
            a_new.cols(),
            f.k()
        )));
    }
    Ok(a_new.matvec(&f.w))
}

pub const ENCODE_KKT_TOL: f64 = 1e-6;
const ENCODE_MAX_SWEEPS: usize = 10_000;

/// Coefficients for samples outside the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub coefficients: Mat,
    /// Largest natural KKT residual `|min(a_k, ∇_k)|` over all samples.
    pub max_kkt_residual: f64,
    /// Rows that hit the sweep cap before reaching [`ENCODE_KKT_TOL`]; their
    /// best iterate is still returned.
    pub unconverged: Vec<usize>,
}

/// Nonnegative elastic-net coding of each row of `features` against a fixed
/// dictionary:
///
/// `min_a (λ_X/2)‖a D − x‖² + λ_{A,ℓ1}‖a‖₁ + (λ_{A,ℓ2}/2)‖a‖²  s.t. a ≥ 0`.
///
/// No graph terms apply since new samples are not part of the training
/// graphs.
pub fn encode(features: &Mat, d: &Mat, h: &Hyperparams) -> Result<Encoding> {
    encode_with(features, d, h.lambda_x, h.lambda_a_l1, h.lambda_a_l2)
}

pub(crate) fn encode_with(
    features: &Mat,
    d: &Mat,
    lambda_x: f64,
    l1: f64,
    l2: f64,
) -> Result<Encoding> {
    if features.cols() != d.cols() {
        return Err(Error::Shape(alloc::format!(
            "samples have {} analytes, dictionary has {}",
            features.cols(),
            d.cols()
        )));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    let k = d.rows();
    let mut hess = d.matmul_t(d).scale(lambda_x);
    hess.add_diagonal(l2);
    let qp = NonnegQp { hess: &hess };

    let mut coefficients = Mat::zeros(features.rows(), k);
    let mut max_kkt_residual: f64 = 0.0;
    let mut unconverged = Vec::new();
    for i in 0..features.rows() {
        let mut b = d.matvec(features.row(i));
        for v in &mut b {
            *v = lambda_x * *v - l1;
        }
        let (a, res) = qp.solve(&b);
        if res > ENCODE_KKT_TOL {
            unconverged.push(i);
        }
        max_kkt_residual = max_kkt_residual.max(res);
        coefficients.row_mut(i).copy_from_slice(&a);
    }
    Ok(Encoding {
        coefficients,
        max_kkt_residual,
        unconverged,
    })
}

/// `min ½ aᵀ H a − bᵀ a  s.t. a ≥ 0` for a small PSD `H`.
pub(crate) struct NonnegQp<'a> {
    pub hess: &'a Mat,
}

impl NonnegQp<'_> {
    fn gradient(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut g = self.hess.matvec(a);
        for (gi, bi) in g.iter_mut().zip(b) {
            *gi -= bi;
        }
        g
    }

    pub fn kkt_residual(&self, a: &[f64], b: &[f64]) -> f64 {
        self.gradient(a, b)
            .iter()
            .zip(a)
            .map(|(g, x)| x.min(*g).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinate descent, with an exact solve on the current support after
    /// every sweep. Returns the iterate and its KKT residual.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let k = b.len();
        let h = self.hess;
        let mut a = vec![0.0; k];
        let mut best = (a.clone(), self.kkt_residual(&a, b));
        if best.1 <= ENCODE_KKT_TOL * 1e-4 {
            return best;
        }
        for _ in 0..ENCODE_MAX_SWEEPS {
            for j in 0..k {
                let hjj = h[(j, j)];
                let mut g = b[j];
                for (p, &ap) in a.iter().enumerate() {
                    if p != j {
                        g -= h[(j, p)] * ap;
                    }
                }
                a[j] = if hjj > 0.0 { (g / hjj).max(0.0) } else { 0.0 };
            }
            if let Some(polished) = self.polish(&a, b) {
                a = polished;
            }
            let res = self.kkt_residual(&a, b);
            if res < best.1 {
                best = (a.clone(), res);
            }
            if res <= ENCODE_KKT_TOL * 1e-4 {
                break;
            }
        }
        best
    }

    /// Solves the unconstrained problem on the support of `a`, dropping
    /// coordinates that come out negative and re-solving. Keeps the result
    /// only if it lowers the KKT residual.
    fn polish(&self, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        let mut support: Vec<usize> = (0..a.len()).filter(|&j| a[j] > 0.0).collect();
        while !support.is_empty() {
            let sub = Mat::from_fn(support.len(), support.len(), |i, j| {
                self.hess[(support[i], support[j])]
            });
            let chol = Cholesky::new(&sub)?;
            let rhs: Vec<f64> = support.iter().map(|&j| b[j]).collect();
            let x = chol.solve(&rhs);
            if x.iter().all(|&v| v >= 0.0) {
                let mut out = vec![0.0; a.len()];
                for (&j, &v) in support.iter().zip(&x) {
                    out[j] = v;
                }
                return (self.kkt_residual(&out, b) <= self.kkt_residual(a, b)).then_some(out);
            }
            if x.iter().any(|v| v.is_nan()) {
                return None;
            }
            support = support
                .iter()
                .zip(&x)
                .filter(|(_, &v)| v > 0.0)
                .map(|(&j, _)| j)
                .collect();
        }
        None
    }
}

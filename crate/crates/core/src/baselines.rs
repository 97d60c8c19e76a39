//! Reference methods: plain NMF, ridge regression, and two "decompose the
//! stacked matrix `[y | X]`" pipelines.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Cholesky, Mat};
use crate::model::encode_with;
use crate::params::Hyperparams;
use crate::solver::farthest_point_rows;

/// Floor added to multiplicative-update denominators.
pub const NMF_EPS: f64 = 1e-12;
/// Jitter added to the ridge penalty when the normal equations are singular.
pub const RIDGE_JITTER: f64 = 1e-12;

/// Result of [`nmf`].
#[derive(Debug, Clone, PartialEq)]
pub struct NmfResult {
    pub a: Mat,
    pub d: Mat,
    /// `‖X − AD‖_F` at the initial point and after every iteration.
    pub error_trace: Vec<f64>,
    pub iterations: usize,
}

/// Lee-Seung multiplicative updates for `X ≈ A D` with `A, D ≥ 0`.
///
/// Stops when the relative drop in reconstruction error falls below `tol`
/// or after `max_iters` iterations.
pub fn nmf(x: &Mat, k: usize, max_iters: usize, tol: f64, seed: u64) -> Result<NmfResult> {
    let (n, m) = x.shape();
    if k == 0 || k > n.min(m) {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be in 1..={}",
            n.min(m)
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("NMF input"));
    }
    if !x.is_nonnegative() {
        return Err(Error::InvalidParameter("NMF input has negative entries".into()));
    }
    let mean = x.as_slice().iter().sum::<f64>() / (n * m) as f64;
    let scale = if mean > 0.0 { libm::sqrt(mean / k as f64) } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Mat::from_fn(n, k, |_, _| scale * (0.1 + rng.random::<f64>()));
    let mut d = Mat::from_fn(k, m, |_, _| scale * (0.1 + rng.random::<f64>()));

    let err = |a: &Mat, d: &Mat| a.matmul(d).sub(x).frobenius();
    let mut trace = vec![err(&a, &d)];
    let mut iterations = 0;
    for _ in 0..max_iters {
        let num = a.t_matmul(x);
        let den = a.gram().matmul(&d);
        d = d.zip_map(&num.zip_map(&den, |p, q| p / (q + NMF_EPS)), |v, r| v * r);
        let num = x.matmul_t(&d);
        let den = a.matmul(&d.matmul_t(&d));
        a = a.zip_map(&num.zip_map(&den, |p, q| p / (q + NMF_EPS)), |v, r| v * r);

        iterations += 1;
        let e = err(&a, &d);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(e);
        if e == 0.0 || (prev - e) / prev.max(f64::MIN_POSITIVE) < tol {
            break;
        }
    }
    Ok(NmfResult {
        a,
        d,
        error_trace: trace,
        iterations,
    })
}

/// Ridge coefficients `(XᵀX + λI)⁻¹ Xᵀy`. Returns the coefficients and the
/// penalty actually used, which exceeds `lambda` only if jitter was needed.
pub fn ridge(x: &Mat, y: &[f64], lambda: f64) -> Result<(Vec<f64>, f64)> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("X has {} rows, y {}", x.rows(), y.len())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("ridge lambda must be >= 0".into()));
    }
    let gram = x.gram();
    let rhs = x.t_matvec(y);
    let mut used = lambda;
    let mut jitter = RIDGE_JITTER;
    for _ in 0..8 {
        let mut g = gram.clone();
        g.add_diagonal(used);
        if let Some(ch) = Cholesky::new(&g) {
            return Ok((ch.solve(&rhs), used));
        }
        log::warn!("ridge normal equations singular at lambda = {used:e}; adding jitter");
        used = lambda + jitter;
        jitter *= 100.0;
    }
    Err(Error::InvalidParameter("ridge system is not positive definite".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BaselineKind {
    /// NMF of `[y_s | X | 1]`, NNLS coding of new samples.
    LrNmf,
    /// Unconstrained dictionary learning of `[y_s | X | 1]` by alternating
    /// ridge steps with unit-norm atoms, ridge coding of new samples.
    Dksvd,
    /// Ridge regression of `y` on `[X | 1]`.
    Ridge,
}

/// A fitted baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    /// Stacked atoms `[w_k | D_k | c_k]`, `K x (M + 2)`; empty for ridge.
    pub atoms: Mat,
    /// Training codes, `N x K`; empty for ridge.
    pub coefficients: Mat,
    /// Ridge: coefficients over `[X | 1]`. Stacked kinds: unused.
    pub ridge_weights: Vec<f64>,
    pub y_offset: f64,
    pub y_range: f64,
    pub code_l2: f64,
    pub iterations: usize,
    pub reconstruction_error: f64,
}

impl BaselineModel {
    pub fn k(&self) -> usize {
        self.atoms.rows()
    }

    /// Regression weights `W` in scaled target units.
    pub fn weights(&self) -> Vec<f64> {
        self.atoms.col(0)
    }

    /// Source profiles over analytes, `K x M`.
    pub fn dictionary(&self) -> Mat {
        let m = self.atoms.cols().saturating_sub(2);
        self.atoms.select_cols(&(1..=m).collect::<Vec<_>>())
    }

    fn feature_atoms(&self) -> Mat {
        let cols: Vec<usize> = (1..self.atoms.cols()).collect();
        self.atoms.select_cols(&cols)
    }

    fn unscale(&self, ys: f64) -> f64 {
        ys * self.y_range + self.y_offset
    }

    /// Predictions for the training rows.
    pub fn fitted(&self) -> Vec<f64> {
        match self.kind {
            BaselineKind::Ridge => Vec::new(),
            _ => self
                .coefficients
                .matvec(&self.weights())
                .into_iter()
                .map(|v| self.unscale(v))
                .collect(),
        }
    }

    /// Codes for new samples (stacked kinds only).
    pub fn encode(&self, x: &Mat) -> Result<Mat> {
        let atoms = self.feature_atoms();
        if x.cols() + 1 != atoms.cols() {
            return Err(Error::Shape(format!(
                "samples have {} analytes, model has {}",
                x.cols(),
                atoms.cols() - 1
            )));
        }
        let aug = augment(x);
        match self.kind {
            BaselineKind::LrNmf => Ok(encode_with(&aug, &atoms, 1.0, 0.0, 0.0)?.coefficients),
            BaselineKind::Dksvd => {
                let mut g = atoms.matmul_t(&atoms);
                g.add_diagonal(self.code_l2);
                let ch = Cholesky::new(&g).ok_or_else(|| {
                    Error::InvalidParameter("atom Gram matrix is singular".into())
                })?;
                Ok(ch.solve_columns(&atoms.matmul_t(&aug)).transpose())
            }
            BaselineKind::Ridge => Err(Error::InvalidParameter(
                "ridge has no source codes".into(),
            )),
        }
    }

    pub fn predict(&self, x: &Mat) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        match self.kind {
            BaselineKind::Ridge => {
                if x.cols() + 1 != self.ridge_weights.len() {
                    return Err(Error::Shape(format!(
                        "samples have {} analytes, model has {}",
                        x.cols(),
                        self.ridge_weights.len() - 1
                    )));
                }
                Ok(augment(x).matvec(&self.ridge_weights))
            }
            _ => {
                let codes = self.encode(x)?;
                Ok(codes
                    .matvec(&self.weights())
                    .into_iter()
                    .map(|v| self.unscale(v))
                    .collect())
            }
        }
    }
}

/// `[X | 1]`.
fn augment(x: &Mat) -> Mat {
    let m = x.cols();
    Mat::from_fn(x.rows(), m + 1, |i, j| if j < m { x[(i, j)] } else { 1.0 })
}

fn target_scale(y: &[f64]) -> (f64, f64) {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    (lo, if range > 0.0 { range } else { 1.0 })
}

fn check_xy(x: &Mat, y: &[f64], k: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("X has {} rows, y {}", x.rows(), y.len())));
    }
    if !x.is_finite() || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    if k == 0 || k > x.rows().min(x.cols() + 2) {
        return Err(Error::InvalidParameter(format!("k = {k} is out of range")));
    }
    Ok(())
}

/// Ridge regression with an unpenalized intercept, fitted on centered data.
/// Weights are stored as `[w | intercept]` to act on `[X | 1]`.
pub fn fit_ridge(x: &Mat, y: &[f64], lambda: f64) -> Result<BaselineModel> {
    check_xy(x, y, 1)?;
    let (n, m) = x.shape();
    let x_mean: Vec<f64> = (0..m).map(|j| x.col(j).iter().sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = Mat::from_fn(n, m, |i, j| x[(i, j)] - x_mean[j]);
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let (mut weights, used) = ridge(&xc, &yc, lambda)?;
    weights.push(y_mean - dot(&x_mean, &weights));
    Ok(BaselineModel {
        kind: BaselineKind::Ridge,
        atoms: Mat::zeros(0, 0),
        coefficients: Mat::zeros(0, 0),
        ridge_weights: weights,
        y_offset: 0.0,
        y_range: 1.0,
        code_l2: used,
        iterations: 0,
        reconstruction_error: 0.0,
    })
}

/// Decomposes `[y_s | X | 1]`, with `y_s` the min-max scaled target, and
/// reads the regression weights off the first column of the atoms.
///
/// `h` supplies `k_sources`, `max_iters`, `tol`, `seed`, and for
/// [`BaselineKind::Dksvd`] the ridge penalties `lambda_a_l2` (codes) and
/// `lambda_d_l2` (atoms).
pub fn fit_stacked(x: &Mat, y: &[f64], kind: BaselineKind, h: &Hyperparams) -> Result<BaselineModel> {
    let k = h.k_sources;
    check_xy(x, y, k)?;
    let (y_offset, y_range) = target_scale(y);
    let (n, m) = x.shape();
    let stacked = Mat::from_fn(n, m + 2, |i, j| match j {
        0 => (y[i] - y_offset) / y_range,
        j if j <= m => x[(i, j - 1)],
        _ => 1.0,
    });

    let (coefficients, atoms, iterations) = match kind {
        BaselineKind::LrNmf => {
            if !x.is_nonnegative() {
                return Err(Error::InvalidParameter(
                    "lr_nmf needs nonnegative features".into(),
                ));
            }
            let r = nmf(&stacked, k, h.max_iters, h.tol, h.seed)?;
            (r.a, r.d, r.iterations)
        }
        BaselineKind::Dksvd => dictionary_als(&stacked, k, h)?,
        BaselineKind::Ridge => {
            return Err(Error::InvalidParameter(
                "use fit_ridge for the ridge baseline".into(),
            ))
        }
    };
    let reconstruction_error = coefficients.matmul(&atoms).sub(&stacked).frobenius();
    Ok(BaselineModel {
        kind,
        atoms,
        coefficients,
        ridge_weights: Vec::new(),
        y_offset,
        y_range,
        code_l2: h.lambda_a_l2.max(RIDGE_JITTER),
        iterations,
        reconstruction_error,
    })
}

/// Alternating ridge updates of codes and atoms, rescaling atoms to unit
/// norm after each pass.
fn dictionary_als(s: &Mat, k: usize, h: &Hyperparams) -> Result<(Mat, Mat, usize)> {
    let la = h.lambda_a_l2.max(RIDGE_JITTER);
    let ld = h.lambda_d_l2.max(RIDGE_JITTER);
    let mut d = s.select_rows(&farthest_point_rows(s, k, h.seed));
    normalize_rows(&mut d, None);
    let mut a = Mat::zeros(s.rows(), k);
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let singular = || Error::InvalidParameter("dictionary update is singular".into());
    for _ in 0..h.max_iters.max(1) {
        let mut g = d.matmul_t(&d);
        g.add_diagonal(la);
        a = Cholesky::new(&g)
            .ok_or_else(singular)?
            .solve_columns(&d.matmul_t(s))
            .transpose();
        let mut g = a.gram();
        g.add_diagonal(ld);
        d = Cholesky::new(&g).ok_or_else(singular)?.solve_columns(&a.t_matmul(s));
        normalize_rows(&mut d, Some(&mut a));
        iterations += 1;
        let err = a.matmul(&d).sub(s).frobenius();
        if !err.is_finite() {
            return Err(Error::Diverged { iteration: iterations });
        }
        if (prev - err).abs() <= h.tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
        prev = err;
    }
    Ok((a, d, iterations))
}

fn normalize_rows(d: &mut Mat, mut a: Option<&mut Mat>) {
    for r in 0..d.rows() {
        let s = norm2(d.row(r));
        if s > 0.0 {
            d.row_mut(r).iter_mut().for_each(|v| *v /= s);
            if let Some(a) = a.as_deref_mut() {
                for i in 0..a.rows() {
                    a[(i, r)] *= s;
                }
            }
        }
    }
}

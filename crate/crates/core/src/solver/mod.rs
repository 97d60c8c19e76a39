//! Block ADMM for the joint objective.
//!
//! Splits: `W = Z_W` (ℓ1), `D = Z_{D,1}` (nonnegativity), `D = Z_{D,2}`
//! (ℓ1), `A = Z_{A,1}` (nonnegativity), `A = Z_{A,2}` (ℓ1), each with its own
//! penalty ρ and scaled dual `U`. One outer iteration updates `W`, then `D`,
//! then `A`.

mod blocks;

pub use blocks::{
    soft_threshold, soft_threshold_mat, update_a, update_d, update_w, ASubproblem, BlockInfo,
    DSubproblem, SylvesterSolution, WSubproblem, CG_TOL, CONDITION_WARN,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::ChemDataset;
use crate::error::{Error, Result};
use crate::graph::{laplacian_quadratic, GraphLaplacian};
use crate::linalg::{distance, norm2, sub_vec, Mat};
use crate::model::{encode_with, Factorization};
use crate::objective::{objective_terms, ObjectiveTerms};
use crate::params::Hyperparams;

/// Relative primal-residual tolerance required before a fit counts as
/// converged.
pub const PRIMAL_TOL: f64 = 1e-4;
/// Consecutive small objective changes required to stop.
pub const STALL_ITERS: usize = 3;

/// Primal blocks, auxiliary copies and scaled duals.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub w: Vec<f64>,
    pub d: Mat,
    pub a: Mat,
    pub z_w: Vec<f64>,
    pub u_w: Vec<f64>,
    pub z_d1: Mat,
    pub u_d1: Mat,
    pub z_d2: Mat,
    pub u_d2: Mat,
    pub z_a1: Mat,
    pub u_a1: Mat,
    pub z_a2: Mat,
    pub u_a2: Mat,
    pub iteration: usize,
}

impl AdmmState {
    /// Auxiliaries start at the primals, duals at zero.
    pub fn new(w: Vec<f64>, d: Mat, a: Mat) -> Self {
        let zd = Mat::zeros(d.rows(), d.cols());
        let za = Mat::zeros(a.rows(), a.cols());
        Self {
            z_w: w.clone(),
            u_w: vec![0.0; w.len()],
            z_d1: d.clone(),
            u_d1: zd.clone(),
            z_d2: d.clone(),
            u_d2: zd,
            z_a1: a.clone(),
            u_a1: za.clone(),
            z_a2: a.clone(),
            u_a2: za,
            w,
            d,
            a,
            iteration: 0,
        }
    }

    pub fn primal_residuals(&self) -> Residuals {
        Residuals {
            w: norm2(&sub_vec(&self.w, &self.z_w)),
            d_nonneg: self.d.sub(&self.z_d1).frobenius(),
            d_l1: self.d.sub(&self.z_d2).frobenius(),
            a_nonneg: self.a.sub(&self.z_a1).frobenius(),
            a_l1: self.a.sub(&self.z_a2).frobenius(),
        }
    }

    /// `‖W − Z_W‖ ≤ tol·(1 + ‖W‖)` and likewise for every `D` and `A` split.
    pub fn primal_feasible(&self, tol: f64) -> bool {
        let r = self.primal_residuals();
        let nw = norm2(&self.w);
        let nd = self.d.frobenius();
        let na = self.a.frobenius();
        r.w <= tol * (1.0 + nw)
            && r.d_nonneg <= tol * (1.0 + nd)
            && r.d_l1 <= tol * (1.0 + nd)
            && r.a_nonneg <= tol * (1.0 + na)
            && r.a_l1 <= tol * (1.0 + na)
    }

    /// The exactly feasible factorization: nonnegative copies of `D`, `A`.
    pub fn feasible_factorization(&self) -> Factorization {
        Factorization {
            d: self.z_d1.clone(),
            a: self.z_a1.clone(),
            w: self.w.clone(),
        }
    }
}

/// One norm per split.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Residuals {
    pub w: f64,
    pub d_nonneg: f64,
    pub d_l1: f64,
    pub a_nonneg: f64,
    pub a_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FitStatus {
    Converged,
    MaxIterations,
}

/// Summary of a fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub status: FitStatus,
    pub iterations: usize,
    /// Objective at the initial point.
    pub initial_objective: f64,
    /// Objective of the feasible iterate after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub primal_residuals: Residuals,
    /// `ρ‖Z_new − Z_old‖` per split from the last iteration.
    pub dual_residuals: Residuals,
    pub warnings: Vec<String>,
    pub hyperparams: Hyperparams,
    pub train_rmse: Option<f64>,
    pub test_rmse: Option<f64>,
    /// Matched cosine similarities against known sources (synthetic runs).
    pub source_similarities: Option<Vec<f64>>,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}

/// Fits `(D, A, W)` to a dataset.
pub fn fit(
    ds: &ChemDataset,
    h: &Hyperparams,
    ls: &GraphLaplacian,
    lt: &GraphLaplacian,
) -> Result<(Factorization, FitReport)> {
    fit_matrices(ds.features(), ds.target(), h, ls, lt)
}

/// [`fit`] on bare matrices.
pub fn fit_matrices(
    x: &Mat,
    y: &[f64],
    h: &Hyperparams,
    ls: &GraphLaplacian,
    lt: &GraphLaplacian,
) -> Result<(Factorization, FitReport)> {
    h.validate()?;
    let (n, _) = x.shape();
    if y.len() != n || ls.n() != n || lt.n() != n {
        return Err(Error::Shape(alloc::format!(
            "X has {n} rows, y {}, Laplacians {} and {}",
            y.len(),
            ls.n(),
            lt.n()
        )));
    }
    if h.k_sources > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "k_sources = {} exceeds the {n} samples",
            h.k_sources
        )));
    }
    if !x.is_finite() || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }

    let mut state = initialize(x, h)?;
    let eval = |s: &AdmmState| -> Result<ObjectiveTerms> {
        objective_terms(x, y, &s.feasible_factorization(), h, ls, lt)
    };
    let initial_objective = eval(&state)?.total();

    let mut trace = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut stalled = 0;
    let mut status = FitStatus::MaxIterations;
    let mut dual = Residuals::default();
    let mut prev = initial_objective;

    for it in 1..=h.max_iters {
        let z_prev = (state.z_w.clone(), state.z_d1.clone(), state.z_d2.clone(), state.z_a1.clone(), state.z_a2.clone());
        for info in [
            update_w(&mut state, y, h),
            update_d(&mut state, x, h),
            update_a(&mut state, x, y, ls, lt, h),
        ] {
            for w in info.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
        if h.balance_scales {
            balance_scales(&mut state, h, ls, lt)?;
        }
        state.iteration = it;
        dual = Residuals {
            w: h.rho_w * distance(&state.z_w, &z_prev.0),
            d_nonneg: h.rho_d1 * state.z_d1.sub(&z_prev.1).frobenius(),
            d_l1: h.rho_d2 * state.z_d2.sub(&z_prev.2).frobenius(),
            a_nonneg: h.rho_a1 * state.z_a1.sub(&z_prev.3).frobenius(),
            a_l1: h.rho_a2 * state.z_a2.sub(&z_prev.4).frobenius(),
        };

        let value = match eval(&state) {
            Ok(t) if t.total().is_finite() => t.total(),
            _ => return Err(Error::Diverged { iteration: it }),
        };
        trace.push(value);
        let rel = (prev - value).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = value;
        stalled = if rel < h.tol { stalled + 1 } else { 0 };
        if stalled >= STALL_ITERS && state.primal_feasible(PRIMAL_TOL) {
            status = FitStatus::Converged;
            break;
        }
    }
    if status == FitStatus::MaxIterations {
        warnings.push(alloc::format!("stopped at max_iters = {}", h.max_iters));
        log::warn!("ADMM stopped at max_iters = {} without converging", h.max_iters);
    }

    let report = FitReport {
        status,
        iterations: state.iteration,
        initial_objective,
        objective_trace: trace,
        primal_residuals: state.primal_residuals(),
        dual_residuals: dual,
        warnings,
        hyperparams: h.clone(),
        train_rmse: None,
        test_rmse: None,
        source_similarities: None,
    };
    Ok((state.feasible_factorization(), report))
}

/// Per-source rescaling `A_k ← s·A_k`, `D_k ← D_k/s`, `W_k ← W_k/s`
/// (auxiliaries and duals alike) with `s` minimizing the scale-dependent
/// penalties at the feasible point. `AD` and `AW` are unchanged, so the
/// objective can only drop. Sources with a zero side are left alone.
pub fn balance_scales(
    state: &mut AdmmState,
    h: &Hyperparams,
    ls: &GraphLaplacian,
    lt: &GraphLaplacian,
) -> Result<()> {
    let (n, k) = state.a.shape();
    for c in 0..k {
        let col = Mat::column(&state.z_a1.col(c));
        let drow = state.z_d1.row(c);
        let mut up = 0.5 * h.lambda_a_l2 * col.frobenius_sq();
        if h.lambda_s > 0.0 {
            up += h.lambda_s * laplacian_quadratic(ls, &col)?;
        }
        if h.lambda_t > 0.0 {
            up += h.lambda_t * laplacian_quadratic(lt, &col)?;
        }
        let up_lin = h.lambda_a_l1 * col.l1_norm();
        let w = state.w[c];
        let down = 0.5 * h.lambda_d_l2 * drow.iter().map(|v| v * v).sum::<f64>()
            + 0.5 * h.lambda_w_l2 * w * w;
        let down_lin =
            h.lambda_d_l1 * drow.iter().map(|v| v.abs()).sum::<f64>() + h.lambda_w_l1 * w.abs();
        let Some(s) = best_scale(up, up_lin, down, down_lin) else {
            continue;
        };
        for m in [
            &mut state.a,
            &mut state.z_a1,
            &mut state.z_a2,
            &mut state.u_a1,
            &mut state.u_a2,
        ] {
            for i in 0..n {
                m[(i, c)] *= s;
            }
        }
        for m in [
            &mut state.d,
            &mut state.z_d1,
            &mut state.z_d2,
            &mut state.u_d1,
            &mut state.u_d2,
        ] {
            m.row_mut(c).iter_mut().for_each(|v| *v /= s);
        }
        for v in [&mut state.w, &mut state.z_w, &mut state.u_w] {
            v[c] /= s;
        }
    }
    Ok(())
}

/// Minimizer of `α s² + γ s + β/s² + δ/s` over `s > 0`, by Newton steps on
/// `t = ln s` where the function is convex. `None` if either side vanishes.
fn best_scale(alpha: f64, gamma: f64, beta: f64, delta: f64) -> Option<f64> {
    if !(alpha + gamma > 0.0 && beta + delta > 0.0) {
        return None;
    }
    let mut t: f64 = if gamma == 0.0 && delta == 0.0 {
        return Some(libm::pow(beta / alpha, 0.25)).filter(|s| s.is_finite() && *s > 0.0);
    } else {
        0.0
    };
    for _ in 0..100 {
        let (e1, e2) = (libm::exp(t), libm::exp(2.0 * t));
        let g = 2.0 * alpha * e2 + gamma * e1 - 2.0 * beta / e2 - delta / e1;
        let hess = 4.0 * alpha * e2 + gamma * e1 + 4.0 * beta / e2 + delta / e1;
        let step = (g / hess).clamp(-2.0, 2.0);
        t -= step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    let s = libm::exp(t);
    (s.is_finite() && s > 0.0).then_some(s)
}

/// `D` from farthest-point sampling over rows of `X` (first row drawn from
/// the seed, later ties to the lowest index); `A` from one nonnegative
/// least-squares pass against that `D`; `W = 0`.
pub fn initialize(x: &Mat, h: &Hyperparams) -> Result<AdmmState> {
    let k = h.k_sources;
    let rows = farthest_point_rows(x, k, h.seed);
    let d = x.select_rows(&rows);
    let a = encode_with(x, &d, 1.0, 0.0, 0.0)?.coefficients;
    Ok(AdmmState::new(vec![0.0; k], d, a))
}

/// Indices of `k` rows chosen by farthest-point sampling.
pub fn farthest_point_rows(x: &Mat, k: usize, seed: u64) -> Vec<usize> {
    let n = x.rows();
    assert!(k <= n && n > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut min_dist: Vec<f64> = (0..n).map(|i| distance(x.row(i), x.row(first))).collect();
    while chosen.len() < k {
        let mut best = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            match best {
                Some((_, d)) if min_dist[i] <= d => {}
                _ => best = Some((i, min_dist[i])),
            }
        }
        let (next, _) = best.expect("k <= n leaves a candidate");
        chosen.push(next);
        for (i, md) in min_dist.iter_mut().enumerate() {
            *md = md.min(distance(x.row(i), x.row(next)));
        }
    }
    chosen
}

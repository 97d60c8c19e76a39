//! The three ADMM block updates.
//!
//! Each block minimizes its smooth augmented-Lagrangian subproblem in closed
//! form, then refreshes its auxiliary copies by projection or shrinkage and
//! takes a scaled dual step. The subproblem structs are public so their value
//! and gradient can be checked from outside.

use alloc::string::String;
use alloc::vec::Vec;

use crate::graph::{GraphLaplacian, ShiftedLaplacians};
use crate::linalg::{conjugate_gradient, symmetric_eigen, Cholesky, Mat};
use crate::params::Hyperparams;

use super::AdmmState;

/// Relative residual targeted by the per-column CG solves in the `A` block.
pub const CG_TOL: f64 = 1e-10;
/// Conditioning above which a block solve is reported.
pub const CONDITION_WARN: f64 = 1e12;

/// `sign(v) · max(|v| − t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn soft_threshold_mat(m: &Mat, t: f64) -> Mat {
    m.map(|v| soft_threshold(v, t))
}

/// Diagnostics from one block update.
#[derive(Debug, Clone, Default)]
pub struct BlockInfo {
    pub condition_estimate: f64,
    /// Frobenius norm of the right-hand side of the stationarity system.
    pub rhs_norm: f64,
    pub cg_iterations: usize,
    pub warnings: Vec<String>,
}

fn sq_dist(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    // ‖a − b + c‖²
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, z), u)| (x - z + u) * (x - z + u))
        .sum()
}

/// `W` subproblem:
/// `½ p‖AW − y‖² + (λ_{W,ℓ2}/2)‖W‖² + (ρ_W/2)‖W − Z_W + U_W‖²`.
pub struct WSubproblem<'a> {
    pub a: &'a Mat,
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub u: &'a [f64],
    pub pred_weight: f64,
    pub l2: f64,
    pub rho: f64,
}

impl<'a> WSubproblem<'a> {
    pub fn new(state: &'a AdmmState, y: &'a [f64], h: &Hyperparams) -> Self {
        Self {
            a: &state.a,
            y,
            z: &state.z_w,
            u: &state.u_w,
            pred_weight: h.prediction_weight,
            l2: h.lambda_w_l2,
            rho: h.rho_w,
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let r: f64 = self
            .a
            .matvec(w)
            .iter()
            .zip(self.y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let w2: f64 = w.iter().map(|v| v * v).sum();
        0.5 * self.pred_weight * r + 0.5 * self.l2 * w2 + 0.5 * self.rho * sq_dist(w, self.z, self.u)
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let resid: Vec<f64> = self.a.matvec(w).iter().zip(self.y).map(|(p, t)| p - t).collect();
        let mut g = self.a.t_matvec(&resid);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = self.pred_weight * *gi + self.l2 * w[i] + self.rho * (w[i] - self.z[i] + self.u[i]);
        }
        g
    }

    /// Normal equations `(p AᵀA + (λ_{W,ℓ2} + ρ_W) I) W = p Aᵀy + ρ_W (Z_W − U_W)`.
    pub fn system(&self) -> (Mat, Vec<f64>) {
        let mut m = self.a.gram().scale(self.pred_weight);
        m.add_diagonal(self.l2 + self.rho);
        let mut rhs = self.a.t_matvec(self.y);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = self.pred_weight * *r + self.rho * (self.z[i] - self.u[i]);
        }
        (m, rhs)
    }

    pub fn solve(&self) -> (Vec<f64>, BlockInfo) {
        let (m, rhs) = self.system();
        let chol = Cholesky::new(&m).expect("W system is SPD because rho_w > 0");
        let info = block_info(&chol, crate::linalg::norm2(&rhs), "W");
        (chol.solve(&rhs), info)
    }
}

fn block_info(chol: &Cholesky, rhs_norm: f64, block: &str) -> BlockInfo {
    let cond = chol.condition_estimate();
    let mut warnings = Vec::new();
    if cond > CONDITION_WARN {
        warnings.push(alloc::format!(
            "{block} block system is ill-conditioned (estimate {cond:.3e})"
        ));
    }
    BlockInfo {
        condition_estimate: cond,
        rhs_norm,
        cg_iterations: 0,
        warnings,
    }
}

/// W block: closed-form solve, ℓ1 shrinkage of the copy, dual step.
pub fn update_w(state: &mut AdmmState, y: &[f64], h: &Hyperparams) -> BlockInfo {
    let (w, info) = WSubproblem::new(state, y, h).solve();
    let t = h.lambda_w_l1 / h.rho_w;
    for i in 0..w.len() {
        state.z_w[i] = soft_threshold(w[i] + state.u_w[i], t);
        state.u_w[i] += w[i] - state.z_w[i];
    }
    state.w = w;
    info
}

/// `D` subproblem:
/// `(λ_X/2)‖AD − X‖² + (λ_{D,ℓ2}/2)‖D‖² + (ρ_{D,1}/2)‖D − Z_{D,1} + U_{D,1}‖²
///  + (ρ_{D,2}/2)‖D − Z_{D,2} + U_{D,2}‖²`.
pub struct DSubproblem<'a> {
    pub a: &'a Mat,
    pub x: &'a Mat,
    pub z1: &'a Mat,
    pub u1: &'a Mat,
    pub z2: &'a Mat,
    pub u2: &'a Mat,
    pub lambda_x: f64,
    pub l2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl<'a> DSubproblem<'a> {
    pub fn new(state: &'a AdmmState, x: &'a Mat, h: &Hyperparams) -> Self {
        Self {
            a: &state.a,
            x,
            z1: &state.z_d1,
            u1: &state.u_d1,
            z2: &state.z_d2,
            u2: &state.u_d2,
            lambda_x: h.lambda_x,
            l2: h.lambda_d_l2,
            rho1: h.rho_d1,
            rho2: h.rho_d2,
        }
    }

    pub fn value(&self, d: &Mat) -> f64 {
        0.5 * self.lambda_x * self.a.matmul(d).sub(self.x).frobenius_sq()
            + 0.5 * self.l2 * d.frobenius_sq()
            + 0.5 * self.rho1 * sq_dist(d.as_slice(), self.z1.as_slice(), self.u1.as_slice())
            + 0.5 * self.rho2 * sq_dist(d.as_slice(), self.z2.as_slice(), self.u2.as_slice())
    }

    pub fn gradient(&self, d: &Mat) -> Mat {
        let resid = self.a.matmul(d).sub(self.x);
        let mut g = self.a.t_matmul(&resid).scale(self.lambda_x);
        g.add_scaled(self.l2, d);
        g.add_scaled(self.rho1, &d.sub(self.z1).add(self.u1));
        g.add_scaled(self.rho2, &d.sub(self.z2).add(self.u2));
        g
    }

    /// `(λ_X AᵀA + (λ_{D,ℓ2} + ρ_{D,1} + ρ_{D,2}) I) D = RHS`, one `K x K`
    /// matrix shared by all `M` columns.
    pub fn system(&self) -> (Mat, Mat) {
        let mut m = self.a.gram().scale(self.lambda_x);
        m.add_diagonal(self.l2 + self.rho1 + self.rho2);
        let mut rhs = self.a.t_matmul(self.x).scale(self.lambda_x);
        rhs.add_scaled(self.rho1, &self.z1.sub(self.u1));
        rhs.add_scaled(self.rho2, &self.z2.sub(self.u2));
        (m, rhs)
    }

    pub fn solve(&self) -> (Mat, BlockInfo) {
        let (m, rhs) = self.system();
        let chol = Cholesky::new(&m).expect("D system is SPD because rho_d > 0");
        let info = block_info(&chol, rhs.frobenius(), "D");
        (chol.solve_columns(&rhs), info)
    }
}

/// D block: closed-form solve, then nonnegative projection and ℓ1 shrinkage
/// of the two copies, then dual steps.
pub fn update_d(state: &mut AdmmState, x: &Mat, h: &Hyperparams) -> BlockInfo {
    let (d, info) = DSubproblem::new(state, x, h).solve();
    let t = h.lambda_d_l1 / h.rho_d2;
    split_updates(
        &d,
        (&mut state.z_d1, &mut state.u_d1),
        (&mut state.z_d2, &mut state.u_d2),
        t,
    );
    state.d = d;
    info
}

fn split_updates(primal: &Mat, nonneg: (&mut Mat, &mut Mat), l1: (&mut Mat, &mut Mat), t: f64) {
    let (z1, u1) = nonneg;
    let (z2, u2) = l1;
    let p = primal.as_slice();
    for (i, &v) in p.iter().enumerate() {
        let z = (v + u1.as_slice()[i]).max(0.0);
        z1.as_mut_slice()[i] = z;
        u1.as_mut_slice()[i] += v - z;
        let z = soft_threshold(v + u2.as_slice()[i], t);
        z2.as_mut_slice()[i] = z;
        u2.as_mut_slice()[i] += v - z;
    }
}

/// `A` subproblem:
/// `½ p‖AW − y‖² + (λ_X/2)‖AD − X‖² + (λ_{A,ℓ2}/2)‖A‖² + λ_S Tr(AᵀL_S A)
///  + λ_T Tr(AᵀL_T A) + (ρ_{A,1}/2)‖A − Z_{A,1} + U_{A,1}‖²
///  + (ρ_{A,2}/2)‖A − Z_{A,2} + U_{A,2}‖²`.
///
/// Its stationarity condition is the Sylvester equation
/// `(2λ_S L_S + 2λ_T L_T) A + A M = RHS` with
/// `M = p WWᵀ + λ_X DDᵀ + (λ_{A,ℓ2} + ρ_{A,1} + ρ_{A,2}) I`.
pub struct ASubproblem<'a> {
    pub d: &'a Mat,
    pub w: &'a [f64],
    pub x: &'a Mat,
    pub y: &'a [f64],
    pub ls: &'a GraphLaplacian,
    pub lt: &'a GraphLaplacian,
    pub z1: &'a Mat,
    pub u1: &'a Mat,
    pub z2: &'a Mat,
    pub u2: &'a Mat,
    pub pred_weight: f64,
    pub lambda_x: f64,
    pub l2: f64,
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub rho1: f64,
    pub rho2: f64,
}

/// Output of the `A`-block Sylvester solve.
#[derive(Debug, Clone)]
pub struct SylvesterSolution {
    pub a: Mat,
    pub info: BlockInfo,
    /// Largest relative residual among the per-column CG solves.
    pub max_cg_residual: f64,
}

impl<'a> ASubproblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: &'a AdmmState,
        x: &'a Mat,
        y: &'a [f64],
        ls: &'a GraphLaplacian,
        lt: &'a GraphLaplacian,
        h: &Hyperparams,
    ) -> Self {
        Self {
            d: &state.d,
            w: &state.w,
            x,
            y,
            ls,
            lt,
            z1: &state.z_a1,
            u1: &state.u_a1,
            z2: &state.z_a2,
            u2: &state.u_a2,
            pred_weight: h.prediction_weight,
            lambda_x: h.lambda_x,
            l2: h.lambda_a_l2,
            lambda_s: h.lambda_s,
            lambda_t: h.lambda_t,
            rho1: h.rho_a1,
            rho2: h.rho_a2,
        }
    }

    pub fn value(&self, a: &Mat) -> f64 {
        let r: f64 = a
            .matvec(self.w)
            .iter()
            .zip(self.y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        // dense trace form on purpose; the solver never evaluates this
        let quad = |l: &GraphLaplacian| a.t_matmul(&l.apply_mat(a)).trace();
        0.5 * self.pred_weight * r
            + 0.5 * self.lambda_x * a.matmul(self.d).sub(self.x).frobenius_sq()
            + 0.5 * self.l2 * a.frobenius_sq()
            + self.lambda_s * quad(self.ls)
            + self.lambda_t * quad(self.lt)
            + 0.5 * self.rho1 * sq_dist(a.as_slice(), self.z1.as_slice(), self.u1.as_slice())
            + 0.5 * self.rho2 * sq_dist(a.as_slice(), self.z2.as_slice(), self.u2.as_slice())
    }

    /// Right factor `M` of the Sylvester form (`K x K`, SPD).
    pub fn right_matrix(&self) -> Mat {
        let k = self.w.len();
        let mut m = Mat::from_fn(k, k, |i, j| self.pred_weight * self.w[i] * self.w[j]);
        m.add_scaled(self.lambda_x, &self.d.matmul_t(self.d));
        m.add_diagonal(self.l2 + self.rho1 + self.rho2);
        m
    }

    pub fn rhs(&self) -> Mat {
        let n = self.x.rows();
        let k = self.w.len();
        let mut rhs = Mat::from_fn(n, k, |i, j| self.pred_weight * self.y[i] * self.w[j]);
        rhs.add_scaled(self.lambda_x, &self.x.matmul_t(self.d));
        rhs.add_scaled(self.rho1, &self.z1.sub(self.u1));
        rhs.add_scaled(self.rho2, &self.z2.sub(self.u2));
        rhs
    }

    /// `(2λ_S L_S + 2λ_T L_T) A + A M − RHS`, the gradient of the
    /// subproblem.
    pub fn gradient(&self, a: &Mat) -> Mat {
        let mut g = a.matmul(&self.right_matrix());
        if self.lambda_s != 0.0 {
            g.add_scaled(2.0 * self.lambda_s, &self.ls.apply_mat(a));
        }
        if self.lambda_t != 0.0 {
            g.add_scaled(2.0 * self.lambda_t, &self.lt.apply_mat(a));
        }
        g.sub(&self.rhs())
    }

    /// Diagonalizes `M = QΛQᵀ`, then solves the `K` decoupled sparse SPD
    /// systems `(2λ_S L_S + 2λ_T L_T + Λ_kk I) ã_k = (RHS Q)_k` by CG and
    /// rotates back with `A = Ã Qᵀ`. `warm` seeds CG with a previous `A`.
    pub fn solve(&self, warm: Option<&Mat>) -> SylvesterSolution {
        let n = self.x.rows();
        let m = self.right_matrix();
        let eig = symmetric_eigen(&m);
        let q = &eig.vectors;
        let rhs = self.rhs();
        let rhs_q = rhs.matmul(q);
        let warm_q = warm.map(|a| a.matmul(q));

        let mut info = BlockInfo {
            rhs_norm: rhs.frobenius(),
            ..BlockInfo::default()
        };
        let (lo, hi) = eig
            .values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        info.condition_estimate = hi / lo;

        let mut a_rot = Mat::zeros(n, eig.values.len());
        let mut max_res: f64 = 0.0;
        let cap = 10 * n + 100;
        for (k, &lam) in eig.values.iter().enumerate() {
            let b = rhs_q.col(k);
            let x0 = warm_q.as_ref().map(|wq| wq.col(k));
            let mut shift = lam;
            let mut out;
            let mut attempts = 0;
            loop {
                let op = ShiftedLaplacians {
                    terms: [(2.0 * self.lambda_s, self.ls), (2.0 * self.lambda_t, self.lt)],
                    shift,
                };
                out = conjugate_gradient(&op, &b, x0.as_deref(), CG_TOL, cap);
                info.cg_iterations += out.iterations;
                attempts += 1;
                if out.converged || attempts == 3 {
                    break;
                }
                shift += 1e-10;
                info.warnings.push(alloc::format!(
                    "CG on rotated column {k} did not converge (residual {:.2e}); retrying with diagonal shift +1e-10",
                    out.relative_residual
                ));
            }
            max_res = max_res.max(out.relative_residual);
            a_rot.set_col(k, &out.x);
        }
        SylvesterSolution {
            a: a_rot.matmul_t(q),
            info,
            max_cg_residual: max_res,
        }
    }
}

/// A block: Sylvester solve, projection/shrinkage of the two copies, duals.
pub fn update_a(
    state: &mut AdmmState,
    x: &Mat,
    y: &[f64],
    ls: &GraphLaplacian,
    lt: &GraphLaplacian,
    h: &Hyperparams,
) -> BlockInfo {
    let sol = ASubproblem::new(state, x, y, ls, lt, h).solve(Some(&state.a));
    let t = h.lambda_a_l1 / h.rho_a2;
    split_updates(
        &sol.a,
        (&mut state.z_a1, &mut state.u_a1),
        (&mut state.z_a2, &mut state.u_a2),
        t,
    );
    state.a = sol.a;
    sol.info
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.7, 0.0), 1.7);
        assert_eq!(soft_threshold(-1.7, 0.0), -1.7);
    }

    #[test]
    fn w_with_zero_target_and_copies_is_zero() {
        let a = Mat::from_rows(&[[1.0, 0.5], [0.2, 2.0], [0.3, 0.3]]).unwrap();
        let mut state = AdmmState::new(vec![0.0; 2], Mat::zeros(2, 2), a);
        update_w(&mut state, &[0.0; 3], &Hyperparams::default());
        assert_eq!(state.w, vec![0.0, 0.0]);
    }

    #[test]
    fn w_tends_to_y_for_identity_design() {
        let mut h = Hyperparams::default();
        h.lambda_w_l2 = 0.0;
        h.rho_w = 1e-12;
        let mut state = AdmmState::new(vec![0.0; 3], Mat::zeros(3, 1), Mat::identity(3));
        update_w(&mut state, &[1.0, -2.0, 3.0], &h);
        for (w, y) in state.w.iter().zip([1.0, -2.0, 3.0]) {
            assert!((w - y).abs() < 1e-10);
        }
    }

    #[test]
    fn d_with_zero_data_is_zero_and_copies_clamp() {
        let a = Mat::from_rows(&[[1.0, 0.5], [0.2, 2.0], [0.3, 0.3]]).unwrap();
        let mut state = AdmmState::new(vec![0.0; 2], Mat::zeros(2, 4), a);
        update_d(&mut state, &Mat::zeros(3, 4), &Hyperparams::default());
        assert_eq!(state.d, Mat::zeros(2, 4));

        state.d = Mat::from_rows(&[[-1.0, 2.0], [0.5, -1.0]]).unwrap();
        let mut z1 = Mat::zeros(2, 2);
        let mut u1 = Mat::zeros(2, 2);
        let mut z2 = Mat::zeros(2, 2);
        let mut u2 = Mat::zeros(2, 2);
        split_updates(&state.d, (&mut z1, &mut u1), (&mut z2, &mut u2), 0.0);
        assert_eq!(z1, Mat::from_rows(&[[0.0, 2.0], [0.5, 0.0]]).unwrap());
        assert_eq!(u1, Mat::from_rows(&[[-1.0, 0.0], [0.0, -1.0]]).unwrap());
        assert_eq!(z2, state.d);
    }

    #[test]
    fn a_with_zero_rhs_is_zero() {
        let l = GraphLaplacian::from_edges(3, [(0, 1, 1.0), (1, 2, 0.5)]).unwrap();
        let d = Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut state = AdmmState::new(vec![1.0, -1.0], d, Mat::zeros(3, 2));
        let mut h = Hyperparams::default();
        h.lambda_s = 1.0;
        h.lambda_t = 0.5;
        update_a(&mut state, &Mat::zeros(3, 2), &[0.0; 3], &l, &l, &h);
        assert_eq!(state.a, Mat::zeros(3, 2));
    }
}

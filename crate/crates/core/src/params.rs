use alloc::format;

use crate::error::{Error, Result};

/// Loss weights, ADMM penalties, and solver controls.
///
/// The λ fields weight the terms of the joint objective (see
/// [`crate::objective`]). The ρ fields are the ADMM penalties of the five
/// auxiliary splits: ℓ1 copy of `W`, nonnegative and ℓ1 copies of `D`,
/// nonnegative and ℓ1 copies of `A`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Hyperparams {
    /// Weight on `½‖AW − y‖²`. Zero turns the fit into a plain regularized
    /// nonnegative factorization of `X`.
    pub prediction_weight: f64,
    pub lambda_x: f64,
    pub lambda_w_l1: f64,
    pub lambda_w_l2: f64,
    pub lambda_a_l1: f64,
    pub lambda_a_l2: f64,
    pub lambda_d_l1: f64,
    pub lambda_d_l2: f64,
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub rho_w: f64,
    pub rho_d1: f64,
    pub rho_d2: f64,
    pub rho_a1: f64,
    pub rho_a2: f64,
    pub k_sources: usize,
    /// Rescale each source after every outer iteration so the
    /// scale-dependent penalties are balanced (`A_k·s`, `D_k/s`, `W_k/s`
    /// leaves both fits unchanged).
    pub balance_scales: bool,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

pub const DEFAULT_RHO: f64 = 1e-3;

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            prediction_weight: 1.0,
            lambda_x: 1.0,
            lambda_w_l1: 0.0,
            lambda_w_l2: 1e-3,
            lambda_a_l1: 0.0,
            lambda_a_l2: 1e-3,
            lambda_d_l1: 0.0,
            lambda_d_l2: 1e-3,
            lambda_s: 1e-2,
            lambda_t: 1e-2,
            rho_w: DEFAULT_RHO,
            rho_d1: DEFAULT_RHO,
            rho_d2: DEFAULT_RHO,
            rho_a1: DEFAULT_RHO,
            rho_a2: DEFAULT_RHO,
            k_sources: 3,
            balance_scales: false,
            max_iters: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn lambdas(&self) -> [(&'static str, f64); 10] {
        [
            ("prediction_weight", self.prediction_weight),
            ("lambda_x", self.lambda_x),
            ("lambda_w_l1", self.lambda_w_l1),
            ("lambda_w_l2", self.lambda_w_l2),
            ("lambda_a_l1", self.lambda_a_l1),
            ("lambda_a_l2", self.lambda_a_l2),
            ("lambda_d_l1", self.lambda_d_l1),
            ("lambda_d_l2", self.lambda_d_l2),
            ("lambda_s", self.lambda_s),
            ("lambda_t", self.lambda_t),
        ]
    }

    pub fn rhos(&self) -> [(&'static str, f64); 5] {
        [
            ("rho_w", self.rho_w),
            ("rho_d1", self.rho_d1),
            ("rho_d2", self.rho_d2),
            ("rho_a1", self.rho_a1),
            ("rho_a2", self.rho_a2),
        ]
    }

    /// Sum of the three ℓ1 weights; the cross-validation tie-breaker.
    pub fn l1_total(&self) -> f64 {
        self.lambda_w_l1 + self.lambda_a_l1 + self.lambda_d_l1
    }

    pub fn set_all_rhos(&mut self, rho: f64) {
        self.rho_w = rho;
        self.rho_d1 = rho;
        self.rho_d2 = rho;
        self.rho_a1 = rho;
        self.rho_a2 = rho;
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.lambdas() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in self.rhos() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.k_sources == 0 {
            return Err(Error::InvalidParameter("k_sources must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Graph construction settings shared by fitting, CV, and the CLI.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GraphParams {
    pub k_neighbors: usize,
    /// Fixed Gaussian bandwidth in meters; median neighbor distance if unset.
    pub bandwidth_m: Option<f64>,
    pub window_days: u32,
    pub period_days: u32,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            k_neighbors: 10,
            bandwidth_m: None,
            window_days: 30,
            period_days: 365,
        }
    }
}

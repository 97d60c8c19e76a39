//! The joint prediction + source-detection objective.
//!
//! ```text
//! ½‖AW − y‖² + (λ_X/2)‖AD − X‖²_F
//!   + λ_{W,ℓ1}‖W‖₁ + (λ_{W,ℓ2}/2)‖W‖²
//!   + λ_{A,ℓ1}‖A‖₁ + (λ_{A,ℓ2}/2)‖A‖²_F
//!   + λ_{D,ℓ1}‖D‖₁ + (λ_{D,ℓ2}/2)‖D‖²_F
//!   + λ_S Tr(AᵀL_S A) + λ_T Tr(AᵀL_T A)
//! ```
//!
//! The prediction term carries an extra `prediction_weight` (1 by default).

use crate::data::ChemDataset;
use crate::error::{Error, Result};
use crate::graph::{laplacian_quadratic, GraphLaplacian};
use crate::linalg::Mat;
use crate::model::Factorization;
use crate::params::Hyperparams;

/// The ten weighted terms of the objective, each already multiplied by its
/// weight.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveTerms {
    pub prediction: f64,
    pub reconstruction: f64,
    pub w_l1: f64,
    pub w_l2: f64,
    pub a_l1: f64,
    pub a_l2: f64,
    pub d_l1: f64,
    pub d_l2: f64,
    pub spatial: f64,
    pub temporal: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.prediction
            + self.reconstruction
            + self.w_l1
            + self.w_l2
            + self.a_l1
            + self.a_l2
            + self.d_l1
            + self.d_l2
            + self.spatial
            + self.temporal
    }
}

/// Objective value for a dataset.
pub fn objective(
    ds: &ChemDataset,
    f: &Factorization,
    h: &Hyperparams,
    ls: &GraphLaplacian,
    lt: &GraphLaplacian,
) -> Result<f64> {
    objective_terms(ds.features(), ds.target(), f, h, ls, lt).map(|t| t.total())
}

/// Term-by-term objective on bare matrices.
pub fn objective_terms(
    x: &Mat,
    y: &[f64],
    f: &Factorization,
    h: &Hyperparams,
    ls: &GraphLaplacian,
    lt: &GraphLaplacian,
) -> Result<ObjectiveTerms> {
    let (n, m) = x.shape();
    let k = f.k();
    if y.len() != n || f.a.shape() != (n, k) || f.d.shape() != (k, m) || f.w.len() != k {
        return Err(Error::Shape(alloc::format!(
            "X {n}x{m}, y {}, A {:?}, D {:?}, W {}",
            y.len(),
            f.a.shape(),
            f.d.shape(),
            f.w.len()
        )));
    }
    if ls.n() != n || lt.n() != n {
        return Err(Error::Shape(alloc::format!(
            "Laplacians are {}x{} and {}x{}, expected {n}x{n}",
            ls.n(),
            ls.n(),
            lt.n(),
            lt.n()
        )));
    }
    if !x.is_finite() || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("data"));
    }
    if !f.a.is_finite() || !f.d.is_finite() || !f.w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("factorization"));
    }

    let resid_y: f64 = f
        .a
        .matvec(&f.w)
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    let resid_x = f.a.matmul(&f.d).sub(x).frobenius_sq();
    let w_sq: f64 = f.w.iter().map(|v| v * v).sum();
    let w_abs: f64 = f.w.iter().map(|v| v.abs()).sum();

    Ok(ObjectiveTerms {
        prediction: 0.5 * h.prediction_weight * resid_y,
        reconstruction: 0.5 * h.lambda_x * resid_x,
        w_l1: h.lambda_w_l1 * w_abs,
        w_l2: 0.5 * h.lambda_w_l2 * w_sq,
        a_l1: h.lambda_a_l1 * f.a.l1_norm(),
        a_l2: 0.5 * h.lambda_a_l2 * f.a.frobenius_sq(),
        d_l1: h.lambda_d_l1 * f.d.l1_norm(),
        d_l2: 0.5 * h.lambda_d_l2 * f.d.frobenius_sq(),
        spatial: weighted_quadratic(h.lambda_s, ls, &f.a)?,
        temporal: weighted_quadratic(h.lambda_t, lt, &f.a)?,
    })
}

fn weighted_quadratic(lambda: f64, l: &GraphLaplacian, a: &Mat) -> Result<f64> {
    if lambda == 0.0 {
        Ok(0.0)
    } else {
        Ok(lambda * laplacian_quadratic(l, a)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn zeros() -> Hyperparams {
        Hyperparams {
            prediction_weight: 1.0,
            lambda_x: 0.0,
            lambda_w_l1: 0.0,
            lambda_w_l2: 0.0,
            lambda_a_l1: 0.0,
            lambda_a_l2: 0.0,
            lambda_d_l1: 0.0,
            lambda_d_l2: 0.0,
            lambda_s: 0.0,
            lambda_t: 0.0,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn all_zero_instance_is_zero() {
        let mut h = zeros();
        h.lambda_x = 1.0;
        h.lambda_w_l1 = 1.0;
        h.lambda_w_l2 = 1.0;
        h.lambda_a_l1 = 1.0;
        h.lambda_a_l2 = 1.0;
        h.lambda_d_l1 = 1.0;
        h.lambda_d_l2 = 1.0;
        h.lambda_s = 1.0;
        h.lambda_t = 1.0;
        let f = Factorization::new(Mat::zeros(2, 3), Mat::zeros(4, 2), vec![0.0; 2]).unwrap();
        let l = GraphLaplacian::from_edges(4, [(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        let v = objective_terms(&Mat::zeros(4, 3), &[0.0; 4], &f, &h, &l, &l).unwrap();
        assert_eq!(v.total(), 0.0);
    }

    #[test]
    fn single_entry_prediction_term() {
        let f = Factorization::new(Mat::zeros(1, 1), Mat::identity(1), vec![1.0]).unwrap();
        let l = GraphLaplacian::empty(1);
        let v = objective_terms(&Mat::zeros(1, 1), &[0.0], &f, &zeros(), &l, &l).unwrap();
        assert_eq!(v.total(), 0.5);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let f = Factorization::new(Mat::zeros(1, 1), Mat::identity(1), vec![1.0]).unwrap();
        let l = GraphLaplacian::empty(1);
        assert!(objective_terms(&Mat::zeros(2, 1), &[0.0], &f, &zeros(), &l, &l).is_err());
        assert!(matches!(
            objective_terms(&Mat::zeros(1, 1), &[f64::NAN], &f, &zeros(), &l, &l),
            Err(Error::NonFinite(_))
        ));
    }
}

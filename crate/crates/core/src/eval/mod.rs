//! Metrics, train/test protocol, cross-validation and continuity
//! diagnostics.

mod compare;
mod continuity;
mod cv;

pub use compare::{compare_methods, Comparison, Method, MethodResult};
pub use continuity::{continuity_diagnostics, quantile, ContinuityReport, DistanceBin, MonthlyQuantiles};
pub use cv::{
    cross_validate, random_grid, select_best, summarize_cv, CvResult, FoldPlan, SplitStrategy,
    GRID_CANDIDATES,
};

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ChemDataset;
use crate::error::{Error, Result};
use crate::graph::{spatial_laplacian, temporal_laplacian, GraphLaplacian};
use crate::model::{encode, predict, Factorization};
use crate::params::{GraphParams, Hyperparams};
use crate::solver::{fit, FitReport};

/// Root mean square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(libm::sqrt(sse / pred.len() as f64))
}

/// Spatial and temporal Laplacians over the samples of `ds`. The neighbor
/// count is capped at `N − 1` so small folds still get a graph.
pub fn build_graphs(ds: &ChemDataset, gp: &GraphParams) -> Result<(GraphLaplacian, GraphLaplacian)> {
    let k = gp.k_neighbors.min(ds.n_samples() - 1);
    let ls = spatial_laplacian(ds.latitude(), ds.longitude(), k, gp.bandwidth_m)?;
    let lt = temporal_laplacian(ds.dates(), gp.window_days, gp.period_days)?;
    Ok((ls, lt))
}

/// Predictions for samples outside the fit: encode against `D`, then apply
/// `W`.
pub fn predict_new(f: &Factorization, features: &crate::linalg::Mat, h: &Hyperparams) -> Result<Vec<f64>> {
    let enc = encode(features, &f.d, h)?;
    if !enc.unconverged.is_empty() {
        log::warn!(
            "{} samples hit the encoding sweep cap (max KKT residual {:e})",
            enc.unconverged.len(),
            enc.max_kkt_residual
        );
    }
    predict(f, &enc.coefficients)
}

/// Fits on `train` (graphs from `train` only) and scores on `test`. The
/// report carries both RMSEs.
pub fn fit_and_score(
    train: &ChemDataset,
    test: &ChemDataset,
    h: &Hyperparams,
    gp: &GraphParams,
) -> Result<(Factorization, FitReport)> {
    let (ls, lt) = build_graphs(train, gp)?;
    let (f, mut report) = fit(train, h, &ls, &lt)?;
    report.train_rmse = Some(rmse(&f.fitted(), train.target())?);
    let pred = predict_new(&f, test.features(), h)?;
    report.test_rmse = Some(rmse(&pred, test.target())?);
    Ok((f, report))
}

/// Seeded split; returns sorted `(train, test)` indices with
/// `ceil(test_fraction · N)` test samples (at least one of each).
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(
            "test_fraction must be in (0, 1)".into(),
        ));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let n_test = (libm::ceil(test_fraction * n as f64) as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[2.5, 0.5, -1.5], &[0.0, -2.0, -4.0]).unwrap() - 2.5).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn split_partitions_samples() {
        let (train, test) = train_test_split(10, 0.2, 4).unwrap();
        assert_eq!(test.len(), 2);
        let mut all = [train, test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}

//! K-fold cross-validated hyperparameter search.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit_and_score;
use crate::data::ChemDataset;
use crate::error::{Error, Result};
use crate::params::{GraphParams, Hyperparams};

/// Candidate values for every λ in [`random_grid`].
pub const GRID_CANDIDATES: [f64; 5] = [0.0, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitStrategy {
    /// Seeded shuffle, then round-robin fold assignment.
    #[default]
    Random,
    /// Samples grouped by cell of a `cells × cells` lat/lon grid; whole
    /// cells are assigned to folds.
    SpatialBlocks { cells: usize },
}

/// Fold membership of every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignment: Vec<usize>,
    pub folds: usize,
}

impl FoldPlan {
    pub fn new(ds: &ChemDataset, folds: usize, seed: u64, strategy: SplitStrategy) -> Result<Self> {
        let n = ds.n_samples();
        if folds < 2 || folds > n {
            return Err(Error::InvalidParameter(format!(
                "folds must be in 2..={n}, got {folds}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assignment = match strategy {
            SplitStrategy::Random => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut a = vec![0; n];
                for (pos, &i) in perm.iter().enumerate() {
                    a[i] = pos % folds;
                }
                a
            }
            SplitStrategy::SpatialBlocks { cells } => {
                if cells == 0 {
                    return Err(Error::InvalidParameter("cells must be >= 1".into()));
                }
                let cell = grid_cells(ds.latitude(), ds.longitude(), cells);
                let mut occupied: Vec<usize> = cell.clone();
                occupied.sort_unstable();
                occupied.dedup();
                if occupied.len() < folds {
                    return Err(Error::InvalidParameter(format!(
                        "only {} occupied cells for {folds} folds",
                        occupied.len()
                    )));
                }
                occupied.shuffle(&mut rng);
                cell.iter()
                    .map(|c| occupied.iter().position(|o| o == c).expect("occupied") % folds)
                    .collect()
            }
        };
        Ok(Self { assignment, folds })
    }

    pub fn test(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    /// Held-out RMSE of one config on one fold.
    pub fn score(&self, ds: &ChemDataset, fold: usize, h: &Hyperparams, gp: &GraphParams) -> Result<f64> {
        let train = ds.subset(&self.train(fold))?;
        let test = ds.subset(&self.test(fold))?;
        let (_, report) = fit_and_score(&train, &test, h, gp)?;
        Ok(report.test_rmse.expect("fit_and_score sets test_rmse"))
    }
}

fn grid_cells(lat: &[f64], lon: &[f64], cells: usize) -> Vec<usize> {
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi - lo)
    };
    let (lat0, dlat) = span(lat);
    let (lon0, dlon) = span(lon);
    let bucket = |v: f64, lo: f64, d: f64| {
        if d > 0.0 {
            (((v - lo) / d * cells as f64) as usize).min(cells - 1)
        } else {
            0
        }
    };
    lat.iter()
        .zip(lon)
        .map(|(&a, &o)| bucket(a, lat0, dlat) * cells + bucket(o, lon0, dlon))
        .collect()
}

/// Outcome of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_index: usize,
    pub best: Hyperparams,
    /// Mean held-out RMSE per config, `+∞` for configs with a failed fold.
    pub mean_rmse: Vec<f64>,
    /// `fold_rmse[config][fold]`.
    pub fold_rmse: Vec<Vec<f64>>,
    /// `(config index, fold, error)` for every failed fit.
    pub failures: Vec<(usize, usize, String)>,
}

/// Index of the winning config: lowest mean RMSE, then smallest total ℓ1
/// weight, then earliest in the grid.
pub fn select_best(grid: &[Hyperparams], mean_rmse: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        let (a, b) = (mean_rmse[i], mean_rmse[best]);
        if a < b || (a == b && grid[i].l1_total() < grid[best].l1_total()) {
            best = i;
        }
    }
    best
}

/// Folds per-fold scores (indexed `[config][fold]`) into a [`CvResult`].
pub fn summarize_cv(grid: &[Hyperparams], scores: Vec<Vec<Result<f64>>>) -> Result<CvResult> {
    if grid.is_empty() || scores.len() != grid.len() {
        return Err(Error::InvalidParameter("grid must be non-empty".into()));
    }
    let mut failures = Vec::new();
    let mut fold_rmse = Vec::with_capacity(grid.len());
    let mut mean_rmse = Vec::with_capacity(grid.len());
    for (c, row) in scores.into_iter().enumerate() {
        let mut vals = Vec::with_capacity(row.len());
        for (f, r) in row.into_iter().enumerate() {
            match r {
                Ok(v) if v.is_finite() => vals.push(v),
                Ok(v) => {
                    failures.push((c, f, format!("non-finite RMSE {v}")));
                    vals.push(f64::INFINITY);
                }
                Err(e) => {
                    log::warn!("config {c} fold {f} failed: {e}");
                    failures.push((c, f, e.to_string()));
                    vals.push(f64::INFINITY);
                }
            }
        }
        mean_rmse.push(vals.iter().sum::<f64>() / vals.len().max(1) as f64);
        fold_rmse.push(vals);
    }
    let best_index = select_best(grid, &mean_rmse);
    Ok(CvResult {
        best_index,
        best: grid[best_index].clone(),
        mean_rmse,
        fold_rmse,
        failures,
    })
}

/// Sequential k-fold search over `grid`.
pub fn cross_validate(
    ds: &ChemDataset,
    grid: &[Hyperparams],
    plan: &FoldPlan,
    gp: &GraphParams,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must be non-empty".into()));
    }
    let scores = grid
        .iter()
        .map(|h| (0..plan.folds).map(|f| plan.score(ds, f, h, gp)).collect())
        .collect();
    summarize_cv(grid, scores)
}

/// `n` configs drawing each of the nine λ weights independently from
/// [`GRID_CANDIDATES`]; other fields come from `base`.
pub fn random_grid(base: &Hyperparams, n: usize, seed: u64) -> Vec<Hyperparams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || GRID_CANDIDATES[rng.random_range(0..GRID_CANDIDATES.len())];
    (0..n)
        .map(|_| Hyperparams {
            lambda_x: pick(),
            lambda_w_l1: pick(),
            lambda_w_l2: pick(),
            lambda_a_l1: pick(),
            lambda_a_l2: pick(),
            lambda_d_l1: pick(),
            lambda_d_l2: pick(),
            lambda_s: pick(),
            lambda_t: pick(),
            ..base.clone()
        })
        .collect()
}

//! Cross-validation spread over a rayon pool.

use rayon::prelude::*;
use tsdst_core::eval::{summarize_cv, CvResult, FoldPlan};
use tsdst_core::{ChemDataset, GraphParams, Hyperparams};

use crate::error::{CliError, CliResult};

/// Thread pool with `threads` workers, or rayon's default when unset.
pub fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(CliError::input)
}

/// Scores every `(config, fold)` pair in parallel. Results are gathered by
/// index, so the outcome does not depend on scheduling or thread count.
pub fn cross_validate(
    ds: &ChemDataset,
    grid: &[Hyperparams],
    plan: &FoldPlan,
    gp: &GraphParams,
    pool: &rayon::ThreadPool,
) -> CliResult<CvResult> {
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..plan.folds).map(move |f| (c, f)))
        .collect();
    let mut flat: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, f)| plan.score(ds, f, &grid[c], gp))
            .collect()
    });
    let mut scores = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let rest = flat.split_off(plan.folds);
        scores.push(std::mem::replace(&mut flat, rest));
    }
    summarize_cv(grid, scores).map_err(CliError::input)
}

//! Temporal and spatial continuity of the target: monthly quantiles and
//! mean absolute target difference against pair distance.

use alloc::vec;
use alloc::vec::Vec;

use chrono::Datelike;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::ChemDataset;
use crate::error::{Error, Result};
use crate::graph::haversine_m;

/// Interpolated quantile of sorted data (the "linear" rule: position
/// `q·(n−1)`).
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyQuantiles {
    /// 1 = January.
    pub month: u32,
    pub count: usize,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBin {
    pub lower_m: f64,
    pub upper_m: f64,
    pub pairs: usize,
    /// Mean `|y_i − y_j|` over the pairs in this bin.
    pub mean_abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub monthly: Vec<MonthlyQuantiles>,
    pub distance_bins: Vec<DistanceBin>,
    /// Pairs used for the distance bins; all pairs if there are at most
    /// `max_pairs`, otherwise that many drawn with replacement.
    pub pairs_sampled: usize,
}

impl ContinuityReport {
    /// Month with the highest median target, if any month has samples.
    pub fn peak_month(&self) -> Option<u32> {
        self.monthly
            .iter()
            .filter_map(|m| m.median.map(|v| (m.month, v)))
            .fold(None, |best: Option<(u32, f64)>, (m, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((m, v)),
            })
            .map(|(m, _)| m)
    }
}

/// Monthly target quantiles plus equal-width haversine distance bins of the
/// mean absolute target difference.
pub fn continuity_diagnostics(
    ds: &ChemDataset,
    n_bins: usize,
    max_pairs: usize,
    seed: u64,
) -> Result<ContinuityReport> {
    if n_bins == 0 || max_pairs == 0 {
        return Err(Error::InvalidParameter(
            "n_bins and max_pairs must be positive".into(),
        ));
    }
    let y = ds.target();
    let mut by_month: Vec<Vec<f64>> = vec![Vec::new(); 12];
    for (d, &v) in ds.dates().iter().zip(y) {
        by_month[d.month0() as usize].push(v);
    }
    let monthly = by_month
        .into_iter()
        .enumerate()
        .map(|(m, mut vals)| {
            vals.sort_unstable_by(f64::total_cmp);
            MonthlyQuantiles {
                month: m as u32 + 1,
                count: vals.len(),
                q25: quantile(&vals, 0.25),
                median: quantile(&vals, 0.5),
                q75: quantile(&vals, 0.75),
            }
        })
        .collect();

    let n = ds.n_samples();
    let (lat, lon) = (ds.latitude(), ds.longitude());
    let total = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= max_pairs {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..max_pairs)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect()
    };
    let samples: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(i, j)| (haversine_m(lat[i], lon[i], lat[j], lon[j]), libm::fabs(y[i] - y[j])))
        .collect();
    let max_d = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let width = if max_d > 0.0 { max_d / n_bins as f64 } else { 1.0 };
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for &(d, diff) in &samples {
        let b = ((d / width) as usize).min(n_bins - 1);
        sums[b] += diff;
        counts[b] += 1;
    }
    let distance_bins = (0..n_bins)
        .map(|b| DistanceBin {
            lower_m: b as f64 * width,
            upper_m: (b + 1) as f64 * width,
            pairs: counts[b],
            mean_abs_diff: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
        })
        .collect();

    Ok(ContinuityReport {
        monthly,
        distance_bins,
        pairs_sampled: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn pair_counts_sum_to_sample_size() {
        let ds = generate(&SynthSpec {
            n_samples: 60,
            ..SynthSpec::default()
        })
        .unwrap()
        .dataset;
        let all = continuity_diagnostics(&ds, 7, 1_000_000, 0).unwrap();
        assert_eq!(all.pairs_sampled, 60 * 59 / 2);
        let sub = continuity_diagnostics(&ds, 7, 500, 0).unwrap();
        assert_eq!(sub.pairs_sampled, 500);
        for r in [all, sub] {
            assert_eq!(r.distance_bins.iter().map(|b| b.pairs).sum::<usize>(), r.pairs_sampled);
            assert_eq!(r.monthly.iter().map(|m| m.count).sum::<usize>(), 60);
        }
    }
}

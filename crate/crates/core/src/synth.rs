//! Synthetic mixtures with known sources, plus source matching.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ChemDataset, DatasetParts};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Mat};

/// South-west corner and extent of the lat/lon box the unit square maps to.
pub const LAT_ORIGIN: f64 = 41.5;
pub const LON_ORIGIN: f64 = -76.5;
pub const LAT_SPAN: f64 = 0.5;
pub const LON_SPAN: f64 = 0.6;
/// Calendar year of generated sample dates (not a leap year).
pub const YEAR: i32 = 2011;
/// Day of year at which the seasonal modulation `sin(2π·doy/365)` peaks.
pub const SEASONAL_PEAK_DOY: f64 = 365.0 / 4.0;
const BUMPS_PER_SOURCE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthSpec {
    pub n_samples: usize,
    pub n_analytes: usize,
    pub k_sources: usize,
    /// Standard deviation of the Gaussian noise on both `X` and `y`.
    pub noise_std: f64,
    /// Length scale of the coefficient fields over the unit square.
    pub length_scale: f64,
    /// Relative amplitude of the yearly modulation of source 0, in `[0, 1)`.
    pub seasonal_amplitude: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_samples: 500,
            n_analytes: 20,
            k_sources: 3,
            noise_std: 0.01,
            length_scale: 0.2,
            seasonal_amplitude: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter("n_samples must be >= 2".into()));
        }
        if self.k_sources == 0 || self.k_sources > self.n_samples.min(self.n_analytes) {
            return Err(Error::InvalidParameter(format!(
                "k_sources must be in 1..={}",
                self.n_samples.min(self.n_analytes)
            )));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
        }
        if !(self.length_scale > 0.0) {
            return Err(Error::InvalidParameter("length_scale must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.seasonal_amplitude) {
            return Err(Error::InvalidParameter(
                "seasonal_amplitude must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: ChemDataset,
    pub a_true: Mat,
    pub d_true: Mat,
    pub w_true: Vec<f64>,
    /// Sample positions on the unit square before mapping to lat/lon.
    pub unit_coords: Vec<[f64; 2]>,
    pub day_of_year: Vec<u32>,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Draws a mixture dataset:
///
/// * positions uniform on the unit square, dates uniform over one year;
/// * `D*` rows dominated by disjoint analyte blocks (`[0.5, 1]` in-block,
///   `[0, 0.1]` elsewhere);
/// * `A*_k = softplus(f_k)` for a sum of Gaussian bumps `f_k`, with source 0
///   modulated by `1 + amplitude·sin(2π·doy/365)`;
/// * `W*` positive on source 0 and alternating in sign after that;
/// * `X = max(A*D* + ε, 0)`, `y = A*W* + ε`.
pub fn generate(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (n, m, k) = (spec.n_samples, spec.n_analytes, spec.k_sources);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let unit_coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let day_of_year: Vec<u32> = (0..n).map(|_| rng.random_range(1..=365)).collect();

    let mut d_true = Mat::zeros(k, m);
    for s in 0..k {
        for j in 0..m {
            let block = j * k / m;
            d_true[(s, j)] = if block == s {
                rng.random_range(0.5..1.0)
            } else {
                rng.random_range(0.0..0.1)
            };
        }
    }

    let two_l2 = 2.0 * spec.length_scale * spec.length_scale;
    let mut a_true = Mat::zeros(n, k);
    for s in 0..k {
        let bumps: Vec<([f64; 2], f64)> = (0..BUMPS_PER_SOURCE)
            .map(|_| {
                (
                    [rng.random::<f64>(), rng.random::<f64>()],
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        for (i, p) in unit_coords.iter().enumerate() {
            let field: f64 = bumps
                .iter()
                .map(|(mu, c)| {
                    let (dx, dy) = (p[0] - mu[0], p[1] - mu[1]);
                    let r2 = dx * dx + dy * dy;
                    c * libm::exp(-r2 / two_l2)
                })
                .sum();
            let mut v = softplus(field);
            if s == 0 {
                let phase = 2.0 * PI * day_of_year[i] as f64 / 365.0;
                v *= 1.0 + spec.seasonal_amplitude * libm::sin(phase);
            }
            a_true[(i, s)] = v;
        }
    }

    let w_true: Vec<f64> = (0..k)
        .map(|s| {
            if s == 0 {
                rng.random_range(1.5..2.5)
            } else {
                let sign = if s % 2 == 1 { -1.0 } else { 1.0 };
                sign * rng.random_range(0.5..1.5)
            }
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_std).expect("noise_std validated");
    let draw = |rng: &mut ChaCha8Rng| {
        if spec.noise_std > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        }
    };
    let clean_x = a_true.matmul(&d_true);
    let features = Mat::from_fn(n, m, |i, j| (clean_x[(i, j)] + draw(&mut rng)).max(0.0));
    let target: Vec<f64> = a_true
        .matvec(&w_true)
        .into_iter()
        .map(|v| v + draw(&mut rng))
        .collect();

    let width = digits(n);
    let dataset = ChemDataset::new(DatasetParts {
        features,
        target,
        latitude: unit_coords.iter().map(|p| LAT_ORIGIN + LAT_SPAN * p[1]).collect(),
        longitude: unit_coords.iter().map(|p| LON_ORIGIN + LON_SPAN * p[0]).collect(),
        dates: day_of_year
            .iter()
            .map(|&d| NaiveDate::from_yo_opt(YEAR, d).expect("day in 1..=365"))
            .collect(),
        analyte_names: (0..m).map(|j| format!("analyte_{:0w$}", j + 1, w = digits(m))).collect(),
        target_name: String::from("target"),
        sample_ids: (0..n).map(|i| format!("S{:0width$}", i + 1)).collect(),
        scaling: None,
    })?;

    Ok(SyntheticData {
        dataset,
        a_true,
        d_true,
        w_true,
        unit_coords,
        day_of_year,
    })
}

fn digits(n: usize) -> usize {
    let mut d = 1;
    let mut v = n;
    while v >= 10 {
        v /= 10;
        d += 1;
    }
    d
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// One-to-one pairing of learned and true sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMatch {
    /// `assignment[i]` is the true source matched to learned row `i`.
    pub assignment: Vec<usize>,
    /// Cosine similarity of each learned row to its match.
    pub similarities: Vec<f64>,
}

impl SourceMatch {
    pub fn mean_similarity(&self) -> f64 {
        if self.similarities.is_empty() {
            return 0.0;
        }
        self.similarities.iter().sum::<f64>() / self.similarities.len() as f64
    }

    pub fn total_similarity(&self) -> f64 {
        self.similarities.iter().sum()
    }
}

/// Largest `K` solved by enumerating all permutations.
pub const EXHAUSTIVE_MAX_K: usize = 6;

/// Pairs rows of `learned` with rows of `truth` to maximize the summed cosine
/// similarity (exhaustive for `K ≤ 6`, Hungarian algorithm otherwise).
pub fn match_sources(learned: &Mat, truth: &Mat) -> Result<SourceMatch> {
    if learned.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "learned {:?} vs true {:?}",
            learned.shape(),
            truth.shape()
        )));
    }
    let k = learned.rows();
    let sim = Mat::from_fn(k, k, |i, j| cosine_similarity(learned.row(i), truth.row(j)));
    let assignment = if k <= EXHAUSTIVE_MAX_K {
        best_permutation(&sim)
    } else {
        hungarian_max(&sim)
    };
    let similarities = assignment.iter().enumerate().map(|(i, &j)| sim[(i, j)]).collect();
    Ok(SourceMatch {
        assignment,
        similarities,
    })
}

/// Permutation maximizing `Σ_i score[i, perm[i]]`; the lexicographically
/// first one wins ties.
fn best_permutation(score: &Mat) -> Vec<usize> {
    let k = score.rows();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_total = f64::NEG_INFINITY;
    loop {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
        if total > best_total {
            best_total = total;
            best.clone_from(&perm);
        }
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Hungarian algorithm (shortest augmenting paths with potentials) on the
/// cost `−score`, `O(K³)`.
pub fn hungarian_max(score: &Mat) -> Vec<usize> {
    let n = score.rows();
    assert_eq!(n, score.cols(), "hungarian: score matrix must be square");
    let cost = |i: usize, j: usize| -score[(i - 1, j - 1)];
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permuted_and_scaled_rows_match_perfectly() {
        let truth = Mat::from_rows(&[[1.0, 0.0, 0.2], [0.1, 1.0, 0.0], [0.0, 0.3, 1.0]]).unwrap();
        let learned = Mat::from_rows(&[
            truth.row(2).iter().map(|v| 3.0 * v).collect::<Vec<_>>(),
            truth.row(0).iter().map(|v| 0.5 * v).collect(),
            truth.row(1).to_vec(),
        ])
        .unwrap();
        let m = match_sources(&learned, &truth).unwrap();
        assert_eq!(m.assignment, vec![2, 0, 1]);
        for s in m.similarities {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let same = match_sources(&truth, &truth).unwrap();
        assert_eq!(same.assignment, vec![0, 1, 2]);
    }

    #[test]
    fn zero_rows_score_zero() {
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn noiseless_features_are_exact_products() {
        let spec = SynthSpec {
            n_samples: 40,
            n_analytes: 6,
            noise_std: 0.0,
            ..SynthSpec::default()
        };
        let s = generate(&spec).unwrap();
        assert_eq!(*s.dataset.features(), s.a_true.matmul(&s.d_true));
        assert!(s.a_true.min_value() > 0.0);
        assert!(s.d_true.is_nonnegative());
        assert!(s.w_true[0] > 0.0 && s.w_true[1] < 0.0 && s.w_true[2] > 0.0);
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SynthSpec {
            n_samples: 30,
            ..SynthSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.a_true, b.a_true);
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = SynthSpec {
            k_sources: 30,
            n_analytes: 20,
            ..SynthSpec::default()
        };
        assert!(generate(&bad).is_err());
        let bad = SynthSpec {
            seasonal_amplitude: 1.0,
            ..SynthSpec::default()
        };
        assert!(generate(&bad).is_err());
    }
}

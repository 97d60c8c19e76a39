//! Sparse spatial and temporal graph Laplacians over samples.
//!
//! Both graphs are stored as a symmetric CSR adjacency plus a degree vector,
//! so `L = Deg - Adj` is never materialized.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::linalg::{LinearOperator, Mat};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Weighted undirected graph Laplacian `L = Deg - Adj`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
    degree: Vec<f64>,
}

impl GraphLaplacian {
    /// Graph with no edges, so `L = 0`.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            weights: Vec::new(),
            degree: vec![0.0; n],
        }
    }

    /// Builds a Laplacian from undirected edges. Self-loops and nonpositive
    /// weights are dropped; repeated edges keep the largest weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Shape(alloc::format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite("edge weight"));
            }
            if i == j || w <= 0.0 {
                continue;
            }
            let key = (i.min(j), i.max(j));
            let e = merged.entry(key).or_insert(0.0);
            *e = e.max(w);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in &merged {
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        Ok(Self::from_rows(rows))
    }

    fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        let mut degree = Vec::with_capacity(n);
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            degree.push(row.iter().map(|&(_, w)| w).sum());
            for &(j, w) in row.iter() {
                col_idx.push(j);
                weights.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            weights,
            degree,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.col_idx.is_empty()
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Neighbors of `i` with their adjacency weights, by ascending index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// Adjacency weight between `i` and `j` (0 when unconnected).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.weights[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// `out = L x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let mut s = self.degree[i] * x[i];
            for (j, w) in self.neighbors(i) {
                s -= w * x[j];
            }
            out[i] = s;
        }
    }

    /// `L A` for an `N x K` matrix.
    pub fn apply_mat(&self, a: &Mat) -> Mat {
        assert_eq!(a.rows(), self.n);
        let k = a.cols();
        let mut out = Mat::zeros(self.n, k);
        for i in 0..self.n {
            let row = out.row_mut(i);
            for (c, &v) in row.iter_mut().zip(a.row(i)) {
                *c = self.degree[i] * v;
            }
            for (j, w) in self.neighbors(i) {
                for (c, &v) in row.iter_mut().zip(a.row(j)) {
                    *c -= w * v;
                }
            }
        }
        out
    }

    /// Dense `N x N` Laplacian. Intended for tests and small graphs.
    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.degree[i];
            for (j, w) in self.neighbors(i) {
                m[(i, j)] -= w;
            }
        }
        m
    }

    /// Component label per node (labels are the smallest node index of the
    /// component) and the number of components.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            count += 1;
            label[s] = s;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for (j, _) in self.neighbors(i) {
                    if label[j] == usize::MAX {
                        label[j] = s;
                        stack.push(j);
                    }
                }
            }
        }
        (label, count)
    }

    /// Adjacency as `i j weight` lines, 0-indexed, both directions, row-major.
    pub fn to_coo_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for (j, w) in self.neighbors(i) {
                let _ = writeln!(s, "{i} {j} {w}");
            }
        }
        s
    }

    /// Parses the output of [`GraphLaplacian::to_coo_text`].
    pub fn from_coo_text(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::InvalidParameter(alloc::format!("malformed edge on line {}", line_no + 1));
            let mut it = line.split_whitespace();
            let i: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let j: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let w: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            edges.push((i, j, w));
        }
        Self::from_edges(n, edges)
    }
}

/// `Tr(A^T L A)` evaluated as the edge sum `Σ_{i<j} w_ij ‖A_i − A_j‖²`,
/// which stays nonnegative under rounding.
pub fn laplacian_quadratic(l: &GraphLaplacian, a: &Mat) -> Result<f64> {
    if a.rows() != l.n() {
        return Err(Error::Shape(alloc::format!(
            "coefficient matrix has {} rows, graph has {} nodes",
            a.rows(),
            l.n()
        )));
    }
    Ok(l
        .edges()
        .map(|(i, j, w)| {
            let d: f64 = a
                .row(i)
                .iter()
                .zip(a.row(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            w * d
        })
        .sum())
}

/// Great-circle distance in meters between two points in decimal degrees.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let s1 = libm::sin(dp / 2.0);
    let s2 = libm::sin(dl / 2.0);
    let h = s1 * s1 + libm::cos(p1) * libm::cos(p2) * s2 * s2;
    2.0 * EARTH_RADIUS_M * libm::asin(libm::sqrt(h.clamp(0.0, 1.0)))
}

/// Symmetrized k-nearest-neighbor graph under haversine distance with
/// Gaussian weights `exp(−d²/σ²)`.
///
/// `σ` defaults to the median of all kNN distances. Ties in distance go to
/// the lower sample index. If every neighbor distance is zero the weights
/// fall back to 1.
pub fn spatial_laplacian(
    lat: &[f64],
    lon: &[f64],
    k_neighbors: usize,
    bandwidth_m: Option<f64>,
) -> Result<GraphLaplacian> {
    let n = lat.len();
    if lon.len() != n {
        return Err(Error::Shape(alloc::format!(
            "{n} latitudes but {} longitudes",
            lon.len()
        )));
    }
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::InvalidParameter(alloc::format!(
            "k_neighbors must be in 1..{n}, got {k_neighbors}"
        )));
    }
    if !lat.iter().chain(lon).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("coordinates"));
    }
    if let Some(b) = bandwidth_m {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "bandwidth must be > 0, got {b}"
            )));
        }
    }

    let mut knn: Vec<(usize, usize, f64)> = Vec::with_capacity(n * k_neighbors);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    let by_distance_then_index =
        |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    for i in 0..n {
        cand.clear();
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (haversine_m(lat[i], lon[i], lat[j], lon[j]), j)),
        );
        cand.select_nth_unstable_by(k_neighbors - 1, by_distance_then_index);
        cand[..k_neighbors].sort_unstable_by(by_distance_then_index);
        knn.extend(cand[..k_neighbors].iter().map(|&(d, j)| (i, j, d)));
    }

    let sigma = match bandwidth_m {
        Some(b) => b,
        None => {
            let mut d: Vec<f64> = knn.iter().map(|e| e.2).collect();
            crate::data::median_in_place(&mut d)
        }
    };
    let weight = |d: f64| {
        if sigma > 0.0 {
            libm::exp(-(d * d) / (sigma * sigma))
        } else {
            1.0
        }
    };
    GraphLaplacian::from_edges(n, knn.into_iter().map(|(i, j, d)| (i, j, weight(d))))
}

/// Day of year in `1..=365`; the leap day ordinal 366 folds onto 365.
pub fn day_of_year(date: NaiveDate) -> u32 {
    date.ordinal().min(365)
}

/// Distance in days on a circular calendar of `period` days.
pub fn circular_day_distance(a: u32, b: u32, period: u32) -> u32 {
    let d = a.abs_diff(b) % period;
    d.min(period - d)
}

/// Calendar-window graph: samples whose day-of-year lies less than
/// `window_days` apart on the circular year are linked with weight
/// `1 − δ/window_days`. The year itself is ignored.
pub fn temporal_laplacian(
    dates: &[NaiveDate],
    window_days: u32,
    period_days: u32,
) -> Result<GraphLaplacian> {
    if window_days == 0 || 2 * window_days >= period_days {
        return Err(Error::InvalidParameter(alloc::format!(
            "window_days must be in 1..{}, got {window_days}",
            period_days.div_ceil(2)
        )));
    }
    let n = dates.len();
    let p = period_days as usize;
    let doy: Vec<u32> = dates.iter().map(|&d| (day_of_year(d) - 1) % period_days).collect();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (i, &d) in doy.iter().enumerate() {
        buckets[d as usize].push(i);
    }

    let w = window_days as i64;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in rows.iter_mut().enumerate() {
        for off in -(w - 1)..w {
            let day = (doy[i] as i64 + off).rem_euclid(p as i64) as usize;
            let weight = 1.0 - off.unsigned_abs() as f64 / window_days as f64;
            row.extend(buckets[day].iter().filter(|&&j| j != i).map(|&j| (j, weight)));
        }
    }
    let l = GraphLaplacian::from_rows(rows);
    if l.is_empty() && n > 1 {
        log::warn!("temporal graph has no edges within a {window_days}-day window");
    }
    Ok(l)
}

/// `c_s L_s + c_t L_t + shift I` as a matrix-free SPD operator.
pub struct ShiftedLaplacians<'a> {
    pub terms: [(f64, &'a GraphLaplacian); 2],
    pub shift: f64,
}

impl LinearOperator for ShiftedLaplacians<'_> {
    fn dim(&self) -> usize {
        self.terms[0].1.n()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.shift * v;
        }
        let mut tmp = vec![0.0; x.len()];
        for &(c, l) in &self.terms {
            if c == 0.0 {
                continue;
            }
            l.apply(x, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += c * t;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![self.shift; self.dim()];
        for &(c, l) in &self.terms {
            for (di, deg) in d.iter_mut().zip(l.degree()) {
                *di += c * deg;
            }
        }
        d
    }
}

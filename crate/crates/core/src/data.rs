//! Sample tables, preprocessing, and the [`ChemDataset`] container.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const SAMPLE_ID: &str = "sample_id";
pub const LATITUDE: &str = "latitude";
pub const LONGITUDE: &str = "longitude";
pub const DATE: &str = "date";

/// Tokens treated as a missing numeric value.
const MISSING_TOKENS: [&str; 4] = ["", "NA", "NaN", "nan"];

/// Parsed but otherwise untouched input records.
///
/// `columns` holds every numeric column (analytes and the eventual target) in
/// input order; `values[row][col]` is `None` where the cell was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub sample_ids: Vec<String>,
    pub latitude: Vec<Option<f64>>,
    pub longitude: Vec<Option<f64>>,
    pub dates: Vec<Option<String>>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl RawTable {
    /// Builds a table from a header and string records. The four location
    /// columns are located by name; everything else is numeric.
    pub fn from_records<S: AsRef<str>>(header: &[S], records: &[Vec<S>]) -> Result<Self> {
        let header: Vec<&str> = header.iter().map(|h| h.as_ref().trim()).collect();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let id_col = find(SAMPLE_ID)?;
        let lat_col = find(LATITUDE)?;
        let lon_col = find(LONGITUDE)?;
        let date_col = find(DATE)?;
        let numeric: Vec<usize> = (0..header.len())
            .filter(|c| ![id_col, lat_col, lon_col, date_col].contains(c))
            .collect();

        let mut table = RawTable {
            sample_ids: Vec::with_capacity(records.len()),
            latitude: Vec::with_capacity(records.len()),
            longitude: Vec::with_capacity(records.len()),
            dates: Vec::with_capacity(records.len()),
            columns: numeric.iter().map(|&c| header[c].to_string()).collect(),
            values: Vec::with_capacity(records.len()),
        };
        for (row, rec) in records.iter().enumerate() {
            if rec.len() != header.len() {
                return Err(Error::Shape(alloc::format!(
                    "row {row} has {} fields, header has {}",
                    rec.len(),
                    header.len()
                )));
            }
            let cell = |c: usize| rec[c].as_ref().trim();
            table.sample_ids.push(cell(id_col).to_string());
            table.latitude.push(parse_number(cell(lat_col), row, header[lat_col])?);
            table.longitude.push(parse_number(cell(lon_col), row, header[lon_col])?);
            let date = cell(date_col);
            table
                .dates
                .push((!MISSING_TOKENS.contains(&date)).then(|| date.to_string()));
            let vals = numeric
                .iter()
                .map(|&c| parse_number(cell(c), row, header[c]))
                .collect::<Result<Vec<_>>>()?;
            table.values.push(vals);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }
}

fn parse_number(s: &str, row: usize, column: &str) -> Result<Option<f64>> {
    if MISSING_TOKENS.contains(&s) {
        return Ok(None);
    }
    f64::from_str(s).map(Some).map_err(|_| Error::BadNumber {
        row,
        column: column.to_string(),
        value: s.to_string(),
    })
}

pub fn parse_date(s: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::BadDate {
        row,
        value: s.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scaling {
    /// Per-analyte affine map onto `[0, 1]`.
    #[default]
    MinMax,
    /// `ln(1 + v)` followed by per-analyte min-max.
    Log1pMinMax,
    /// Raw values; they must already be nonnegative.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MissingPolicy {
    #[default]
    DropRow,
    /// Replace a missing analyte value by that analyte's median.
    MedianImpute,
}

/// How raw analyte columns become the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PreprocessSpec {
    pub scaling: Scaling,
    pub missing: MissingPolicy,
}

/// Recorded per-analyte transform: `s = (t(v) - offset) / range` where `t`
/// is the identity or `ln(1 + v)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalyteScale {
    pub name: String,
    pub offset: f64,
    pub range: f64,
    /// Median of the raw values, used for imputation of new samples.
    pub median: f64,
}

/// Scale parameters fitted during [`preprocess`]; replayed on new data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FittedScaling {
    pub spec: PreprocessSpec,
    pub analytes: Vec<AnalyteScale>,
}

/// Features of samples that were not part of a fit, keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub sample_ids: Vec<String>,
    pub features: Mat,
}

impl FittedScaling {
    /// No-op scaling, used for data that is generated already in model units.
    pub fn identity(names: &[String]) -> Self {
        Self {
            spec: PreprocessSpec {
                scaling: Scaling::None,
                missing: MissingPolicy::DropRow,
            },
            analytes: names
                .iter()
                .map(|n| AnalyteScale {
                    name: n.clone(),
                    offset: 0.0,
                    range: 1.0,
                    median: 0.0,
                })
                .collect(),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.analytes.iter().map(|a| a.name.as_str())
    }

    fn pre(&self, v: f64) -> f64 {
        match self.spec.scaling {
            Scaling::Log1pMinMax => libm::log1p(v),
            Scaling::MinMax | Scaling::None => v,
        }
    }

    pub fn transform(&self, analyte: usize, v: f64) -> f64 {
        let a = &self.analytes[analyte];
        (self.pre(v) - a.offset) / a.range
    }

    pub fn inverse(&self, analyte: usize, s: f64) -> f64 {
        let a = &self.analytes[analyte];
        let t = s * a.range + a.offset;
        match self.spec.scaling {
            Scaling::Log1pMinMax => libm::expm1(t),
            Scaling::MinMax | Scaling::None => t,
        }
    }

    /// Applies the recorded transform to a new table. Columns are matched by
    /// name, so their order in `raw` is irrelevant. `ignore` names columns
    /// (typically the target) that may be present without being analytes.
    pub fn transform_table(&self, raw: &RawTable, ignore: &[&str]) -> Result<FeatureBatch> {
        let mut missing = Vec::new();
        let mut index = Vec::with_capacity(self.analytes.len());
        for a in &self.analytes {
            match raw.columns.iter().position(|c| *c == a.name) {
                Some(i) => index.push(i),
                None => missing.push(a.name.clone()),
            }
        }
        let extra: Vec<String> = raw
            .columns
            .iter()
            .filter(|c| !ignore.contains(&c.as_str()) && !self.names().any(|n| n == c.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Schema { missing, extra });
        }

        let m = self.analytes.len();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        'rows: for (r, vals) in raw.values.iter().enumerate() {
            let start = data.len();
            for (j, &c) in index.iter().enumerate() {
                let v = match vals[c] {
                    Some(v) => v,
                    None if self.spec.missing == MissingPolicy::MedianImpute => {
                        self.analytes[j].median
                    }
                    None => {
                        data.truncate(start);
                        continue 'rows;
                    }
                };
                let s = self.transform(j, check_value(v, self.spec.scaling, &self.analytes[j].name)?);
                // values outside the training range are clamped onto the
                // nonnegative orthant the dictionary lives in
                data.push(s.max(0.0));
            }
            ids.push(raw.sample_ids[r].clone());
        }
        Ok(FeatureBatch {
            features: Mat::from_vec(ids.len(), m, data)?,
            sample_ids: ids,
        })
    }
}

fn check_value(v: f64, scaling: Scaling, column: &str) -> Result<f64> {
    let reason = if !v.is_finite() {
        "non-finite value"
    } else if scaling == Scaling::None && v < 0.0 {
        "negative value with scaling disabled"
    } else if scaling == Scaling::Log1pMinMax && v <= -1.0 {
        "value <= -1 cannot be log1p-transformed"
    } else {
        return Ok(v);
    };
    Err(Error::BadColumn {
        column: column.to_string(),
        reason: reason.to_string(),
    })
}

/// Sample-by-analyte data plus the per-sample target, location, and date.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemDataset {
    features: Mat,
    target: Vec<f64>,
    latitude: Vec<f64>,
    longitude: Vec<f64>,
    dates: Vec<NaiveDate>,
    analyte_names: Vec<String>,
    target_name: String,
    sample_ids: Vec<String>,
    scaling: FittedScaling,
}

/// Constructor input for [`ChemDataset::new`].
#[derive(Debug, Clone)]
pub struct DatasetParts {
    pub features: Mat,
    pub target: Vec<f64>,
    pub latitude: Vec<f64>,
    pub longitude: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    pub analyte_names: Vec<String>,
    pub target_name: String,
    pub sample_ids: Vec<String>,
    pub scaling: Option<FittedScaling>,
}

impl ChemDataset {
    pub fn new(parts: DatasetParts) -> Result<Self> {
        let n = parts.features.rows();
        let m = parts.features.cols();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if m < 1 {
            return Err(Error::Shape("dataset needs at least one analyte".into()));
        }
        for (name, len) in [
            ("target", parts.target.len()),
            ("latitude", parts.latitude.len()),
            ("longitude", parts.longitude.len()),
            ("dates", parts.dates.len()),
            ("sample_ids", parts.sample_ids.len()),
        ] {
            if len != n {
                return Err(Error::Shape(alloc::format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
        }
        if parts.analyte_names.len() != m {
            return Err(Error::Shape(alloc::format!(
                "{} analyte names for {m} feature columns",
                parts.analyte_names.len()
            )));
        }
        if parts.analyte_names.contains(&parts.target_name) {
            return Err(Error::InvalidParameter(alloc::format!(
                "target `{}` also appears as a feature",
                parts.target_name
            )));
        }
        if !parts.features.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        if !parts.features.is_nonnegative() {
            return Err(Error::InvalidParameter(
                "features must be nonnegative".into(),
            ));
        }
        if !parts.target.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("target"));
        }
        if !parts
            .latitude
            .iter()
            .chain(&parts.longitude)
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("coordinates"));
        }
        let scaling = match parts.scaling {
            Some(s) => {
                if s.analytes.len() != m {
                    return Err(Error::Shape("scaling does not match analyte count".into()));
                }
                s
            }
            None => FittedScaling::identity(&parts.analyte_names),
        };
        Ok(Self {
            features: parts.features,
            target: parts.target,
            latitude: parts.latitude,
            longitude: parts.longitude,
            dates: parts.dates,
            analyte_names: parts.analyte_names,
            target_name: parts.target_name,
            sample_ids: parts.sample_ids,
            scaling,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_analytes(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn latitude(&self) -> &[f64] {
        &self.latitude
    }

    pub fn longitude(&self) -> &[f64] {
        &self.longitude
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn analyte_names(&self) -> &[String] {
        &self.analyte_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn scaling(&self) -> &FittedScaling {
        &self.scaling
    }

    /// Restricts the dataset to the given sample indices (in that order).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self::new(DatasetParts {
            features: self.features.select_rows(idx),
            target: pick(&self.target),
            latitude: pick(&self.latitude),
            longitude: pick(&self.longitude),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            analyte_names: self.analyte_names.clone(),
            target_name: self.target_name.clone(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            scaling: Some(self.scaling.clone()),
        })
    }

    /// Features mapped back to raw concentration units.
    pub fn raw_features(&self) -> Mat {
        Mat::from_fn(self.n_samples(), self.n_analytes(), |i, j| {
            self.scaling.inverse(j, self.features[(i, j)])
        })
    }
}

/// Turns a raw table into a dataset: drops or imputes missing values, removes
/// the target column from the features and rescales each analyte.
pub fn preprocess(raw: &RawTable, spec: &PreprocessSpec, target_name: &str) -> Result<ChemDataset> {
    let target_col = raw
        .columns
        .iter()
        .position(|c| c == target_name)
        .ok_or_else(|| Error::MissingTarget(target_name.to_string()))?;
    if raw.columns.len() < 2 {
        return Err(Error::InvalidParameter(
            "need the target plus at least one analyte column".into(),
        ));
    }
    let analyte_cols: Vec<usize> = (0..raw.columns.len()).filter(|&c| c != target_col).collect();

    let mut keep = Vec::new();
    let mut dates = Vec::new();
    for r in 0..raw.len() {
        // dates must parse even on rows that are dropped later
        let date = match &raw.dates[r] {
            Some(s) => Some(parse_date(s, r)?),
            None => None,
        };
        let located = raw.latitude[r].is_some() && raw.longitude[r].is_some();
        let has_target = raw.values[r][target_col].is_some();
        let complete = analyte_cols.iter().all(|&c| raw.values[r][c].is_some());
        let usable = match spec.missing {
            MissingPolicy::DropRow => complete,
            MissingPolicy::MedianImpute => true,
        };
        if let (Some(d), true, true, true) = (date, located, has_target, usable) {
            keep.push(r);
            dates.push(d);
        }
    }
    if keep.is_empty() {
        return Err(Error::AllRowsDropped);
    }

    let n = keep.len();
    let m = analyte_cols.len();
    let mut scales = Vec::with_capacity(m);
    let mut features = Mat::zeros(n, m);
    for (j, &c) in analyte_cols.iter().enumerate() {
        let name = &raw.columns[c];
        let mut observed: Vec<f64> = keep.iter().filter_map(|&r| raw.values[r][c]).collect();
        for &v in &observed {
            check_value(v, spec.scaling, name)?;
        }
        if observed.is_empty() {
            return Err(Error::BadColumn {
                column: name.clone(),
                reason: "no observed values to impute from".into(),
            });
        }
        let median = median_in_place(&mut observed);
        let column: Vec<f64> = keep
            .iter()
            .map(|&r| raw.values[r][c].unwrap_or(median))
            .collect();
        let pre: Vec<f64> = column
            .iter()
            .map(|&v| match spec.scaling {
                Scaling::Log1pMinMax => libm::log1p(v),
                _ => v,
            })
            .collect();
        let (offset, range) = match spec.scaling {
            Scaling::None => (0.0, 1.0),
            Scaling::MinMax | Scaling::Log1pMinMax => {
                let lo = pre.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = pre.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                (lo, if range > 0.0 { range } else { 1.0 })
            }
        };
        for (i, t) in pre.iter().enumerate() {
            features[(i, j)] = (t - offset) / range;
        }
        scales.push(AnalyteScale {
            name: name.clone(),
            offset,
            range,
            median,
        });
    }

    ChemDataset::new(DatasetParts {
        features,
        target: keep
            .iter()
            .map(|&r| raw.values[r][target_col].unwrap_or(f64::NAN))
            .collect(),
        latitude: keep.iter().map(|&r| raw.latitude[r].unwrap_or(f64::NAN)).collect(),
        longitude: keep.iter().map(|&r| raw.longitude[r].unwrap_or(f64::NAN)).collect(),
        dates,
        analyte_names: analyte_cols.iter().map(|&c| raw.columns[c].clone()).collect(),
        target_name: target_name.to_string(),
        sample_ids: keep.iter().map(|&r| raw.sample_ids[r].clone()).collect(),
        scaling: Some(FittedScaling {
            spec: *spec,
            analytes: scales,
        }),
    })
}

/// Median of a non-empty slice (mean of the two middle values for even
/// lengths). Reorders the slice.
pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    debug_assert!(!v.is_empty());
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

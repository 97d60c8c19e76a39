//! Output files: atomic writes and the saved-model format.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsdst_core::solver::FitReport;
use tsdst_core::{Factorization, FittedScaling, GraphParams, Hyperparams, Mat};

use crate::error::{CliError, CliResult};
use crate::io::{fmt, matrix_csv, read_matrix, render_csv};

pub const DICTIONARY: &str = "dictionary.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const WEIGHTS: &str = "weights.csv";
pub const FIT_REPORT: &str = "fit_report.json";
pub const CONTRIBUTIONS: &str = "contributions.csv";

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let target = dir.join(name);
    let mut tmp = tempfile::Builder::new()
        .prefix(&format!(".{name}."))
        .tempfile_in(dir)
        .map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(CliError::input)?;
    bytes.push(b'\n');
    write_atomic(dir, name, &bytes)
}

pub fn source_names(k: usize) -> Vec<String> {
    (1..=k).map(|s| format!("source_{s}")).collect()
}

/// `fit_report.json`: solver diagnostics plus what `predict` needs besides
/// the dictionary and weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReportFile {
    pub command: String,
    pub target: String,
    pub analytes: Vec<String>,
    pub n_samples: usize,
    pub final_objective: f64,
    pub graph: GraphParams,
    pub scaling: FittedScaling,
    pub report: FitReport,
}

/// The five artifacts of a fit.
pub struct FitArtifacts<'a> {
    pub factorization: &'a Factorization,
    pub report: &'a FitReportFile,
    pub sample_ids: &'a [String],
    /// Observed target per sample, if one was used.
    pub observed: Option<&'a [f64]>,
}

pub fn write_fit(dir: &Path, a: &FitArtifacts<'_>) -> CliResult<()> {
    let f = a.factorization;
    let sources = source_names(f.k());
    write_atomic(dir, DICTIONARY, &matrix_csv("source", &sources, &a.report.analytes, &f.d))?;
    write_atomic(dir, COEFFICIENTS, &matrix_csv("sample_id", a.sample_ids, &sources, &f.a))?;
    write_atomic(
        dir,
        WEIGHTS,
        &render_csv(&["source", "weight"], sources.iter().zip(&f.w).map(|(s, w)| vec![s.clone(), fmt(*w)])),
    )?;
    write_json(dir, FIT_REPORT, a.report)?;

    // per-sample contribution A_ik·W_k of each source to the fitted target
    let mut header = vec!["sample_id".to_string()];
    if a.observed.is_some() {
        header.push("observed".into());
    }
    header.push("fitted".into());
    header.extend(sources.iter().cloned());
    let fitted = f.fitted();
    let rows = (0..f.a.rows()).map(|i| {
        let mut row = vec![a.sample_ids[i].clone()];
        if let Some(y) = a.observed {
            row.push(fmt(y[i]));
        }
        row.push(fmt(fitted[i]));
        row.extend(f.a.row(i).iter().zip(&f.w).map(|(c, w)| fmt(c * w)));
        row
    });
    write_atomic(dir, CONTRIBUTIONS, &render_csv(&header, rows))?;
    Ok(())
}

/// What `predict` reloads from a fit directory.
pub struct SavedModel {
    pub d: Mat,
    pub w: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub scaling: FittedScaling,
    pub target: String,
}

pub fn load_model(dir: &Path) -> CliResult<SavedModel> {
    let report_path = dir.join(FIT_REPORT);
    let text = std::fs::read_to_string(&report_path).map_err(|e| CliError::io(&report_path, e))?;
    let report: FitReportFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", report_path.display())))?;
    let (analytes, d) = read_matrix(&dir.join(DICTIONARY))?;
    if analytes != report.analytes {
        return Err(CliError::Input(format!(
            "{}: analyte columns disagree with {FIT_REPORT}",
            dir.join(DICTIONARY).display()
        )));
    }
    let (_, w) = read_matrix(&dir.join(WEIGHTS))?;
    if w.rows() != d.rows() || w.cols() != 1 {
        return Err(CliError::Input(format!(
            "{}: expected {} weights",
            dir.join(WEIGHTS).display(),
            d.rows()
        )));
    }
    Ok(SavedModel {
        d,
        w: w.col(0),
        hyperparams: report.report.hyperparams.clone(),
        scaling: report.scaling,
        target: report.target,
    })
}

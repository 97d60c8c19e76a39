//! One function per subcommand. Each reads its inputs, runs the library,
//! and writes its artifacts under the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use tsdst_core::eval::{
    build_graphs, compare_methods, continuity_diagnostics, random_grid, rmse, FoldPlan,
};
use tsdst_core::solver::fit;
use tsdst_core::synth::generate;
use tsdst_core::{encode, preprocess, ChemDataset, Hyperparams, RawTable};

use crate::artifacts::{self, source_names, write_atomic, FitArtifacts, FitReportFile};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{dataset_csv, fmt, is_blank, matrix_csv, read_table, render_csv};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Predict,
    Decompose,
    Cv,
    Synth,
    Diagnose,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Decompose => "decompose",
            Command::Cv => "cv",
            Command::Synth => "synth",
            Command::Diagnose => "diagnose",
            Command::Compare => "compare",
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<()> {
    match cmd {
        Command::Fit => cmd_fit(cfg, false),
        Command::Decompose => cmd_fit(cfg, true),
        Command::Predict => cmd_predict(cfg),
        Command::Cv => cmd_cv(cfg),
        Command::Synth => cmd_synth(cfg),
        Command::Diagnose => cmd_diagnose(cfg),
        Command::Compare => cmd_compare(cfg),
    }
}

fn load_dataset(cfg: &RunConfig, target: &str) -> CliResult<ChemDataset> {
    let path = cfg.input_path()?;
    let raw = read_table(path)?;
    preprocess(&raw, &cfg.preprocess, target).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn checked_hyperparams(h: Hyperparams, n: usize) -> CliResult<Hyperparams> {
    h.validate().map_err(CliError::input)?;
    if h.k_sources > n {
        return Err(CliError::Input(format!(
            "k_sources = {} exceeds the {n} usable samples",
            h.k_sources
        )));
    }
    Ok(h)
}

/// Name of the placeholder target added when `decompose` runs without one.
const NO_TARGET: &str = "__no_target__";

fn cmd_fit(cfg: &RunConfig, decompose: bool) -> CliResult<()> {
    let target = match (decompose, cfg.target.as_deref()) {
        (true, None) => None,
        _ => Some(cfg.target_name()?),
    };
    let ds = match target {
        Some(t) => load_dataset(cfg, t)?,
        None => {
            // the prediction term carries zero weight, so a zero column stands in
            let path = cfg.input_path()?;
            let mut raw: RawTable = read_table(path)?;
            raw.columns.push(NO_TARGET.to_string());
            for row in &mut raw.values {
                row.push(Some(0.0));
            }
            preprocess(&raw, &cfg.preprocess, NO_TARGET).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
    };
    let mut h = cfg.seeded_hyperparams();
    if decompose {
        h.prediction_weight = 0.0;
    }
    let h = checked_hyperparams(h, ds.n_samples())?;
    let (ls, lt) = build_graphs(&ds, &cfg.graph).map_err(CliError::input)?;
    let (f, mut report) = fit(&ds, &h, &ls, &lt).map_err(CliError::solver)?;
    if target.is_some() {
        report.train_rmse = Some(rmse(&f.fitted(), ds.target()).map_err(CliError::solver)?);
    }
    let file = FitReportFile {
        command: if decompose { "decompose" } else { "fit" }.into(),
        target: target.unwrap_or_default().to_string(),
        analytes: ds.analyte_names().to_vec(),
        n_samples: ds.n_samples(),
        final_objective: report.final_objective(),
        graph: cfg.graph.clone(),
        scaling: ds.scaling().clone(),
        report,
    };
    artifacts::write_fit(
        &cfg.out_dir,
        &FitArtifacts {
            factorization: &f,
            report: &file,
            sample_ids: ds.sample_ids(),
            observed: target.map(|_| ds.target()),
        },
    )
}

pub const PREDICTIONS: &str = "predictions.csv";

fn cmd_predict(cfg: &RunConfig) -> CliResult<()> {
    let model_dir = cfg
        .predict
        .model
        .as_deref()
        .ok_or_else(|| CliError::Input("no model directory given (use --model)".into()))?;
    let data = cfg
        .predict
        .new_data
        .as_deref()
        .or(cfg.input.as_deref())
        .ok_or_else(|| CliError::Input("no data to predict (use --new-data)".into()))?;
    let model = artifacts::load_model(model_dir)?;
    let k = model.d.rows();
    let mut header = vec!["sample_id".to_string(), "prediction".to_string()];
    header.extend(source_names(k));

    let rows: Vec<Vec<String>> = if is_blank(data)? {
        Vec::new()
    } else {
        let raw = read_table(data)?;
        let batch = model
            .scaling
            .transform_table(&raw, &[model.target.as_str()])
            .map_err(|e| CliError::Input(format!("{}: {e}", data.display())))?;
        let enc = encode(&batch.features, &model.d, &model.hyperparams).map_err(CliError::solver)?;
        if !enc.unconverged.is_empty() {
            log::warn!("{} samples did not reach the encoding tolerance", enc.unconverged.len());
        }
        let pred = enc.coefficients.matvec(&model.w);
        batch
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let mut row = vec![id.clone(), fmt(pred[i])];
                row.extend(enc.coefficients.row(i).iter().map(|&v| fmt(v)));
                row
            })
            .collect()
    };
    write_atomic(&cfg.out_dir, PREDICTIONS, &render_csv(&header, rows))?;
    Ok(())
}

pub const CV_RESULTS: &str = "cv_results.csv";
pub const CV_BEST: &str = "best_hyperparams.toml";
pub const CV_SUMMARY: &str = "cv_summary.txt";

#[derive(Serialize)]
struct BestConfig<'a> {
    hyperparams: &'a Hyperparams,
}

fn cmd_cv(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg, cfg.target_name()?)?;
    let base = checked_hyperparams(cfg.seeded_hyperparams(), ds.n_samples())?;
    let grid: Vec<Hyperparams> = if cfg.cv.grid.is_empty() {
        random_grid(&base, cfg.cv.grid_size, cfg.seed)
    } else {
        cfg.cv
            .grid
            .iter()
            .map(|h| checked_hyperparams(Hyperparams { seed: cfg.seed, ..h.clone() }, ds.n_samples()))
            .collect::<CliResult<_>>()?
    };
    if grid.is_empty() {
        return Err(CliError::Input("the CV grid is empty".into()));
    }
    let plan = FoldPlan::new(&ds, cfg.cv.folds, cfg.seed, cfg.cv.strategy).map_err(CliError::input)?;
    let pool = parallel::pool(cfg.threads)?;
    let res = parallel::cross_validate(&ds, &grid, &plan, &cfg.graph, &pool)?;

    let mut header: Vec<String> = vec!["config".into(), "mean_rmse".into()];
    header.extend((1..=plan.folds).map(|f| format!("fold_{f}")));
    header.extend(base.lambdas().iter().map(|(n, _)| n.to_string()));
    let rows = grid.iter().enumerate().map(|(c, h)| {
        let mut row = vec![c.to_string(), fmt(res.mean_rmse[c])];
        row.extend(res.fold_rmse[c].iter().map(|&v| fmt(v)));
        row.extend(h.lambdas().iter().map(|(_, v)| fmt(*v)));
        row
    });
    write_atomic(&cfg.out_dir, CV_RESULTS, &render_csv(&header, rows))?;
    let best = toml::to_string(&BestConfig { hyperparams: &res.best }).map_err(CliError::input)?;
    write_atomic(&cfg.out_dir, CV_BEST, best.as_bytes())?;

    let mut s = String::new();
    let _ = writeln!(s, "{} configs x {} folds on {} samples", grid.len(), plan.folds, ds.n_samples());
    let _ = writeln!(s, "best config: {} (mean RMSE {})", res.best_index, fmt(res.mean_rmse[res.best_index]));
    for (c, f, e) in &res.failures {
        let _ = writeln!(s, "config {c} fold {}: {e}", f + 1);
    }
    write_atomic(&cfg.out_dir, CV_SUMMARY, s.as_bytes())?;
    if res.mean_rmse.iter().all(|v| !v.is_finite()) {
        return Err(CliError::Solver("every CV configuration failed".into()));
    }
    Ok(())
}

pub const SYNTH_DATA: &str = "data.csv";
pub const TRUTH_DICTIONARY: &str = "truth_dictionary.csv";
pub const TRUTH_COEFFICIENTS: &str = "truth_coefficients.csv";
pub const TRUTH_WEIGHTS: &str = "truth_weights.csv";

fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    let data = generate(&cfg.seeded_synth()).map_err(CliError::input)?;
    let ds = &data.dataset;
    let sources = source_names(data.d_true.rows());
    let dir = &cfg.out_dir;
    write_atomic(dir, SYNTH_DATA, &dataset_csv(ds))?;
    write_atomic(dir, TRUTH_DICTIONARY, &matrix_csv("source", &sources, ds.analyte_names(), &data.d_true))?;
    write_atomic(dir, TRUTH_COEFFICIENTS, &matrix_csv("sample_id", ds.sample_ids(), &sources, &data.a_true))?;
    write_atomic(
        dir,
        TRUTH_WEIGHTS,
        &render_csv(&["source", "weight"], sources.iter().zip(&data.w_true).map(|(s, w)| vec![s.clone(), fmt(*w)])),
    )?;
    Ok(())
}

pub const MONTHLY: &str = "monthly_quantiles.csv";
pub const DISTANCE_BINS: &str = "distance_bins.csv";

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn cmd_diagnose(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg, cfg.target_name()?)?;
    let r = continuity_diagnostics(&ds, cfg.diagnose.distance_bins, cfg.diagnose.max_pairs, cfg.seed)
        .map_err(CliError::input)?;
    write_atomic(
        &cfg.out_dir,
        MONTHLY,
        &render_csv(
            &["month", "count", "q25", "median", "q75"],
            r.monthly.iter().map(|m| {
                vec![m.month.to_string(), m.count.to_string(), opt(m.q25), opt(m.median), opt(m.q75)]
            }),
        ),
    )?;
    write_atomic(
        &cfg.out_dir,
        DISTANCE_BINS,
        &render_csv(
            &["lower_m", "upper_m", "pairs", "mean_abs_diff"],
            r.distance_bins.iter().map(|b| {
                vec![fmt(b.lower_m), fmt(b.upper_m), b.pairs.to_string(), opt(b.mean_abs_diff)]
            }),
        ),
    )?;
    Ok(())
}

pub const COMPARISON: &str = "comparison.csv";
pub const COMPARISON_SUMMARY: &str = "comparison.txt";

fn cmd_compare(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg, cfg.target_name()?)?;
    let h = checked_hyperparams(cfg.seeded_hyperparams(), ds.n_samples())?;
    let methods = &cfg.compare.methods;
    if methods.is_empty() {
        return Err(CliError::Input("no methods to compare".into()));
    }
    let h_map: BTreeMap<_, _> = methods.iter().map(|&m| (m, h.clone())).collect();
    let table = compare_methods(&ds, methods, &h_map, &cfg.graph, cfg.compare.test_fraction, cfg.seed)
        .map_err(CliError::input)?;
    write_atomic(
        &cfg.out_dir,
        COMPARISON,
        &render_csv(
            &["method", "train_rmse", "test_rmse", "error"],
            table.rows.iter().map(|r| {
                vec![r.method.to_string(), fmt(r.train_rmse), fmt(r.test_rmse), r.error.clone().unwrap_or_default()]
            }),
        ),
    )?;
    let mut s = format!("train {} / test {} samples\n", table.n_train, table.n_test);
    for r in &table.rows {
        let _ = writeln!(s, "{:<8} test RMSE {}", r.method.name(), fmt(r.test_rmse));
    }
    write_atomic(&cfg.out_dir, COMPARISON_SUMMARY, s.as_bytes())?;
    if table.any_failed() {
        let failed: Vec<_> = table.rows.iter().filter(|r| r.error.is_some()).map(|r| r.method.name()).collect();
        return Err(CliError::Solver(format!("methods failed: {}", failed.join(", "))));
    }
    Ok(())
}

/// True if `dir` holds every artifact `fit` writes.
pub fn has_fit_artifacts(dir: &Path) -> bool {
    [
        artifacts::DICTIONARY,
        artifacts::COEFFICIENTS,
        artifacts::WEIGHTS,
        artifacts::FIT_REPORT,
        artifacts::CONTRIBUTIONS,
    ]
    .iter()
    .all(|f| dir.join(f).is_file())
}


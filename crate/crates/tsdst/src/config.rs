//! Run configuration: a TOML file whose values can be overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsdst_core::eval::{Method, SplitStrategy};
use tsdst_core::synth::SynthSpec;
use tsdst_core::{GraphParams, Hyperparams, PreprocessSpec};

use crate::error::{CliError, CliResult};

/// Everything a command needs. Every field has a default, so an empty file
/// is a valid configuration.
///
/// `seed` is the single source of randomness: it replaces the seeds nested
/// in `hyperparams` and `synth` whenever a command runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub target: Option<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads for cross-validation; all cores if unset.
    pub threads: Option<usize>,
    pub preprocess: PreprocessSpec,
    pub hyperparams: Hyperparams,
    pub graph: GraphParams,
    pub predict: PredictOptions,
    pub cv: CvOptions,
    pub compare: CompareOptions,
    pub synth: SynthSpec,
    pub diagnose: DiagnoseOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            target: None,
            out_dir: PathBuf::from("tsd-out"),
            seed: 0,
            threads: None,
            preprocess: PreprocessSpec::default(),
            hyperparams: Hyperparams::default(),
            graph: GraphParams::default(),
            predict: PredictOptions::default(),
            cv: CvOptions::default(),
            compare: CompareOptions::default(),
            synth: SynthSpec::default(),
            diagnose: DiagnoseOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOptions {
    /// Directory holding the artifacts of a previous `fit`.
    pub model: Option<PathBuf>,
    pub new_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub folds: usize,
    pub strategy: SplitStrategy,
    /// Size of the seeded random grid drawn around `hyperparams` when
    /// `grid` is empty.
    pub grid_size: usize,
    /// Explicit configurations; each table starts from the defaults.
    pub grid: Vec<Hyperparams>,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            strategy: SplitStrategy::Random,
            grid_size: 64,
            grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub methods: Vec<Method>,
    pub test_fraction: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    pub distance_bins: usize,
    pub max_pairs: usize,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            distance_bins: 20,
            max_pairs: 1_000_000,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub target: Option<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub model: Option<PathBuf>,
    pub new_data: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Input(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Applies flag values on top of the file values.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.input {
            self.input = Some(v.clone());
        }
        if let Some(v) = &o.target {
            self.target = Some(v.clone());
        }
        if let Some(k) = o.k {
            self.hyperparams.k_sources = k;
            self.synth.k_sources = k;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if let Some(v) = &o.model {
            self.predict.model = Some(v.clone());
        }
        if let Some(v) = &o.new_data {
            self.predict.new_data = Some(v.clone());
        }
    }

    /// Hyperparameters with the run seed applied.
    pub fn seeded_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            seed: self.seed,
            ..self.hyperparams.clone()
        }
    }

    pub fn seeded_synth(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn input_path(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Input("no input file given (use --input or `input` in the config)".into()))
    }

    pub fn target_name(&self) -> CliResult<&str> {
        self.target
            .as_deref()
            .ok_or_else(|| CliError::Input("no target analyte given (use --target or `target` in the config)".into()))
    }
}

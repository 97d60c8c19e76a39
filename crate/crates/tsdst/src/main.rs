use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use tsdst::{run, CliError, Command, Overrides, RunConfig};

/// Targeted source detection: fit, predict and evaluate joint
/// regression/nonnegative source models of water-chemistry data.
#[derive(Parser)]
#[command(name = "tsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Fit sources, coefficients and target weights.
    Fit,
    /// Encode new samples against a fitted model and predict the target.
    Predict,
    /// Fit sources without the prediction loss.
    Decompose,
    /// Cross-validated hyperparameter search.
    Cv,
    /// Generate synthetic data with known sources.
    Synth,
    /// Monthly and distance continuity tables of the target.
    Diagnose,
    /// Compare TSDST with the linear baselines on one split.
    Compare,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Target analyte column.
    #[arg(long, global = true)]
    target: Option<String>,
    /// Number of sources.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "TSD_THREADS")]
    threads: Option<usize>,
    /// Directory of a previous `fit` (predict).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// CSV of samples to predict (predict).
    #[arg(long, global = true)]
    new_data: Option<PathBuf>,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Fit => Command::Fit,
            Cmd::Predict => Command::Predict,
            Cmd::Decompose => Command::Decompose,
            Cmd::Cv => Command::Cv,
            Cmd::Synth => Command::Synth,
            Cmd::Diagnose => Command::Diagnose,
            Cmd::Compare => Command::Compare,
        }
    }
}

fn resolve(f: &Flags) -> Result<RunConfig, CliError> {
    let mut cfg = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        input: f.input.clone(),
        target: f.target.clone(),
        k: f.k,
        seed: f.seed,
        out_dir: f.out.clone(),
        threads: f.threads,
        model: f.model.clone(),
        new_data: f.new_data.clone(),
    });
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are input errors; help and version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cmd = Command::from(cli.command);
    let started = Instant::now();
    let result = resolve(&cli.flags).and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(()) => {
            eprintln!("tsd {}: done in {:.2?}", cmd.name(), started.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tsd {}: error: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

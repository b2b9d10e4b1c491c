use std::path::PathBuf;
use std::process::ExitCode;

use aeromon::config::{PipelineConfig, DEFAULT_OUT_DIR};
use aeromon::error::{CliError, EXIT_CONFIG};
use aeromon::pipeline::{run_pipeline, RunLock};
use aeromon::stages::{self, Overrides, Workspace};
use aeromon_core::baselines::ClassifierKind;
use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "aeromon", version, about = "Engine telemetry anomaly detection pipeline")]
struct Cli {
    /// Pipeline config (TOML). Without it, a synthetic-data config with
    /// default settings is used and --seed is required.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Generate,
    /// Split labelled data into test, supervised-train and AE train/val parts.
    Split {
        /// Labelled CSV (default: generated data, then the configured CSV).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit the healthy-data scaler and train the autoencoder.
    TrainAe,
    /// Fit residual statistics and the decision threshold.
    Calibrate,
    /// Score unlabelled features with a scorer or classifier file.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// Feature CSV (default: the test features).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train one or more supervised baselines.
    TrainClf {
        /// Classifier kinds (default: the configured baselines).
        #[arg(long, value_delimiter = ',')]
        kind: Vec<ClassifierKind>,
        /// Select hyperparameters over the configured grids by stratified CV.
        #[arg(long)]
        cv: bool,
        #[arg(long, conflicts_with = "cv")]
        k: Option<usize>,
        #[arg(long, conflicts_with = "cv")]
        l2: Option<f64>,
        #[arg(long, conflicts_with = "cv")]
        max_depth: Option<usize>,
        #[arg(long, conflicts_with = "cv")]
        n_trees: Option<usize>,
        #[arg(long, conflicts_with = "cv")]
        hidden_units: Option<usize>,
    },
    /// Report metrics for scored models against the test labels.
    Evaluate {
        /// Model keys (default: every predictions file present).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Collect per-model reports into the comparison table.
    Compare {
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Per-channel histograms of normal vs anomalous samples.
    Histogram {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Run every stage end to end.
    Run,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let cfg = match (&cli.config, cli.seed) {
        (Some(path), seed) => PipelineConfig::load(path)?.with_seed(seed),
        (None, Some(seed)) => PipelineConfig::synthetic(seed),
        (None, None) => return Err(CliError::Config("pass --config or --seed".into())),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Builds the global pool from `AEROMON_THREADS`; unset or 0 means serial.
fn init_threads() -> Result<(), CliError> {
    let threads = match std::env::var("AEROMON_THREADS") {
        Err(_) => 1,
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => 1,
            Ok(n) => n,
            Err(_) => return Err(CliError::Config(format!("AEROMON_THREADS must be a non-negative integer, got `{v}`"))),
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))
}

fn models_or_discovered(ws: &Workspace, models: Vec<String>, prefix: &str, suffix: &str) -> Result<Vec<String>> {
    if !models.is_empty() {
        return Ok(models);
    }
    let found = stages::discover(ws, prefix, suffix)?;
    if found.is_empty() {
        anyhow::bail!(CliError::MissingInput {
            path: ws.path(&format!("{prefix}*{suffix}")),
            hint: "nothing to process; run the earlier stages first".into(),
        });
    }
    Ok(found)
}

fn execute(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = load_config(&cli)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    if let Command::Run = cli.command {
        let manifest = run_pipeline(&cfg, &out, cli.quiet)?;
        if !cli.quiet {
            eprintln!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
        }
        return Ok(());
    }

    let ws = Workspace::new(&out)?;
    let _lock = RunLock::acquire(&ws)?;
    let written = match cli.command {
        Command::Generate => stages::generate(&cfg, &ws)?,
        Command::Split { data } => stages::split(&cfg, &ws, data.as_deref())?,
        Command::TrainAe => {
            let (paths, report) = stages::train_ae(&cfg, &ws)?;
            if !cli.quiet {
                eprintln!(
                    "best validation MSE {:.6e} at epoch {} of {}",
                    report.best_val_loss, report.best_epoch, report.epochs_run
                );
            }
            paths
        }
        Command::Calibrate => {
            let (paths, scorer) = stages::calibrate(&cfg, &ws)?;
            if !cli.quiet {
                eprintln!("{} threshold {:.6}", scorer.policy().kind, scorer.threshold());
            }
            paths
        }
        Command::Score { model, input, output } => stages::score(&ws, &model, input.as_deref(), output.as_deref())?,
        Command::TrainClf {
            kind,
            cv,
            k,
            l2,
            max_depth,
            n_trees,
            hidden_units,
        } => {
            let kinds = if kind.is_empty() { cfg.baselines.clone() } else { kind };
            let ov = Overrides {
                k,
                l2,
                max_depth,
                n_trees,
                hidden_units,
            };
            let jobs = kinds
                .into_iter()
                .map(|kind| {
                    let candidates = if cv {
                        cfg.candidates(kind)
                    } else {
                        vec![stages::single_candidate(&cfg, kind, &ov)?]
                    };
                    Ok((kind, candidates))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            stages::train_clf(&cfg, &ws, &jobs)?
        }
        Command::Evaluate { models } => {
            let models = models_or_discovered(&ws, models, "predictions_", ".csv")?;
            let (paths, reports) = stages::evaluate(&ws, &models)?;
            if !cli.quiet {
                for r in &reports {
                    eprintln!(
                        "{:<14} precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4}",
                        r.model, r.metrics.precision, r.metrics.recall, r.metrics.f1, r.metrics.accuracy
                    );
                }
            }
            paths
        }
        Command::Compare { models } => {
            let models = models_or_discovered(&ws, models, "report_", ".json")?;
            stages::compare(&ws, &models)?
        }
        Command::Histogram { data, bins } => stages::histogram(&cfg, &ws, data.as_deref(), bins)?,
        Command::Run => unreachable!("handled above"),
    };
    if !cli.quiet {
        for p in written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(EXIT_CONFIG, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

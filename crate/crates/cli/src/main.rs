//! `skyrm` — train, run and analyse skyrmion segmentation models.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_override, RunConfig};
use skyrm_core::error::Result;

#[derive(Parser)]
#[command(
    name = "skyrm",
    version,
    about = "Convolutional skyrmion segmentation for Kerr-microscopy images"
)]
struct Cli {
    /// Plain-text config file (`key = value` lines, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Preset: benchmark2, benchmark3, master or inversion.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Base RNG seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker-parallelism cap; 1 guarantees bit-reproducibility. The engine
    /// is sequential, so results are identical for every value.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output root for run directories (default $SKYRM_OUT, then ./runs).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Extra `KEY=VALUE` config overrides; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct TrainArgs {
    /// Dataset root with train/ and val/ splits.
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    runs: Option<usize>,
    #[arg(long, value_name = "F")]
    dropout: Option<f64>,
    /// 2 or 3.
    #[arg(long, value_name = "N")]
    classes: Option<usize>,
    #[arg(long, value_name = "N")]
    depth: Option<usize>,
    #[arg(long, value_name = "N")]
    base_channels: Option<usize>,
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    #[arg(long, value_name = "F")]
    learning_rate: Option<f64>,
    /// Label smoothing α.
    #[arg(long, value_name = "F")]
    alpha: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more models and keep the best checkpoints.
    Train(TrainArgs),
    /// Predict masks for a directory of images.
    Predict {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Directory of .pgm/.png greyscale images.
        #[arg(long, value_name = "DIR")]
        input_dir: Option<PathBuf>,
        /// Average predictions over the three right-angle rotations.
        #[arg(long)]
        tta: bool,
    },
    /// Compare predicted masks against ground truth.
    Eval {
        #[arg(long, value_name = "DIR")]
        pred_dir: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        truth_dir: Option<PathBuf>,
    },
    /// Uniform-greyscale ramp probe (plus optional inversion experiment).
    Probe {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Image for the inversion experiment.
        #[arg(long, value_name = "PATH")]
        image: Option<PathBuf>,
    },
    /// Generate a synthetic labelled dataset.
    Synth {
        /// Where to write the dataset (default: inside the run directory).
        #[arg(long, value_name = "DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Weak-label a 2-class dataset with a defect-aware 3-class model.
    Bootstrap {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Dataset directory holding images/ and 2-class masks/.
        #[arg(long, value_name = "DIR")]
        input_dir: Option<PathBuf>,
        /// Ignore predicted defect components smaller than this.
        #[arg(long, value_name = "N")]
        min_defect_size: Option<usize>,
    },
    /// Render summaries and charts for an existing run directory.
    Report {
        #[arg(long, value_name = "DIR")]
        run: PathBuf,
    },
}

fn push_opt(overrides: &mut Vec<(String, String)>, key: &str, value: Option<impl ToString>) {
    if let Some(v) = value {
        overrides.push((key.to_string(), v.to_string()));
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides: Vec<(String, String)> = Vec::new();
    for raw in &cli.set {
        overrides.push(parse_override(raw)?);
    }
    push_opt(&mut overrides, "seed", cli.seed);
    push_opt(&mut overrides, "threads", cli.threads);
    push_opt(&mut overrides, "out", cli.out.as_ref().map(|p| p.display()));

    match &cli.command {
        Command::Train(args) => {
            push_opt(&mut overrides, "data_dir", args.data_dir.as_ref().map(|p| p.display()));
            push_opt(&mut overrides, "epochs", args.epochs);
            push_opt(&mut overrides, "runs", args.runs);
            push_opt(&mut overrides, "dropout", args.dropout);
            push_opt(&mut overrides, "num_classes", args.classes);
            push_opt(&mut overrides, "depth", args.depth);
            push_opt(&mut overrides, "base_channels", args.base_channels);
            push_opt(&mut overrides, "batch_size", args.batch_size);
            push_opt(&mut overrides, "learning_rate", args.learning_rate);
            push_opt(&mut overrides, "label_smoothing", args.alpha);
        }
        Command::Predict {
            checkpoint,
            input_dir,
            tta,
        } => {
            push_opt(&mut overrides, "checkpoint", checkpoint.as_ref().map(|p| p.display()));
            push_opt(&mut overrides, "input_dir", input_dir.as_ref().map(|p| p.display()));
            if *tta {
                overrides.push(("tta".into(), "true".into()));
            }
        }
        Command::Eval {
            pred_dir,
            truth_dir,
        } => {
            push_opt(&mut overrides, "pred_dir", pred_dir.as_ref().map(|p| p.display()));
            push_opt(&mut overrides, "truth_dir", truth_dir.as_ref().map(|p| p.display()));
        }
        Command::Probe { checkpoint, image } => {
            push_opt(&mut overrides, "checkpoint", checkpoint.as_ref().map(|p| p.display()));
            push_opt(&mut overrides, "image", image.as_ref().map(|p| p.display()));
        }
        Command::Synth { data_dir } => {
            push_opt(&mut overrides, "data_dir", data_dir.as_ref().map(|p| p.display()));
        }
        Command::Bootstrap {
            checkpoint,
            input_dir,
            min_defect_size,
        } => {
            push_opt(&mut overrides, "checkpoint", checkpoint.as_ref().map(|p| p.display()));
            push_opt(&mut overrides, "input_dir", input_dir.as_ref().map(|p| p.display()));
            push_opt(&mut overrides, "min_defect_size", *min_defect_size);
        }
        Command::Report { .. } => {}
    }

    let cfg = RunConfig::resolve(cli.config.as_deref(), cli.preset.as_deref(), &overrides)?;
    let threads: usize = cfg.parse("threads")?;
    let _ = threads; // accepted and echoed; the engine is single-threaded

    match &cli.command {
        Command::Train(_) => commands::cmd_train(&cfg),
        Command::Predict { .. } => commands::cmd_predict(&cfg),
        Command::Eval { .. } => commands::cmd_eval(&cfg),
        Command::Probe { .. } => commands::cmd_probe(&cfg),
        Command::Synth { .. } => commands::cmd_synth(&cfg),
        Command::Bootstrap { .. } => commands::cmd_bootstrap(&cfg),
        Command::Report { run } => commands::cmd_report(&cfg, run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

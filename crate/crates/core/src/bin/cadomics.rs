use std::path::PathBuf;
use std::process::ExitCode;

use cadomics::pipeline::{run, Command, PipelineConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cadomics", version, about = "Calcium/fat CT features and obstructive-CAD modelling")]
struct Cli {
    /// TOML pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Calcium-omics and fat-omics features for every manifest row.
    Extract,
    /// Rank features by cross-validated mean |SHAP|.
    Select,
    /// Fit one model on the whole feature table.
    Train,
    /// Repeated stratified cross-validation report.
    Evaluate,
    /// DeLong and McNemar tests between two score files.
    Compare,
    /// Cross-validated hyperparameter grid.
    Gridsearch,
    /// Write a synthetic phantom dataset and manifest.
    Phantom,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => match PipelineConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                log::error!("{e}");
                return ExitCode::from(2);
            }
        },
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.set_seed(s);
    }
    if let Some(t) = cli.threads {
        config.set_threads(t);
    }
    if let Some(o) = cli.out {
        config.out_dir = o;
    }
    let command = match cli.command {
        Cmd::Extract => Command::Extract,
        Cmd::Select => Command::Select,
        Cmd::Train => Command::Train,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Compare => Command::Compare,
        Cmd::Gridsearch => Command::Gridsearch,
        Cmd::Phantom => Command::Phantom,
    };
    match run(command, &config) {
        Ok(summary) => {
            for f in &summary.failures {
                log::warn!("{}: {}", f.item, f.error);
            }
            log::info!(
                "{} items, {} failures, {} files in {}",
                summary.items,
                summary.failures.len(),
                summary.outputs.len(),
                config.out_dir.display()
            );
            if summary.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

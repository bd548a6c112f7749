use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use rkls::persist::{load_model, save_model};
use rkls::{average_models, Model};

mod config;
mod run;

use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "rkls", version, about = "Multi-class LS-SVM training with randomized block solvers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train on the configured dataset; writes trace CSV, report JSON and optionally the model.
    Train {
        /// TOML experiment file; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Launch this many independently seeded runs and average their models.
        #[arg(long)]
        parallel_runs: Option<usize>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a saved model on the test split of the configured dataset.
    Evaluate {
        #[arg(long = "input", value_name = "MODEL")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Average the weights of models trained on the same samples.
    Average {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Print model metadata.
    Inspect { model: PathBuf },
}

fn resolve(config: Option<PathBuf>, overrides: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(&path)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut cfg);
    Ok(cfg)
}

fn inspect(model: &Model) {
    println!("classes:     {}", model.num_classes());
    println!("samples:     {}", model.num_train());
    println!("input dim:   {}", model.input_dim());
    println!("feature dim: {}", model.train_samples().ncols());
    println!("kernel:      {}", model.kernel());
    println!("gamma:       {}", model.gamma());
    println!("preprocess:  {}", model.preprocess());
    let biases: Vec<String> = model.biases().iter().map(|b| format!("{b:.6}")).collect();
    println!("biases:      [{}]", biases.join(", "));
}

fn main_inner() -> Result<()> {
    match Cli::parse().command {
        Cmd::Train {
            config,
            parallel_runs,
            print_config,
            overrides,
        } => {
            let cfg = resolve(config, overrides)?;
            if print_config {
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            match parallel_runs {
                Some(0) => bail!("--parallel-runs must be at least 1"),
                Some(n) if n > 1 => run::run_parallel(&cfg, n)?,
                _ => run::run_experiment(&cfg)?,
            };
        }
        Cmd::Evaluate {
            input,
            config,
            overrides,
        } => {
            let cfg = resolve(config, overrides)?;
            cfg.validate()?;
            let model = load_model(&input)?;
            let (_, test_set) = run::load_data(&cfg)?;
            let report = run::evaluate_batched(&model, &test_set, cfg.score_batch)?;
            println!(
                "eta: {:.2}% ({} of {} misclassified)",
                report.error_rate * 100.0,
                report.num_samples - report.correct(),
                report.num_samples
            );
            run::print_confusion(&report);
            run::write_json(&report, &cfg.report_json)?;
        }
        Cmd::Average { output, models } => {
            let loaded = models.iter().map(load_model).collect::<rkls::Result<Vec<_>>>()?;
            let avg = average_models(&loaded)?;
            save_model(&avg, &output)?;
            println!("averaged {} models into {}", loaded.len(), output.display());
        }
        Cmd::Inspect { model } => inspect(&load_model(&model)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

//! Experiment orchestration: data loading, training, reporting.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rkls::classifier::decision_scores_batched;
use rkls::dataset::{load_cifar10_batches, load_idx_dataset};
use rkls::persist::{load_model, save_model, save_trace_csv};
use rkls::{average_models, train, BlobSpec, EvaluationReport, LabeledDataset, Model, TrainOptions};

use crate::config::{DatasetKind, ExperimentConfig};

const MNIST_CLASSES: usize = 10;

pub fn load_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train_set, test_set) = match cfg.dataset {
        DatasetKind::Synthetic => BlobSpec {
            num_features: cfg.num_features,
            num_classes: cfg.num_classes,
            separation: cfg.separation,
            seed: cfg.data_seed,
        }
        .generate(cfg.n_train, cfg.n_test)?,
        DatasetKind::Mnist => {
            let path = |p: &Option<PathBuf>| p.clone().context("MNIST needs all four IDX paths");
            (
                load_idx_dataset(path(&cfg.train_images)?, path(&cfg.train_labels)?, MNIST_CLASSES)?,
                load_idx_dataset(path(&cfg.test_images)?, path(&cfg.test_labels)?, MNIST_CLASSES)?,
            )
        }
        DatasetKind::Cifar10 => {
            let test = cfg.test_batch.clone().context("CIFAR-10 needs `test_batch`")?;
            (load_cifar10_batches(&cfg.train_batches)?, load_cifar10_batches(&[test])?)
        }
    };
    let train_set = match cfg.max_train {
        Some(n) => train_set.truncate(n)?,
        None => train_set,
    };
    let test_set = match cfg.max_test {
        Some(n) => test_set.truncate(n)?,
        None => test_set,
    };
    Ok((train_set, test_set))
}

/// Final report written as JSON.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub dataset: DatasetKind,
    pub method: String,
    pub kernel: String,
    pub gamma: f64,
    pub preprocess: String,
    pub block_size: usize,
    pub seed: u64,
    pub iterations: usize,
    pub num_train: usize,
    pub num_test: usize,
    pub num_classes: usize,
    /// Test error as a fraction.
    pub eta: f64,
    pub eta_percent: f64,
    pub train_seconds: f64,
    pub confusion_counts: Vec<Vec<usize>>,
    pub confusion_percent: Vec<Vec<f64>>,
}

pub fn evaluate_batched(model: &Model, data: &LabeledDataset, batch: usize) -> Result<EvaluationReport> {
    if data.is_empty() {
        bail!("test set is empty");
    }
    let scores = decision_scores_batched(model, data.samples(), batch)?;
    let pred = rkls::classifier::argmax_rows(&scores);
    Ok(EvaluationReport::from_predictions(data.labels(), &pred, model.num_classes())?)
}

pub fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn print_confusion(report: &EvaluationReport) {
    let k = report.confusion_percent.len();
    let header: Vec<String> = (0..k).map(|j| format!("{j:>7}")).collect();
    println!("confusion (% of true class; rows true, columns predicted)");
    println!("     {}", header.join(""));
    for (i, row) in report.confusion_percent.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:>7.2}")).collect();
        println!("{i:>4} {}", cells.join(""));
    }
}

fn build_report(
    cfg: &ExperimentConfig,
    eval: &EvaluationReport,
    iterations: usize,
    num_train: usize,
    train_seconds: f64,
) -> Result<RunReport> {
    Ok(RunReport {
        dataset: cfg.dataset,
        method: cfg.solver()?.method.name().into(),
        kernel: cfg.kernel_spec()?.to_string(),
        gamma: cfg.gamma,
        preprocess: cfg.preprocess_spec()?.to_string(),
        block_size: cfg.block_size,
        seed: cfg.seed,
        iterations,
        num_train,
        num_test: eval.num_samples,
        num_classes: eval.confusion_counts.len(),
        eta: eval.error_rate,
        eta_percent: eval.error_rate * 100.0,
        train_seconds,
        confusion_counts: eval.confusion_counts.clone(),
        confusion_percent: eval.confusion_percent.clone(),
    })
}

/// Loads data, trains, evaluates every `eval_every` iterations and writes
/// the trace CSV, the report JSON and (optionally) the model.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (train_set, test_set) = load_data(cfg)?;
    let opts = TrainOptions {
        precision: cfg.precision,
        validation: Some(&test_set),
        eval_every: cfg.eval_every,
    };
    let start = Instant::now();
    let (model, trace) = train(
        &train_set,
        cfg.kernel_spec()?,
        cfg.gamma,
        &cfg.preprocess_spec()?,
        &cfg.solver()?,
        &opts,
    )?;
    let train_seconds = start.elapsed().as_secs_f64();

    save_trace_csv(&trace, &cfg.trace_csv)?;
    if let Some(path) = &cfg.model {
        save_model(&model, path)?;
    }
    let eval = evaluate_batched(&model, &test_set, cfg.score_batch)?;
    let report = build_report(cfg, &eval, trace.len(), train_set.len(), train_seconds)?;
    write_json(&report, &cfg.report_json)?;

    println!(
        "{} on {} training samples, {} iterations in {:.2}s",
        report.method, report.num_train, report.iterations, report.train_seconds
    );
    println!(
        "final eta: {:.2}% ({} of {} misclassified)",
        report.eta_percent,
        eval.num_samples - eval.correct(),
        eval.num_samples
    );
    Ok(report)
}

fn with_suffix(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

/// Runs `runs` independently seeded training processes, averages their
/// models and evaluates the average.
pub fn run_parallel(cfg: &ExperimentConfig, runs: usize) -> Result<RunReport> {
    cfg.validate()?;
    let exe = std::env::current_exe().context("cannot locate the rkls executable")?;
    let model_base = cfg.model.clone().unwrap_or_else(|| with_suffix(&cfg.report_json, "model"));
    let mut children = Vec::with_capacity(runs);
    let mut run_cfgs = Vec::with_capacity(runs);
    for i in 0..runs {
        let tag = format!("run{i}");
        let run = ExperimentConfig {
            seed: cfg.seed + i as u64,
            trace_csv: with_suffix(&cfg.trace_csv, &tag),
            report_json: with_suffix(&cfg.report_json, &tag),
            model: Some(with_suffix(&model_base, &tag)),
            ..cfg.clone()
        };
        let cfg_path = with_suffix(&run.report_json, "toml");
        std::fs::write(&cfg_path, run.to_toml()?).with_context(|| format!("cannot write {}", cfg_path.display()))?;
        let child = Command::new(&exe)
            .arg("train")
            .arg("--config")
            .arg(&cfg_path)
            .spawn()
            .with_context(|| format!("cannot start run {i}"))?;
        children.push(child);
        run_cfgs.push(run);
    }
    for (i, mut child) in children.into_iter().enumerate() {
        let status = child.wait()?;
        if !status.success() {
            bail!("run {i} failed with {status}");
        }
    }
    let models = run_cfgs
        .iter()
        .map(|r| Ok(load_model(r.model.as_ref().expect("set above"))?))
        .collect::<Result<Vec<_>>>()?;
    let avg = average_models(&models)?;
    if let Some(path) = &cfg.model {
        save_model(&avg, path)?;
    }
    let (train_set, test_set) = load_data(cfg)?;
    let eval = evaluate_batched(&avg, &test_set, cfg.score_batch)?;
    let report = build_report(cfg, &eval, cfg.max_iters, train_set.len(), 0.0)?;
    write_json(&report, &cfg.report_json)?;
    println!("averaged {runs} models");
    println!(
        "final eta: {:.2}% ({} of {} misclassified)",
        report.eta_percent,
        eval.num_samples - eval.correct(),
        eval.num_samples
    );
    Ok(report)
}

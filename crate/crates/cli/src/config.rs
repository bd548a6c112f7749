//! Experiment configuration: a TOML file whose every key can be overridden
//! by the command-line flag of the same name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use rkls::{KernelSpec, Method, Precision, PreprocessSpec, SolverConfig, DEFAULT_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Mnist,
    Cifar10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Polynomial,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,

    // synthetic blobs
    pub n_train: usize,
    pub n_test: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub separation: f64,
    pub data_seed: u64,

    // MNIST IDX files
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,

    // CIFAR-10 binary batches
    pub train_batches: Vec<PathBuf>,
    pub test_batch: Option<PathBuf>,

    /// Keep only the first `max_train` / `max_test` samples.
    pub max_train: Option<usize>,
    pub max_test: Option<usize>,

    pub preprocess: Vec<String>,
    pub kernel: KernelKind,
    pub degree: u32,
    pub sigma: f64,
    pub gamma: f64,

    pub method: String,
    pub block_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub stop_tol: f64,
    pub committee_size: Option<usize>,
    pub precision: Precision,
    pub eval_every: usize,
    pub score_batch: usize,

    pub trace_csv: PathBuf,
    pub report_json: PathBuf,
    pub model: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            dataset: DatasetKind::Synthetic,
            n_train: 200,
            n_test: 100,
            num_features: 10,
            num_classes: 2,
            separation: 5.0,
            data_seed: 0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            train_batches: Vec::new(),
            test_batch: None,
            max_train: None,
            max_test: None,
            preprocess: vec!["two_step_normalize".into()],
            kernel: KernelKind::Polynomial,
            degree: 4,
            sigma: 1.0,
            gamma: DEFAULT_GAMMA,
            method: solver.method.name().into(),
            block_size: solver.block_size,
            max_iters: solver.max_iters,
            seed: solver.seed,
            stop_tol: solver.stop_tol,
            committee_size: None,
            precision: Precision::F32,
            eval_every: 1,
            score_batch: 1024,
            trace_csv: "trace.csv".into(),
            report_json: "report.json".into(),
            model: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let spec = match self.kernel {
            KernelKind::Polynomial => KernelSpec::Polynomial { degree: self.degree },
            KernelKind::Gaussian => KernelSpec::Gaussian { sigma: self.sigma },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn preprocess_spec(&self) -> Result<PreprocessSpec> {
        Ok(self.preprocess.join(",").parse()?)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            method: self.method.parse::<Method>()?,
            block_size: self.block_size,
            max_iters: self.max_iters,
            seed: self.seed,
            stop_tol: self.stop_tol,
            committee_size: self.committee_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks parameters and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            bail!("eval_every must be at least 1");
        }
        if self.score_batch == 0 {
            bail!("score_batch must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            bail!("gamma must be positive, got {}", self.gamma);
        }
        self.kernel_spec()?;
        self.preprocess_spec()?;
        self.solver()?;
        for path in self.input_files()? {
            if !path.is_file() {
                bail!("dataset file not found: {}", path.display());
            }
        }
        Ok(())
    }

    fn input_files(&self) -> Result<Vec<&Path>> {
        fn need<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
            p.as_deref().with_context(|| format!("`{key}` is required for this dataset"))
        }
        Ok(match self.dataset {
            DatasetKind::Synthetic => Vec::new(),
            DatasetKind::Mnist => vec![
                need(&self.train_images, "train_images")?,
                need(&self.train_labels, "train_labels")?,
                need(&self.test_images, "test_images")?,
                need(&self.test_labels, "test_labels")?,
            ],
            DatasetKind::Cifar10 => {
                if self.train_batches.is_empty() {
                    bail!("`train_batches` is required for this dataset");
                }
                let mut files: Vec<&Path> = self.train_batches.iter().map(PathBuf::as_path).collect();
                files.push(need(&self.test_batch, "test_batch")?);
                files
            }
        })
    }
}

/// Command-line overrides, one per configuration key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, value_enum)]
    dataset: Option<DatasetKind>,
    #[arg(long, alias = "n_train")]
    n_train: Option<usize>,
    #[arg(long, alias = "n_test")]
    n_test: Option<usize>,
    #[arg(long, alias = "num_features")]
    num_features: Option<usize>,
    #[arg(long, alias = "num_classes")]
    num_classes: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long, alias = "data_seed")]
    data_seed: Option<u64>,
    #[arg(long, alias = "train_images")]
    train_images: Option<PathBuf>,
    #[arg(long, alias = "train_labels")]
    train_labels: Option<PathBuf>,
    #[arg(long, alias = "test_images")]
    test_images: Option<PathBuf>,
    #[arg(long, alias = "test_labels")]
    test_labels: Option<PathBuf>,
    /// Comma-separated batch files.
    #[arg(long, alias = "train_batches", value_delimiter = ',')]
    train_batches: Option<Vec<PathBuf>>,
    #[arg(long, alias = "test_batch")]
    test_batch: Option<PathBuf>,
    #[arg(long, alias = "max_train")]
    max_train: Option<usize>,
    #[arg(long, alias = "max_test")]
    max_test: Option<usize>,
    /// Comma-separated steps, e.g. `gaussian_filter::32,spectral_concat`; `none` for raw pixels.
    #[arg(long)]
    preprocess: Option<String>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// direct, nystrom, kaczmarz, mp or hybrid.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, alias = "block_size")]
    block_size: Option<usize>,
    #[arg(long, alias = "max_iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, alias = "stop_tol")]
    stop_tol: Option<f64>,
    #[arg(long, alias = "committee_size")]
    committee_size: Option<usize>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long, alias = "eval_every")]
    eval_every: Option<usize>,
    #[arg(long, alias = "score_batch")]
    score_batch: Option<usize>,
    #[arg(long, alias = "trace_csv")]
    trace_csv: Option<PathBuf>,
    #[arg(long, alias = "report_json")]
    report_json: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    cfg.$field = self.$field;
                }
            )*};
        }
        set!(
            dataset, n_train, n_test, num_features, num_classes, separation, data_seed, train_batches, kernel,
            degree, sigma, gamma, method, block_size, max_iters, seed, stop_tol, precision, eval_every,
            score_batch, trace_csv, report_json
        );
        set_opt!(
            train_images,
            train_labels,
            test_images,
            test_labels,
            test_batch,
            max_train,
            max_test,
            committee_size,
            model
        );
        if let Some(p) = self.preprocess {
            cfg.preprocess = if p.trim().is_empty() || p.trim() == "none" {
                Vec::new()
            } else {
                p.split(',').map(|s| s.trim().to_string()).collect()
            };
        }
    }
}

//! Training orchestration, scoring and evaluation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dataset::{one_hot_targets, LabeledDataset, SampleMatrix};
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelSpec, ThetaOperator};
use crate::preprocess::PreprocessSpec;
use crate::scalar::{Precision, Real};
use crate::solvers::{solve, ConvergenceTrace, EvalHook, SolverConfig};

/// Test rows scored per kernel block by default.
pub const DEFAULT_SCORE_BATCH: usize = 1024;

/// A trained classifier: the kernel expansion over the (preprocessed)
/// training samples plus per-class biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kernel: KernelSpec,
    gamma: f64,
    preprocess: PreprocessSpec,
    input_dim: usize,
    train_samples: SampleMatrix<f64>,
    weights: DMatrix<f64>,
}

impl Model {
    /// `train_samples` are the preprocessed training inputs; `input_dim` is
    /// the raw feature count the model accepts.
    pub fn new(
        kernel: KernelSpec,
        gamma: f64,
        preprocess: PreprocessSpec,
        input_dim: usize,
        train_samples: SampleMatrix<f64>,
        weights: DMatrix<f64>,
    ) -> Result<Self> {
        kernel.validate()?;
        if weights.nrows() != train_samples.nrows() + 1 || weights.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "weights are {}x{} for {} training samples",
                weights.nrows(),
                weights.ncols(),
                train_samples.nrows()
            )));
        }
        if preprocess.output_len(input_dim) != train_samples.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "preprocessing maps {input_dim} features to {}, samples have {}",
                preprocess.output_len(input_dim),
                train_samples.ncols()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model weights"));
        }
        Ok(Self {
            kernel,
            gamma,
            preprocess,
            input_dim,
            train_samples,
            weights,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn preprocess(&self) -> &PreprocessSpec {
        &self.preprocess
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn train_samples(&self) -> &SampleMatrix<f64> {
        &self.train_samples
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    pub fn num_train(&self) -> usize {
        self.train_samples.nrows()
    }

    pub fn biases(&self) -> Vec<f64> {
        self.weights.row(0).iter().copied().collect()
    }
}

/// Knobs for [`train`] beyond the solver configuration.
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions<'a> {
    pub precision: Precision,
    /// Held-out data whose error rate is recorded in the trace.
    pub validation: Option<&'a LabeledDataset>,
    /// Iterations between validation measurements.
    pub eval_every: usize,
}

impl Default for TrainOptions<'_> {
    fn default() -> Self {
        Self {
            precision: Precision::F64,
            validation: None,
            eval_every: 1,
        }
    }
}

/// Precomputed test kernel block for cheap per-iteration error measurement.
#[derive(Debug, Clone)]
pub struct TestScorer<T: Real = f64> {
    psi: DMatrix<T>,
    labels: Vec<usize>,
}

impl<T: Real> TestScorer<T> {
    /// `train` and `test` must already be preprocessed.
    pub fn new(kernel: &KernelSpec, train: &SampleMatrix<T>, test: &SampleMatrix<T>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != test.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} test samples",
                labels.len(),
                test.nrows()
            )));
        }
        if labels.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        Ok(Self {
            psi: kernel_matrix(kernel, test, train)?,
            labels,
        })
    }

    pub fn scores(&self, w: &DMatrix<T>) -> DMatrix<T> {
        let n = self.psi.ncols();
        let mut h = &self.psi * w.rows(1, n);
        let bias = w.row(0);
        for mut row in h.row_iter_mut() {
            row += &bias;
        }
        h
    }

    pub fn error_rate(&self, w: &DMatrix<T>) -> f64 {
        let pred = argmax_rows(&self.scores(w));
        let wrong = pred.iter().zip(&self.labels).filter(|(p, l)| p != l).count();
        wrong as f64 / self.labels.len() as f64
    }
}

fn train_with<T: Real>(
    samples: &SampleMatrix<f64>,
    data: &LabeledDataset,
    kernel: KernelSpec,
    gamma: f64,
    preprocess: &PreprocessSpec,
    cfg: &SolverConfig,
    opts: &TrainOptions<'_>,
) -> Result<(DMatrix<f64>, ConvergenceTrace)> {
    let op = ThetaOperator::<T>::from_f64_samples(samples, kernel, gamma)?;
    let z = one_hot_targets(data.labels(), data.num_classes())?.cast::<T>();
    let scorer = match opts.validation {
        Some(v) => {
            if v.num_features() != data.num_features() {
                return Err(Error::ShapeMismatch(format!(
                    "validation set has {} features, training set {}",
                    v.num_features(),
                    data.num_features()
                )));
            }
            let test = preprocess.apply(v.samples())?.cast::<T>();
            Some(TestScorer::new(&kernel, op.samples(), &test, v.labels().to_vec())?)
        }
        None => None,
    };
    let every = opts.eval_every.max(1);
    let (w, trace) = match &scorer {
        Some(sc) => {
            let mut hook = |t: usize, w: &DMatrix<T>| t.is_multiple_of(every).then(|| sc.error_rate(w));
            let hook: &mut EvalHook<'_, T> = &mut hook;
            solve(&op, &z, cfg, Some(hook))?
        }
        None => solve(&op, &z, cfg, None)?,
    };
    Ok((w.map(Into::into), trace))
}

/// Preprocesses `data`, solves the LS-SVM system with the configured solver
/// and packages the result.
pub fn train(
    data: &LabeledDataset,
    kernel: KernelSpec,
    gamma: f64,
    preprocess: &PreprocessSpec,
    cfg: &SolverConfig,
    opts: &TrainOptions<'_>,
) -> Result<(Model, ConvergenceTrace)> {
    let samples = preprocess.apply(data.samples())?;
    let (w, trace) = match opts.precision {
        Precision::F32 => train_with::<f32>(&samples, data, kernel, gamma, preprocess, cfg, opts)?,
        Precision::F64 => train_with::<f64>(&samples, data, kernel, gamma, preprocess, cfg, opts)?,
    };
    let model = Model::new(kernel, gamma, preprocess.clone(), data.num_features(), samples, w)?;
    Ok((model, trace))
}

/// Linear class scores `h_j(x) = sum_n K(x, x_n) a_nj + b_j`.
pub fn decision_scores(model: &Model, x: &SampleMatrix<f64>) -> Result<DMatrix<f64>> {
    decision_scores_batched(model, x, DEFAULT_SCORE_BATCH)
}

/// [`decision_scores`] computing at most `batch` test rows of the kernel
/// block at a time.
pub fn decision_scores_batched(model: &Model, x: &SampleMatrix<f64>, batch: usize) -> Result<DMatrix<f64>> {
    if x.ncols() != model.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} features, got {}",
            model.input_dim,
            x.ncols()
        )));
    }
    let batch = batch.max(1);
    let k = model.num_classes();
    let n = model.num_train();
    let dual = model.weights.rows(1, n);
    let bias = model.weights.row(0);
    let mut out = DMatrix::zeros(x.nrows(), k);
    let idx: Vec<usize> = (0..x.nrows()).collect();
    for chunk in idx.chunks(batch) {
        let part = model.preprocess.apply(&x.select_rows(chunk)?)?;
        let psi = kernel_matrix(&model.kernel, &part, &model.train_samples)?;
        let h = psi * dual;
        for (r, &i) in chunk.iter().enumerate() {
            let mut dst = out.row_mut(i);
            dst.copy_from(&h.row(r));
            dst += &bias;
        }
    }
    Ok(out)
}

/// Index of the largest entry of each row; ties go to the lowest index.
pub fn argmax_rows<T: Real>(scores: &DMatrix<T>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn predict(model: &Model, x: &SampleMatrix<f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(&decision_scores(model, x)?))
}

/// Max-shifted softmax over one score row.
pub fn softmax_probabilities(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty score row".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("class scores"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Model whose weights and biases are the element-wise mean of the members'.
pub fn average_models(models: &[Model]) -> Result<Model> {
    let (first, rest) = models
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("no models to average".into()))?;
    let mut sum = first.weights.clone();
    for m in rest {
        if m.kernel != first.kernel {
            return Err(Error::IncompatibleModels("kernels differ"));
        }
        if m.gamma != first.gamma {
            return Err(Error::IncompatibleModels("regularization differs"));
        }
        if m.preprocess != first.preprocess || m.input_dim != first.input_dim {
            return Err(Error::IncompatibleModels("preprocessing differs"));
        }
        if m.weights.shape() != first.weights.shape() {
            return Err(Error::IncompatibleModels("weight shapes differ"));
        }
        if m.train_samples != first.train_samples {
            return Err(Error::IncompatibleModels("training samples differ"));
        }
        sum += &m.weights;
    }
    let mut out = first.clone();
    out.weights = sum / models.len() as f64;
    Ok(out)
}

/// Error rate and confusion matrix on a labeled test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    /// Fraction of misclassified samples.
    pub error_rate: f64,
    pub num_samples: usize,
    /// `counts[true][predicted]`.
    pub confusion_counts: Vec<Vec<usize>>,
    /// Rows of `confusion_counts` as percentages of the true-class size;
    /// all zero for classes absent from the test set.
    pub confusion_percent: Vec<Vec<f64>>,
    pub misclassified: Vec<usize>,
}

impl EvaluationReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut counts = vec![vec![0usize; num_classes]; num_classes];
        let mut misclassified = Vec::new();
        for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
            for label in [t, p] {
                if label >= num_classes {
                    return Err(Error::LabelOutOfRange { label, num_classes });
                }
            }
            counts[t][p] += 1;
            if t != p {
                misclassified.push(i);
            }
        }
        let percent = counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
                    .collect()
            })
            .collect();
        Ok(Self {
            error_rate: misclassified.len() as f64 / truth.len() as f64,
            num_samples: truth.len(),
            confusion_counts: counts,
            confusion_percent: percent,
            misclassified,
        })
    }

    pub fn correct(&self) -> usize {
        (0..self.confusion_counts.len()).map(|k| self.confusion_counts[k][k]).sum()
    }
}

pub fn evaluate(model: &Model, data: &LabeledDataset) -> Result<EvaluationReport> {
    if data.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let pred = predict(model, data.samples())?;
    EvaluationReport::from_predictions(data.labels(), &pred, model.num_classes())
}

//! Multi-class least-squares SVM training with randomized block solvers.
//!
//! The dual LS-SVM problem for `K` classes is the bordered linear system
//! `Theta W = Z`, with `Theta` the `(N+1) x (N+1)` ridge-regularized kernel
//! matrix and `Z` the zero-bordered one-hot targets. `Theta` is never
//! formed: [`ThetaOperator`] computes the blocks each solver asks for.
//!
//! Four randomized solvers are provided next to a direct LU baseline:
//! a Nystrom committee, block Kaczmarz, weak block matching pursuit and a
//! Kaczmarz/MP hybrid. See [`solvers`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod persist;
pub mod preprocess;
pub mod sampler;
pub mod scalar;
pub mod solvers;
pub mod system;

pub use classifier::{
    average_models, decision_scores, evaluate, predict, softmax_probabilities, train, EvaluationReport, Model,
    TestScorer, TrainOptions,
};
pub use dataset::{one_hot_targets, BlobSpec, LabeledDataset, SampleMatrix, TargetMatrix};
pub use error::{Error, Result};
pub use kernel::{kernel_eval, KernelSpec, ThetaOperator, DEFAULT_GAMMA};
pub use linalg::{pseudo_inverse, solve_direct, DenseMatrix};
pub use preprocess::{PreprocessSpec, PreprocessStep};
pub use sampler::BlockSampler;
pub use scalar::{Precision, Real};
pub use solvers::{ConvergenceTrace, Method, SolverConfig, TraceRecord};
pub use system::{DenseSystem, LinearSystem};

/// Weights `W` of the bordered system: row 0 holds the class biases, rows
/// `1..=N` the dual coefficients of the training samples.
pub type WeightMatrix<T = f64> = nalgebra::DMatrix<T>;

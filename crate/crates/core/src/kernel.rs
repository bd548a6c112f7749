//! Kernel functions and the implicit bordered LS-SVM system matrix.
//!
//! The `(N+1) x (N+1)` matrix
//!
//! ```text
//!     | 0   1 ... 1          |
//!     | 1                    |
//!     | :   K(x_i, x_n) + d_in / gamma |
//!     | 1                    |
//! ```
//!
//! is never stored. [`ThetaOperator`] produces any requested block on the
//! fly from the training samples.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::system::LinearSystem;

/// Default ridge regularization.
pub const DEFAULT_GAMMA: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `<x, y>^degree`
    Polynomial { degree: u32 },
    /// `exp(-||x - y||^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree: 0 } => {
                Err(Error::InvalidArgument("polynomial degree must be at least 1".into()))
            }
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::InvalidArgument(format!("Gaussian width must be positive, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval_unchecked<T: Real>(&self, x: &[T], y: &[T]) -> T {
        match *self {
            KernelSpec::Polynomial { degree } => dot(x, y).powi(degree as i32),
            KernelSpec::Gaussian { sigma } => {
                let scale = T::cast(-0.5 / (sigma * sigma));
                (sq_dist(x, y) * scale).exp()
            }
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Polynomial { degree: 4 }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Polynomial { degree } => write!(f, "polynomial(degree={degree})"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
        }
    }
}

/// Inner product with a fixed summation order.
///
/// The order depends only on the length, and `a[k] * b[k]` commutes, so
/// `dot(a, b)` and `dot(b, a)` are bit-identical.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .fold(T::zero(), |s, (&x, &y)| s + x * y);
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| {
        let d = x - y;
        s + d * d
    });
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

pub fn kernel_eval<T: Real>(x: &[T], y: &[T], spec: &KernelSpec) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.eval_unchecked(x, y))
}

const COLS_PER_TASK: usize = 16;

/// Fills a column-major `nrows x ncols` matrix with `f(r, c)`, parallel over
/// column groups. Every entry is computed independently, so the result does
/// not depend on the thread count.
fn fill_block<T, F>(nrows: usize, ncols: usize, f: F) -> DMatrix<T>
where
    T: Real,
    F: Fn(usize, usize) -> T + Sync,
{
    let mut data = vec![T::zero(); nrows * ncols];
    if nrows > 0 {
        data.par_chunks_mut(nrows * COLS_PER_TASK)
            .enumerate()
            .for_each(|(task, chunk)| {
                let c0 = task * COLS_PER_TASK;
                let width = chunk.len() / nrows;
                for r in 0..nrows {
                    for k in 0..width {
                        chunk[k * nrows + r] = f(r, c0 + k);
                    }
                }
            });
    }
    DMatrix::from_vec(nrows, ncols, data)
}

/// Kernel matrix `K(a_i, b_j)` between the rows of two sample matrices.
pub fn kernel_matrix<T: Real>(
    spec: &KernelSpec,
    a: &SampleMatrix<T>,
    b: &SampleMatrix<T>,
) -> Result<DMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "feature dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(fill_block(a.nrows(), b.nrows(), |r, c| {
        spec.eval_unchecked(a.row(r), b.row(c))
    }))
}

/// Implicit bordered, ridge-regularized kernel system matrix.
#[derive(Debug, Clone)]
pub struct ThetaOperator<T: Real = f64> {
    samples: SampleMatrix<T>,
    kernel: KernelSpec,
    gamma: f64,
    inv_gamma: T,
}

impl<T: Real> ThetaOperator<T> {
    pub fn new(samples: SampleMatrix<T>, kernel: KernelSpec, gamma: f64) -> Result<Self> {
        kernel.validate()?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be positive, got {gamma}"
            )));
        }
        if samples.nrows() == 0 {
            return Err(Error::InvalidArgument("no training samples".into()));
        }
        Ok(Self {
            samples,
            kernel,
            gamma,
            inv_gamma: T::cast(1.0 / gamma),
        })
    }

    /// Converts `f64` samples to the operator's element type.
    pub fn from_f64_samples(samples: &SampleMatrix<f64>, kernel: KernelSpec, gamma: f64) -> Result<Self> {
        Self::new(samples.cast(), kernel, gamma)
    }

    /// Number of training samples `N`; the operator is `(N+1) x (N+1)`.
    pub fn num_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows() + 1
    }

    pub fn samples(&self) -> &SampleMatrix<T> {
        &self.samples
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn entry(&self, i: usize, n: usize) -> T {
        match (i, n) {
            (0, 0) => T::zero(),
            (0, _) | (_, 0) => T::one(),
            _ => {
                let k = self
                    .kernel
                    .eval_unchecked(self.samples.row(i - 1), self.samples.row(n - 1));
                if i == n {
                    k + self.inv_gamma
                } else {
                    k
                }
            }
        }
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        let dim = self.dim();
        match idx.iter().find(|&&i| i >= dim) {
            Some(&index) => Err(Error::IndexOutOfRange { index, dim }),
            None => Ok(()),
        }
    }

    /// The `|rows| x |cols|` block of the system matrix.
    pub fn theta_block(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<T>> {
        self.check_indices(rows)?;
        self.check_indices(cols)?;
        Ok(fill_block(rows.len(), cols.len(), |r, c| {
            self.entry(rows[r], cols[c])
        }))
    }

    /// Kernel values between test samples and the training samples, without
    /// border or ridge terms.
    pub fn test_kernel_block(&self, x_test: &SampleMatrix<T>) -> Result<DMatrix<T>> {
        kernel_matrix(&self.kernel, x_test, &self.samples)
    }
}

impl<T: Real> LinearSystem<T> for ThetaOperator<T> {
    fn nrows(&self) -> usize {
        self.dim()
    }

    fn ncols(&self) -> usize {
        self.dim()
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<T>> {
        self.theta_block(rows, cols)
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

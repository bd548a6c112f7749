//! Randomized block solvers for `Theta W = Z`.
//!
//! * [`solve_nystrom`]: committee of low-rank solutions built from random
//!   column subsets, summed.
//! * [`kaczmarz_step`]: projection onto the solution set of a standardized
//!   row block.
//! * [`mp_step`]: least-squares fit of the residual over a random column
//!   block (weak matching pursuit).
//! * [`hybrid_step`]: a Kaczmarz step followed by an MP step on the same
//!   index block.
//!
//! [`run_iterative`] drives the three iterative methods and [`solve`]
//! dispatches on [`SolverConfig::method`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, pinv, solve_direct};
use crate::sampler::BlockSampler;
use crate::scalar::Real;
use crate::system::{residual, standardized_row_block, LinearSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Nystrom,
    Kaczmarz,
    MatchingPursuit,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Direct,
        Method::Nystrom,
        Method::Kaczmarz,
        Method::MatchingPursuit,
        Method::Hybrid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Nystrom => "nystrom",
            Method::Kaczmarz => "kaczmarz",
            Method::MatchingPursuit => "mp",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "nystrom" => Ok(Method::Nystrom),
            "kaczmarz" => Ok(Method::Kaczmarz),
            "mp" | "matching_pursuit" => Ok(Method::MatchingPursuit),
            "hybrid" | "kaczmarz_mp" => Ok(Method::Hybrid),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Indices per random block.
    pub block_size: usize,
    /// Iteration cap for the iterative methods.
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once an iteration changes `W` by less than this (Frobenius norm).
    pub stop_tol: f64,
    /// Committee size for the Nystrom method; one epoch of blocks when unset.
    pub committee_size: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::MatchingPursuit,
            block_size: 2000,
            max_iters: 100,
            seed: 0,
            stop_tol: 0.0,
            committee_size: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::InvalidArgument("block_size must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.committee_size == Some(0) {
            return Err(Error::InvalidArgument("committee_size must be at least 1".into()));
        }
        if self.stop_tol.is_nan() || self.stop_tol < 0.0 {
            return Err(Error::InvalidArgument("stop_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// `||R(t)||_F` for MP and the hybrid; `||W(t) - W(t-1)||_F` for
    /// Kaczmarz and the Nystrom committee; `||Z - Theta W||_F` for the
    /// direct solve.
    pub residual: f64,
    /// Test error rate, when an evaluator was supplied and reported one.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; `t` must exceed the previous one.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(Error::InvalidArgument(format!(
                    "trace iteration {} does not follow {}",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Last recorded test error.
    pub fn last_eta(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.eta)
    }
}

/// Per-iteration evaluator: receives the iteration number and the current
/// weights, returns a test error when it chooses to measure one.
pub type EvalHook<'a, T> = dyn FnMut(usize, &DMatrix<T>) -> Option<f64> + 'a;

fn check_rhs<T: Real, S: LinearSystem<T> + ?Sized>(sys: &S, z: &DMatrix<T>) -> Result<()> {
    if z.nrows() != sys.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} rows, system has {}",
            z.nrows(),
            sys.nrows()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    Ok(())
}

fn check_weights<T: Real>(w: &DMatrix<T>, rows: usize, cols: usize) -> Result<()> {
    if w.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "weights are {}x{}, expected {rows}x{cols}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

fn ensure_finite<T: Real>(m: &DMatrix<T>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn require_square<T: Real, S: LinearSystem<T> + ?Sized>(sys: &S, what: &str) -> Result<()> {
    if sys.nrows() != sys.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{what} needs a square system, got {}x{}",
            sys.nrows(),
            sys.ncols()
        )));
    }
    Ok(())
}

/// One block Kaczmarz projection over the standardized rows `rows`:
/// `W += pinv(A_s) (Z_s - A_s W)`. Returns `||delta W||_F`.
pub fn kaczmarz_step<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    w: &mut DMatrix<T>,
    z: &DMatrix<T>,
    rows: &[usize],
) -> Result<f64> {
    check_weights(w, sys.ncols(), z.ncols())?;
    let (a, b) = standardized_row_block(sys, rows, z)?;
    let delta = pinv(&a)? * (b - &a * &*w);
    ensure_finite(&delta, "Kaczmarz update")?;
    *w += &delta;
    Ok(frobenius(&delta))
}

/// One weak matching-pursuit step over the columns `cols`:
/// `Q = pinv(A_s) R`, `W_s += Q`, `R -= A_s Q`. Returns `||R||_F` afterwards.
pub fn mp_step<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    w: &mut DMatrix<T>,
    r: &mut DMatrix<T>,
    cols: &[usize],
) -> Result<f64> {
    check_weights(w, sys.ncols(), r.ncols())?;
    check_weights(r, sys.nrows(), w.ncols())?;
    let block = sys.col_block(cols)?;
    let q = pinv(&block)? * &*r;
    ensure_finite(&q, "matching pursuit update")?;
    for (k, &j) in cols.iter().enumerate() {
        let mut dst = w.row_mut(j);
        dst += q.row(k);
    }
    *r -= block * q;
    Ok(frobenius(r))
}

/// Kaczmarz step on rows `s`, exact residual refresh, then an MP step on
/// columns `s`. Returns `||R||_F` afterwards.
pub fn hybrid_step<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    w: &mut DMatrix<T>,
    r: &mut DMatrix<T>,
    z: &DMatrix<T>,
    s: &[usize],
) -> Result<f64> {
    require_square(sys, "the hybrid method")?;
    kaczmarz_step(sys, w, z, s)?;
    *r = residual(sys, w, z)?;
    mp_step(sys, w, r, s)
}

/// Randomized Nystrom committee: sums
/// `pinv(A_(J,N)) A_(J,J) pinv(A_(N,J)) Z` over `committee_size` random
/// column blocks.
pub fn solve_nystrom<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    z: &DMatrix<T>,
    cfg: &SolverConfig,
    mut hook: Option<&mut EvalHook<'_, T>>,
) -> Result<(DMatrix<T>, ConvergenceTrace)> {
    cfg.validate()?;
    require_square(sys, "the Nystrom method")?;
    check_rhs(sys, z)?;
    let n = sys.nrows();
    let mut sampler = BlockSampler::new(n, cfg.block_size, cfg.seed)?;
    let committee = cfg.committee_size.unwrap_or_else(|| n.div_ceil(cfg.block_size));
    let mut w = DMatrix::zeros(n, z.ncols());
    let mut trace = ConvergenceTrace::new();
    for t in 1..=committee {
        let s = sampler.next_block().to_vec();
        let cols = sys.col_block(&s)?;
        let right = pinv(&cols)?;
        let inner = sys.block(&s, &s)?;
        let left = if sys.is_symmetric() {
            right.transpose()
        } else {
            pinv(&sys.row_block(&s)?)?
        };
        let member = left * (inner * (&right * z));
        ensure_finite(&member, "Nystrom committee member")?;
        w += &member;
        let eta = hook.as_mut().and_then(|h| h(t, &w));
        trace.push(TraceRecord {
            t,
            residual: frobenius(&member),
            eta,
        })?;
    }
    Ok((w, trace))
}

/// Iterates Kaczmarz, MP or hybrid steps from `W = 0` (and `R = Z`) until
/// `max_iters` or until an iteration moves `W` by less than `stop_tol`.
pub fn run_iterative<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    z: &DMatrix<T>,
    cfg: &SolverConfig,
    mut hook: Option<&mut EvalHook<'_, T>>,
) -> Result<(DMatrix<T>, ConvergenceTrace)> {
    cfg.validate()?;
    check_rhs(sys, z)?;
    let pool = match cfg.method {
        Method::Kaczmarz => sys.nrows(),
        Method::MatchingPursuit => sys.ncols(),
        Method::Hybrid => {
            require_square(sys, "the hybrid method")?;
            sys.nrows()
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "{other} is not an iterative method"
            )))
        }
    };
    let mut sampler = BlockSampler::new(pool, cfg.block_size, cfg.seed)?;
    let mut w = DMatrix::zeros(sys.ncols(), z.ncols());
    let mut r = z.clone();
    let mut trace = ConvergenceTrace::new();
    for t in 1..=cfg.max_iters {
        let s = sampler.next_block().to_vec();
        let (update, metric) = match cfg.method {
            Method::Kaczmarz => {
                let d = kaczmarz_step(sys, &mut w, z, &s)?;
                (d, d)
            }
            Method::MatchingPursuit => {
                let before = w.clone();
                let res = mp_step(sys, &mut w, &mut r, &s)?;
                (frobenius(&(&w - before)), res)
            }
            _ => {
                let before = w.clone();
                let res = hybrid_step(sys, &mut w, &mut r, z, &s)?;
                (frobenius(&(&w - before)), res)
            }
        };
        let eta = hook.as_mut().and_then(|h| h(t, &w));
        trace.push(TraceRecord {
            t,
            residual: metric,
            eta,
        })?;
        if update < cfg.stop_tol {
            break;
        }
    }
    Ok((w, trace))
}

/// Solves with the configured method.
pub fn solve<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    z: &DMatrix<T>,
    cfg: &SolverConfig,
    mut hook: Option<&mut EvalHook<'_, T>>,
) -> Result<(DMatrix<T>, ConvergenceTrace)> {
    match cfg.method {
        Method::Direct => {
            check_rhs(sys, z)?;
            let theta = sys.materialize()?;
            let w = solve_direct(&theta, z)?;
            let res = frobenius(&(z - &theta * &w));
            let mut trace = ConvergenceTrace::new();
            let eta = hook.as_mut().and_then(|h| h(1, &w));
            trace.push(TraceRecord {
                t: 1,
                residual: res,
                eta,
            })?;
            Ok((w, trace))
        }
        Method::Nystrom => solve_nystrom(sys, z, cfg, hook),
        _ => run_iterative(sys, z, cfg, hook),
    }
}

//! Per-sample preprocessing: two-step normalization, spectral concatenation
//! and the centered Gaussian filter.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleMatrix;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Subtracts the mean and scales to unit norm, in place.
fn center_and_scale(x: &mut [f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::ZeroNorm);
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mu = mean(x);
    x.iter_mut().for_each(|v| *v -= mu);
    let n = norm(x);
    // rounding residue of centering a constant vector
    if !(n > x.len() as f64 * f64::EPSILON * scale) {
        return Err(Error::ZeroNorm);
    }
    x.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

/// Mean-centers `x` and scales it to unit Euclidean norm.
pub fn two_step_normalize(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    center_and_scale(&mut out)?;
    Ok(out)
}

/// Magnitudes of the first `ceil(n/2)` DFT bins of a real signal.
pub fn dft_magnitude_half(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "DFT input needs at least 2 samples, got {}",
            x.len()
        )));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&re| Complex::new(re, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(x.len()));
    fft.process(&mut buf);
    let half = x.len().div_ceil(2);
    Ok(buf[..half].iter().map(|c| c.norm()).collect())
}

/// Concatenates a centered signal with the centered square root of its
/// half-spectrum magnitudes; both parts unit-normalized and the result
/// scaled by `1/sqrt(2)`.
pub fn spectral_concat(x: &[f64]) -> Result<Vec<f64>> {
    let mut xi = x.to_vec();
    let mu = mean(&xi);
    xi.iter_mut().for_each(|v| *v -= mu);
    let mut phi: Vec<f64> = dft_magnitude_half(&xi)?.into_iter().map(f64::sqrt).collect();
    center_and_scale(&mut xi)?;
    center_and_scale(&mut phi)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(xi.into_iter().chain(phi).map(|v| v * s).collect())
}

/// Multiplies every `side x side` channel plane by
/// `exp(-c[(i - L/2)^2 + (j - L/2)^2])` with 1-based pixel indices `i, j`.
pub fn gaussian_center_filter(x: &[f64], side: usize, c: f64) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("filter constant must be positive, got {c}")));
    }
    let plane = side * side;
    if plane == 0 || (x.len() != plane && x.len() != 3 * plane) {
        return Err(Error::ShapeMismatch(format!(
            "length {} is not an image of side {side} with 1 or 3 channels",
            x.len()
        )));
    }
    let center = side as f64 / 2.0;
    // the filter is symmetric in (i, j), so row- and column-major planes agree
    let filter: Vec<f64> = (1..=side)
        .flat_map(|j| {
            (1..=side).map(move |i| {
                let (di, dj) = (i as f64 - center, j as f64 - center);
                (-c * (di * di + dj * dj)).exp()
            })
        })
        .collect();
    Ok(x
        .chunks_exact(plane)
        .flat_map(|ch| ch.iter().zip(&filter).map(|(v, g)| v * g))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PreprocessStep {
    GaussianFilter { c: f64, side: usize },
    TwoStepNormalize,
    SpectralConcat,
}

impl PreprocessStep {
    /// Gaussian filter with the `c = 4 / L^2` constant.
    pub fn default_gaussian(side: usize) -> Self {
        PreprocessStep::GaussianFilter {
            c: 4.0 / (side * side) as f64,
            side,
        }
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            PreprocessStep::GaussianFilter { c, side } => gaussian_center_filter(x, side, c),
            PreprocessStep::TwoStepNormalize => two_step_normalize(x),
            PreprocessStep::SpectralConcat => spectral_concat(x),
        }
    }

    fn output_len(&self, n: usize) -> usize {
        match self {
            PreprocessStep::SpectralConcat => n + n.div_ceil(2),
            _ => n,
        }
    }
}

impl fmt::Display for PreprocessStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessStep::GaussianFilter { c, side } => write!(f, "gaussian_filter:{c}:{side}"),
            PreprocessStep::TwoStepNormalize => f.write_str("two_step_normalize"),
            PreprocessStep::SpectralConcat => f.write_str("spectral_concat"),
        }
    }
}

impl FromStr for PreprocessStep {
    type Err = Error;

    /// Accepts `two_step_normalize`, `spectral_concat`,
    /// `gaussian_filter:<c>:<side>` and `gaussian_filter::<side>` (default `c`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized preprocessing step `{s}`"));
        let mut parts = s.trim().split(':');
        match parts.next().ok_or_else(bad)? {
            "two_step_normalize" | "normalize" => Ok(PreprocessStep::TwoStepNormalize),
            "spectral_concat" | "fft" => Ok(PreprocessStep::SpectralConcat),
            "gaussian_filter" | "gaussian" => {
                let c = parts.next().ok_or_else(bad)?;
                let side: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if c.is_empty() {
                    Ok(Self::default_gaussian(side))
                } else {
                    Ok(PreprocessStep::GaussianFilter {
                        c: c.parse().map_err(|_| bad())?,
                        side,
                    })
                }
            }
            _ => Err(bad()),
        }
    }
}

/// Ordered chain of preprocessing steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreprocessSpec {
    steps: Vec<PreprocessStep>,
}

impl PreprocessSpec {
    pub fn new(steps: Vec<PreprocessStep>) -> Result<Self> {
        let spectral = steps
            .iter()
            .filter(|s| matches!(s, PreprocessStep::SpectralConcat))
            .count();
        if spectral > 1 || (spectral == 1 && steps.last() != Some(&PreprocessStep::SpectralConcat)) {
            return Err(Error::InvalidArgument(
                "spectral_concat may appear once, as the last step".into(),
            ));
        }
        for s in &steps {
            if let PreprocessStep::GaussianFilter { c, side } = *s {
                if !(c > 0.0) || side == 0 {
                    return Err(Error::InvalidArgument(format!("invalid filter step {s}")));
                }
            }
        }
        Ok(Self { steps })
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> &[PreprocessStep] {
        &self.steps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        self.steps.iter().fold(input_len, |n, s| s.output_len(n))
    }

    pub fn apply_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cur = x.to_vec();
        for step in &self.steps {
            cur = step.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Applies the chain to every row, in parallel across samples.
    pub fn apply(&self, samples: &SampleMatrix<f64>) -> Result<SampleMatrix<f64>> {
        if self.steps.is_empty() {
            return Ok(samples.clone());
        }
        let out_len = self.output_len(samples.ncols());
        let rows: Vec<Vec<f64>> = (0..samples.nrows())
            .into_par_iter()
            .map(|i| self.apply_one(samples.row(i)))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(rows.len() * out_len);
        rows.iter().for_each(|r| data.extend_from_slice(r));
        SampleMatrix::from_vec(rows.len(), out_len, data)
    }
}

impl fmt::Display for PreprocessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for PreprocessSpec {
    type Err = Error;

    /// Comma-separated steps; an empty string or `none` is the identity chain.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::identity());
        }
        Self::new(s.split(',').map(str::parse).collect::<Result<_>>()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_dft_half(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n.div_ceil(2))
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (m, v) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * m) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.0..255.0)).collect()
    }

    #[test]
    fn normalize_examples() {
        let out = two_step_normalize(&[0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(out[0], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(matches!(two_step_normalize(&[1.0, 1.0, 1.0]), Err(Error::ZeroNorm)));
        assert!(matches!(two_step_normalize(&[0.1; 7]), Err(Error::ZeroNorm)));

        let out = two_step_normalize(&random_vec(784, 1)).unwrap();
        assert!(mean(&out).abs() < 1e-6);
        assert!((norm(&out) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dft_examples() {
        assert_eq!(dft_magnitude_half(&[1.0, 1.0, 1.0, 1.0]).unwrap().len(), 2);
        let d = dft_magnitude_half(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(d[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-12);
        let d = dft_magnitude_half(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-12);
        assert!(dft_magnitude_half(&[1.0]).is_err());
    }

    #[test]
    fn dft_matches_direct_sum_for_small_lengths() {
        for n in 2..=64 {
            let x = random_vec(n, n as u64);
            let got = dft_magnitude_half(&x).unwrap();
            let want = direct_dft_half(&x);
            assert_eq!(got.len(), want.len());
            let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-5 * scale, "n={n}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn spectral_concat_matches_stepwise_oracle() {
        let x = random_vec(784, 5);
        let out = spectral_concat(&x).unwrap();
        assert_eq!(out.len(), 1176);
        assert!((norm(&out) - 1.0).abs() < 1e-6);

        let mu = x.iter().sum::<f64>() / 784.0;
        let xi: Vec<f64> = x.iter().map(|v| v - mu).collect();
        let phi: Vec<f64> = direct_dft_half(&xi).iter().map(|v| v.sqrt()).collect();
        let pm = phi.iter().sum::<f64>() / phi.len() as f64;
        let phi: Vec<f64> = phi.iter().map(|v| v - pm).collect();
        let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pn = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let want: Vec<f64> = xi
            .iter()
            .map(|v| v / xn)
            .chain(phi.iter().map(|v| v / pn))
            .map(|v| v / 2f64.sqrt())
            .collect();
        for (g, w) in out.iter().zip(&want) {
            assert!((g - w).abs() < 1e-5);
        }
    }

    #[test]
    fn gaussian_filter_examples() {
        let side = 32;
        let c = 4.0 / (side * side) as f64;
        let x = vec![1.0; side * side];
        let out = gaussian_center_filter(&x, side, c).unwrap();
        // (i, j) = (16, 16), 1-based
        assert_eq!(out[15 * side + 15], 1.0);
        let corner = (-c * ((1.0f64 - 16.0).powi(2) * 2.0)).exp();
        assert!((out[0] - corner).abs() < 1e-12);
        assert!((corner - (-4.0f64 * 2.0 * (15.0f64 / 32.0).powi(2)).exp()).abs() < 1e-12);
        assert!(matches!(
            gaussian_center_filter(&[0.0; 100], 32, c),
            Err(Error::ShapeMismatch(_))
        ));

        let rgb = random_vec(3 * side * side, 3);
        let out = gaussian_center_filter(&rgb, side, c).unwrap();
        for ch in 0..3 {
            for j in 1..=side {
                for i in 1..=side {
                    let g = (-c * ((i as f64 - 16.0).powi(2) + (j as f64 - 16.0).powi(2))).exp();
                    let p = ch * side * side + (j - 1) * side + (i - 1);
                    assert!((out[p] - rgb[p] * g).abs() <= 1e-7 * rgb[p].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn gaussian_filter_vanishing_constant_is_identity() {
        let x = random_vec(3 * 16 * 16, 4);
        let out = gaussian_center_filter(&x, 16, 1e-12).unwrap();
        let dev = x.iter().zip(&out).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dev < 1e-6);
    }

    #[test]
    fn spec_validation_and_parsing() {
        use PreprocessStep::*;
        assert!(PreprocessSpec::new(vec![SpectralConcat, TwoStepNormalize]).is_err());
        assert!(PreprocessSpec::new(vec![SpectralConcat, SpectralConcat]).is_err());
        let spec: PreprocessSpec = "gaussian_filter::32,spectral_concat".parse().unwrap();
        assert_eq!(spec.steps()[0], PreprocessStep::default_gaussian(32));
        assert_eq!(spec.output_len(3072), 4608);
        let again: PreprocessSpec = spec.to_string().parse().unwrap();
        assert_eq!(again, spec);
        assert_eq!("none".parse::<PreprocessSpec>().unwrap(), PreprocessSpec::identity());
        assert!("bogus".parse::<PreprocessSpec>().is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(x in proptest::collection::vec(-100.0f64..100.0, 2..64)) {
            if let Ok(once) = two_step_normalize(&x) {
                let twice = two_step_normalize(&once).unwrap();
                for (a, b) in once.iter().zip(&twice) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn normalized_inner_products_are_cosines(
            a in proptest::collection::vec(-10.0f64..10.0, 16),
            b in proptest::collection::vec(-10.0f64..10.0, 16),
        ) {
            if let (Ok(a), Ok(b)) = (two_step_normalize(&a), two_step_normalize(&b)) {
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                prop_assert!(dot.abs() <= 1.0 + 1e-6);
            }
        }

        #[test]
        fn spectral_concat_has_unit_norm(x in proptest::collection::vec(0.0f64..255.0, 4..200)) {
            if let Ok(out) = spectral_concat(&x) {
                prop_assert_eq!(out.len(), x.len() + x.len().div_ceil(2));
                prop_assert!((norm(&out) - 1.0).abs() < 1e-6);
            }
        }
    }
}

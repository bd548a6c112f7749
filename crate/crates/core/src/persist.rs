//! Model files and convergence-trace CSV.
//!
//! Model file layout, all fields little-endian:
//!
//! ```text
//! magic      4 bytes  "RKLS"
//! version    u32      1
//! classes    u32      K
//! samples    u64      N
//! features   u64      M (raw input dimension)
//! kernel     u32 tag (0 polynomial, 1 Gaussian) + f64 parameter (degree or sigma)
//! gamma      f64
//! steps      u32 count, then per step: u32 tag (0 Gaussian filter,
//!            1 two-step normalize, 2 spectral concat) + f64 c + u64 side
//! samples    N x M' f64, row-major (preprocessed, M' = output length of the chain)
//! weights    (N+1) x K f64, row-major
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::classifier::Model;
use crate::dataset::SampleMatrix;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::preprocess::{PreprocessSpec, PreprocessStep};
use crate::solvers::ConvergenceTrace;

pub const MODEL_MAGIC: [u8; 4] = *b"RKLS";
pub const MODEL_VERSION: u32 = 1;

struct Writer<W> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(b)
    }
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Truncated {
            expected: self.pos.saturating_add(n),
            found: self.buf.len(),
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::InvalidArgument("dimension overflows usize".into()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::InvalidArgument("array size overflows usize".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn write_model<W: Write>(model: &Model, out: W) -> std::io::Result<()> {
    let mut w = Writer { inner: out };
    w.bytes(&MODEL_MAGIC)?;
    w.u32(MODEL_VERSION)?;
    w.u32(model.num_classes() as u32)?;
    w.u64(model.num_train() as u64)?;
    w.u64(model.input_dim() as u64)?;
    match *model.kernel() {
        KernelSpec::Polynomial { degree } => {
            w.u32(0)?;
            w.f64(f64::from(degree))?;
        }
        KernelSpec::Gaussian { sigma } => {
            w.u32(1)?;
            w.f64(sigma)?;
        }
    }
    w.f64(model.gamma())?;
    let steps = model.preprocess().steps();
    w.u32(steps.len() as u32)?;
    for step in steps {
        let (tag, c, side) = match *step {
            PreprocessStep::GaussianFilter { c, side } => (0, c, side as u64),
            PreprocessStep::TwoStepNormalize => (1, 0.0, 0),
            PreprocessStep::SpectralConcat => (2, 0.0, 0),
        };
        w.u32(tag)?;
        w.f64(c)?;
        w.u64(side)?;
    }
    for &v in model.train_samples().as_slice() {
        w.f64(v)?;
    }
    let weights = model.weights();
    for r in 0..weights.nrows() {
        for c in 0..weights.ncols() {
            w.f64(weights[(r, c)])?;
        }
    }
    w.inner.flush()
}

pub fn read_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: u32::from_le_bytes(MODEL_MAGIC),
            found: u32::from_le_bytes(magic.try_into().unwrap()),
        });
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let k = r.u32()? as usize;
    let n = r.usize()?;
    let m = r.usize()?;
    let kernel = match (r.u32()?, r.f64()?) {
        (0, d) if d >= 1.0 && d.fract() == 0.0 && d <= f64::from(u32::MAX) => {
            KernelSpec::Polynomial { degree: d as u32 }
        }
        (1, sigma) => KernelSpec::Gaussian { sigma },
        (tag, _) => return Err(Error::InvalidArgument(format!("unknown kernel tag {tag}"))),
    };
    let gamma = r.f64()?;
    let count = r.u32()?;
    let mut steps = Vec::with_capacity(count.min(16) as usize);
    for _ in 0..count {
        let (tag, c, side) = (r.u32()?, r.f64()?, r.usize()?);
        steps.push(match tag {
            0 => PreprocessStep::GaussianFilter { c, side },
            1 => PreprocessStep::TwoStepNormalize,
            2 => PreprocessStep::SpectralConcat,
            _ => return Err(Error::InvalidArgument(format!("unknown preprocessing tag {tag}"))),
        });
    }
    let preprocess = PreprocessSpec::new(steps)?;
    let width = preprocess.output_len(m);
    let samples = SampleMatrix::from_vec(n, width, r.f64s(n * width)?)?;
    let weights = DMatrix::from_row_slice(n + 1, k, &r.f64s((n + 1) * k)?);
    if r.pos != bytes.len() {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after model payload",
            bytes.len() - r.pos
        )));
    }
    Model::new(kernel, gamma, preprocess, m, samples, weights)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(model, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}

/// Writes `t,residual,eta`, one row per record; `eta` is empty when unmeasured.
pub fn write_trace_csv<W: Write>(trace: &ConvergenceTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,residual,eta")?;
    for rec in trace.records() {
        match rec.eta {
            Some(eta) => writeln!(out, "{},{},{}", rec.t, rec.residual, eta)?,
            None => writeln!(out, "{},{},", rec.t, rec.residual)?,
        }
    }
    out.flush()
}

pub fn save_trace_csv(trace: &ConvergenceTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(trace, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::decision_scores;
    use crate::solvers::TraceRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pre: PreprocessSpec = "gaussian_filter::4,spectral_concat".parse().unwrap();
        let n = 6;
        let width = pre.output_len(16);
        let samples =
            SampleMatrix::from_vec(n, width, (0..n * width).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
        let w = DMatrix::from_fn(n + 1, 3, |_, _| rng.random_range(-1.0..1.0));
        Model::new(KernelSpec::default(), 1e4, pre, 16, samples, w).unwrap()
    }

    fn bytes(m: &Model) -> Vec<u8> {
        let mut b = Vec::new();
        write_model(m, &mut b).unwrap();
        b
    }

    #[test]
    fn round_trip_scores_are_identical() {
        let m = model();
        let back = read_model(&bytes(&m)).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = SampleMatrix::from_vec(4, 16, (0..64).map(|_| rng.random_range(0.0..255.0)).collect()).unwrap();
        assert_eq!(decision_scores(&m, &x).unwrap(), decision_scores(&back, &x).unwrap());
    }

    #[test]
    fn corrupted_headers() {
        let m = model();
        let mut b = bytes(&m);
        b[0] = b'X';
        assert!(matches!(read_model(&b), Err(Error::BadMagic { .. })));

        let mut b = bytes(&m);
        b[4..8].copy_from_slice(&(MODEL_VERSION + 1).to_le_bytes());
        assert!(matches!(
            read_model(&b),
            Err(Error::VersionMismatch { found: 2, supported: 1 })
        ));

        let b = bytes(&m);
        assert!(matches!(read_model(&b[..b.len() - 3]), Err(Error::Truncated { .. })));
        assert!(matches!(read_model(&b[..2]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn trace_csv_layout() {
        let mut out = Vec::new();
        write_trace_csv(&ConvergenceTrace::new(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,residual,eta\n");

        let mut trace = ConvergenceTrace::new();
        for t in 1..=3 {
            trace
                .push(TraceRecord {
                    t,
                    residual: 1.5 / t as f64,
                    eta: (t == 3).then_some(0.25),
                })
                .unwrap();
        }
        let mut out = Vec::new();
        write_trace_csv(&trace, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "1,1.5,");
        assert_eq!(lines[3], "3,0.5,0.25");
    }
}

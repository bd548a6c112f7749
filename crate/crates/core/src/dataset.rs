//! Loaders for the MNIST IDX and CIFAR-10 binary formats, labeled sample
//! containers and one-hot target construction.
//!
//! Pixels are kept as raw `0..=255` reals; every rescaling step lives in
//! [`crate::preprocess`]. Images are vectorized by concatenating the columns
//! of each channel plane.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Side length of a CIFAR-10 image.
pub const CIFAR_SIDE: usize = 32;
/// Bytes per CIFAR-10 record: one label byte followed by three 32x32 planes.
pub const CIFAR_RECORD: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR_CLASSES: usize = 10;

/// Dense row-major matrix with one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T = f64> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
}

impl<T: Copy> SampleMatrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix cannot hold {} entries",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            rows: rows.len(),
            cols,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        // chunks_exact would yield nothing useful for zero-width rows
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> SampleMatrix<U> {
        SampleMatrix {
            data: self.data.iter().map(|&x| f(x)).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }

    /// Copies the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    dim: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            data,
            rows: idx.len(),
            cols: self.cols,
        })
    }
}

impl<T: Real> SampleMatrix<T> {
    pub fn cast<U: Real>(&self) -> SampleMatrix<U> {
        self.map(|x| U::cast(x.into()))
    }
}

/// Samples with integer class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: SampleMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(samples: SampleMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset must have at least one sample and one feature, got {}x{}",
                samples.nrows(),
                samples.ncols()
            )));
        }
        if labels.len() != samples.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                samples.nrows()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        if samples.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("dataset samples"));
        }
        Ok(Self {
            samples,
            labels,
            num_classes,
        })
    }

    pub fn samples(&self) -> &SampleMatrix<f64> {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.samples.ncols()
    }

    /// Keeps the first `n` samples (all of them when `n` exceeds the size).
    pub fn truncate(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("cannot truncate a dataset to zero samples".into()));
        }
        if n < self.len() {
            let cols = self.samples.ncols();
            self.samples.data.truncate(n * cols);
            self.samples.rows = n;
            self.labels.truncate(n);
        }
        Ok(self)
    }

    pub fn into_parts(self) -> (SampleMatrix<f64>, Vec<usize>, usize) {
        (self.samples, self.labels, self.num_classes)
    }
}

/// Zero-bordered one-hot target matrix of shape `(N+1) x K`.
///
/// Row 0 is the all-zero border row that pairs with the bias constraint;
/// row `i + 1` encodes the class of sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix(DMatrix<f64>);

impl TargetMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn cast<T: Real>(&self) -> DMatrix<T> {
        self.0.map(T::cast)
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }
}

pub fn one_hot_targets(labels: &[usize], num_classes: usize) -> Result<TargetMatrix> {
    let mut z = DMatrix::zeros(labels.len() + 1, num_classes);
    for (i, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        z[(i + 1, label)] = 1.0;
    }
    Ok(TargetMatrix(z))
}

/// Images as stored in an IDX file: `count` images of `rows x cols` bytes,
/// each image row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl RawImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Vectorizes every image by concatenating its columns, pixels as reals in `[0, 255]`.
    pub fn to_samples(&self) -> SampleMatrix<f64> {
        let n = self.rows * self.cols;
        let mut data = Vec::with_capacity(self.count * n);
        for i in 0..self.count {
            let img = self.image(i);
            for c in 0..self.cols {
                data.extend((0..self.rows).map(|r| f64::from(img[r * self.cols + c])));
            }
        }
        SampleMatrix {
            data,
            rows: self.count,
            cols: n,
        }
    }

    pub fn into_dataset(self, labels: &[u8], num_classes: usize) -> Result<LabeledDataset> {
        if labels.len() != self.count {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} images",
                labels.len(),
                self.count
            )));
        }
        LabeledDataset::new(
            self.to_samples(),
            labels.iter().map(|&l| usize::from(l)).collect(),
            num_classes,
        )
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            expected: offset + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImages> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::InvalidArgument("IDX image dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(RawImages {
        count,
        rows,
        cols,
        pixels: bytes[16..expected].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let expected = count + 8;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..expected].to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<RawImages> {
    parse_idx_images(&read_file(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read_file(path.as_ref())?)
}

/// Loads an MNIST-style image/label pair into a dataset with `num_classes` classes.
pub fn load_idx_dataset(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    num_classes: usize,
) -> Result<LabeledDataset> {
    let images = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    images.into_dataset(&labels, num_classes)
}

/// Appends the records of one CIFAR-10 batch to `samples`/`labels`.
fn parse_cifar10_into(bytes: &[u8], samples: &mut Vec<f64>, labels: &mut Vec<usize>) -> Result<()> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        return Err(Error::BadRecordSize {
            len: bytes.len(),
            record: CIFAR_RECORD,
        });
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    for record in bytes.chunks_exact(CIFAR_RECORD) {
        let label = usize::from(record[0]);
        if label >= CIFAR_CLASSES {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: CIFAR_CLASSES,
            });
        }
        labels.push(label);
        for channel in record[1..].chunks_exact(plane) {
            for c in 0..CIFAR_SIDE {
                samples.extend((0..CIFAR_SIDE).map(|r| f64::from(channel[r * CIFAR_SIDE + c])));
            }
        }
    }
    Ok(())
}

pub fn parse_cifar10(bytes: &[u8]) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    parse_cifar10_into(bytes, &mut samples, &mut labels)?;
    let n = labels.len();
    LabeledDataset::new(
        SampleMatrix::from_vec(n, CIFAR_RECORD - 1, samples)?,
        labels,
        CIFAR_CLASSES,
    )
}

/// Loads and concatenates CIFAR-10 batch files in argument order.
///
/// Each sample is laid out channel-major (R, G, B planes), every plane
/// vectorized column by column.
pub fn load_cifar10_batches<P: AsRef<Path>>(paths: &[P]) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = read_file(path.as_ref())?;
        parse_cifar10_into(&bytes, &mut samples, &mut labels)?;
    }
    let n = labels.len();
    LabeledDataset::new(
        SampleMatrix::from_vec(n, CIFAR_RECORD - 1, samples)?,
        labels,
        CIFAR_CLASSES,
    )
}

/// Isotropic Gaussian blobs with unit variance per coordinate.
///
/// Class centers sit at distance `separation` from each other when
/// `num_classes <= num_features`; otherwise they are random points on the
/// sphere of radius `separation / sqrt(2)`. Train and test sets share the
/// centers and have balanced, interleaved labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub num_features: usize,
    pub num_classes: usize,
    pub separation: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn generate(&self, n_train: usize, n_test: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        let (m, k) = (self.num_features, self.num_classes);
        if m == 0 || k == 0 {
            return Err(Error::InvalidArgument("blobs need at least one feature and one class".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let radius = self.separation / std::f64::consts::SQRT_2;
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                if k <= m {
                    let mut v = vec![0.0; m];
                    if k > 1 {
                        v[c] = radius;
                    }
                    v
                } else {
                    let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    v.into_iter().map(|x| x * radius / norm).collect()
                }
            })
            .collect();
        let mut draw = |n: usize| -> Result<LabeledDataset> {
            let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
            let mut data = Vec::with_capacity(n * m);
            for &label in &labels {
                for &c in &centers[label] {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    data.push(c + noise);
                }
            }
            LabeledDataset::new(SampleMatrix::from_vec(n, m, data)?, labels, k)
        };
        let train = draw(n_train)?;
        let test = draw(n_test)?;
        Ok((train, test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(magic: u32, count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [magic, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    fn idx_labels(magic: u32, labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&magic.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn idx_images_two_by_two() {
        let raw = parse_idx_images(&idx_images(2051, 2, 2, 2, &[1, 2, 3, 4, 5, 6, 7, 8])).unwrap();
        assert_eq!((raw.count, raw.rows, raw.cols), (2, 2, 2));
        assert_eq!(raw.image(1), &[5, 6, 7, 8]);
        let s = raw.to_samples();
        assert_eq!(s.nrows(), 2);
        assert_eq!(s.ncols(), 4);
        // columns concatenated: [[1,2],[3,4]] -> [1,3,2,4]
        assert_eq!(s.row(0), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn idx_images_bad_magic() {
        let err = parse_idx_images(&idx_images(2049, 2, 2, 2, &[0; 8])).unwrap_err();
        assert!(matches!(err, Error::BadMagic { expected: 2051, found: 2049 }));
    }

    #[test]
    fn idx_images_truncated() {
        let err = parse_idx_images(&idx_images(2051, 3, 2, 2, &[0; 8])).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 28, found: 24 }));
    }

    #[test]
    fn idx_labels_cases() {
        assert_eq!(parse_idx_labels(&idx_labels(2049, &[5, 0, 4])).unwrap(), vec![5, 0, 4]);
        assert!(matches!(parse_idx_labels(&[]), Err(Error::Truncated { .. })));
        assert!(matches!(
            parse_idx_labels(&idx_labels(2051, &[1])),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn cifar_single_record() {
        let mut rec = vec![0u8; CIFAR_RECORD];
        rec[0] = 7;
        // R plane, row 0, col 1
        rec[2] = 200;
        let ds = parse_cifar10(&rec).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels(), &[7]);
        assert_eq!(ds.num_features(), 3072);
        // column-concatenated: (row 0, col 1) lands at 1 * 32 + 0
        assert_eq!(ds.samples().row(0)[32], 200.0);
    }

    #[test]
    fn cifar_bad_sizes_and_labels() {
        assert!(matches!(
            parse_cifar10(&vec![0u8; CIFAR_RECORD + 1]),
            Err(Error::BadRecordSize { .. })
        ));
        let mut rec = vec![0u8; CIFAR_RECORD];
        rec[0] = 12;
        assert!(matches!(
            parse_cifar10(&rec),
            Err(Error::LabelOutOfRange { label: 12, .. })
        ));
    }

    #[test]
    fn one_hot_examples() {
        let z = one_hot_targets(&[2], 3).unwrap();
        assert_eq!(z.as_matrix(), &DMatrix::from_row_slice(2, 3, &[0., 0., 0., 0., 0., 1.]));
        let z = one_hot_targets(&[0, 1], 2).unwrap();
        assert_eq!(z.as_matrix(), &DMatrix::from_row_slice(3, 2, &[0., 0., 1., 0., 0., 1.]));
        assert!(matches!(
            one_hot_targets(&[5], 3),
            Err(Error::LabelOutOfRange { label: 5, num_classes: 3 })
        ));
    }

    #[test]
    fn dataset_rejects_bad_input() {
        let s = SampleMatrix::from_vec(1, 2, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(LabeledDataset::new(s, vec![0], 1), Err(Error::NonFinite(_))));
        let s = SampleMatrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            LabeledDataset::new(s, vec![3], 2),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn blobs_are_reproducible_and_balanced() {
        let spec = BlobSpec {
            num_features: 4,
            num_classes: 3,
            separation: 5.0,
            seed: 9,
        };
        let (a, _) = spec.generate(30, 6).unwrap();
        let (b, _) = spec.generate(30, 6).unwrap();
        assert_eq!(a, b);
        for c in 0..3 {
            assert_eq!(a.labels().iter().filter(|&&l| l == c).count(), 10);
        }
    }
}

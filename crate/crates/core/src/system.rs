//! Block access to linear systems `A W = Z` whose matrix is only available
//! piecewise.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A matrix that can hand out arbitrary sub-blocks.
pub trait LinearSystem<T: Real>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// The `|rows| x |cols|` sub-matrix.
    fn block(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<T>>;

    fn is_symmetric(&self) -> bool {
        false
    }

    /// Selected rows over all columns.
    fn row_block(&self, rows: &[usize]) -> Result<DMatrix<T>> {
        let all: Vec<usize> = (0..self.ncols()).collect();
        self.block(rows, &all)
    }

    /// Selected columns over all rows.
    fn col_block(&self, cols: &[usize]) -> Result<DMatrix<T>> {
        let all: Vec<usize> = (0..self.nrows()).collect();
        self.block(&all, cols)
    }

    fn materialize(&self) -> Result<DMatrix<T>> {
        let rows: Vec<usize> = (0..self.nrows()).collect();
        let cols: Vec<usize> = (0..self.ncols()).collect();
        self.block(&rows, &cols)
    }
}

/// An explicitly stored system matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem<T: Real = f64> {
    matrix: DMatrix<T>,
    symmetric: bool,
}

impl<T: Real> DenseSystem<T> {
    pub fn new(matrix: DMatrix<T>) -> Self {
        let symmetric = matrix.is_square() && matrix == matrix.transpose();
        Self { matrix, symmetric }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }
}

fn check(idx: &[usize], dim: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= dim) {
        Some(&index) => Err(Error::IndexOutOfRange { index, dim }),
        None => Ok(()),
    }
}

impl<T: Real> LinearSystem<T> for DenseSystem<T> {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<T>> {
        check(rows, self.matrix.nrows())?;
        check(cols, self.matrix.ncols())?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
            self.matrix[(rows[r], cols[c])]
        }))
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Divides every row of `block` and `rhs` by the Euclidean norm of that row of `block`.
pub(crate) fn standardize<T>(block: &mut DMatrix<T>, rhs: &mut DMatrix<T>) -> Result<()>
where
    T: Real,
{
    for r in 0..block.nrows() {
        let norm = block.row(r).norm();
        if !(norm > T::zero()) {
            return Err(Error::InvalidArgument(format!("row {r} of the system block is zero")));
        }
        let inv = T::one() / norm;
        block.row_mut(r).scale_mut(inv);
        rhs.row_mut(r).scale_mut(inv);
    }
    Ok(())
}

/// Rows of the system and of the right-hand side, each scaled by the inverse
/// full-row norm of the system row.
pub fn standardized_row_block<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    rows: &[usize],
    z: &DMatrix<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if z.nrows() != sys.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} rows, system has {}",
            z.nrows(),
            sys.nrows()
        )));
    }
    let mut block = sys.row_block(rows)?;
    let mut rhs = z.select_rows(rows);
    standardize(&mut block, &mut rhs)?;
    Ok((block, rhs))
}

const RESIDUAL_ROWS: usize = 256;

/// `Z - A W`, assembled from row blocks so that at most
/// `256 x ncols` entries of `A` exist at once.
pub fn residual<T: Real, S: LinearSystem<T> + ?Sized>(
    sys: &S,
    w: &DMatrix<T>,
    z: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if w.nrows() != sys.ncols() || z.nrows() != sys.nrows() || w.ncols() != z.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "residual of {}x{} system with W {}x{} and Z {}x{}",
            sys.nrows(),
            sys.ncols(),
            w.nrows(),
            w.ncols(),
            z.nrows(),
            z.ncols()
        )));
    }
    let mut r = z.clone();
    let all: Vec<usize> = (0..sys.nrows()).collect();
    for rows in all.chunks(RESIDUAL_ROWS) {
        let prod = sys.row_block(rows)? * w;
        for (k, &i) in rows.iter().enumerate() {
            let mut dst = r.row_mut(i);
            dst -= prod.row(k);
        }
    }
    Ok(r)
}

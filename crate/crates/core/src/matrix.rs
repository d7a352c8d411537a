//! Dense nonnegative square matrices.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Flags {
    row_allowable: bool,
    allowable: bool,
    strictly_positive: bool,
}

impl Flags {
    fn scan(dim: usize, data: &[f64]) -> Self {
        let mut row_ok = vec![false; dim];
        let mut col_ok = vec![false; dim];
        let mut strictly_positive = true;
        for (idx, &v) in data.iter().enumerate() {
            if v > 0.0 {
                row_ok[idx / dim] = true;
                col_ok[idx % dim] = true;
            } else {
                strictly_positive = false;
            }
        }
        let row_allowable = row_ok.iter().all(|&b| b);
        Flags { row_allowable, allowable: row_allowable && col_ok.iter().all(|&b| b), strictly_positive }
    }
}

/// A `p x p` matrix with finite nonnegative entries, stored row-major.
///
/// Structural flags (allowability, strict positivity) are computed once at
/// construction; the matrix is immutable afterwards so they can never go
/// stale.
#[derive(Clone, PartialEq)]
pub struct NonNegMatrix {
    dim: usize,
    data: Vec<f64>,
    flags: Flags,
}

impl NonNegMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidEntry { index, value });
        }
        // -0.0 compares equal to 0.0 but would leak a sign into products
        let data: Vec<f64> = data.into_iter().map(|v| if v == 0.0 { 0.0 } else { v }).collect();
        let flags = Flags::scan(dim, &data);
        Ok(NonNegMatrix { dim, data, flags })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is valid")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            data[i * dim + i] = d;
        }
        Self::new(dim, data)
    }

    /// Builds a matrix from trusted entries, skipping validation. Callers
    /// guarantee finiteness and nonnegativity.
    pub(crate) fn from_trusted(dim: usize, data: Vec<f64>) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
        let flags = Flags::scan(dim, &data);
        NonNegMatrix { dim, data, flags }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// No zero row and no zero column.
    pub fn is_allowable(&self) -> bool {
        self.flags.allowable
    }

    /// No zero row.
    pub fn is_row_allowable(&self) -> bool {
        self.flags.row_allowable
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.flags.strictly_positive
    }

    /// Smallest positive entry and largest entry.
    pub fn extreme_entries(&self) -> Result<(f64, f64)> {
        let mut alpha = f64::INFINITY;
        let mut beta: f64 = 0.0;
        for &v in &self.data {
            if v > 0.0 {
                alpha = alpha.min(v);
                beta = beta.max(v);
            }
        }
        if beta > 0.0 {
            Ok((alpha, beta))
        } else {
            Err(Error::NoPositiveEntry)
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for row in self.data.chunks_exact(self.dim) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.dim).map(|r| r.iter().sum()).collect()
    }

    /// Every column sums to one within `tol`.
    pub fn is_column_stochastic(&self, tol: f64) -> bool {
        self.column_sums().iter().all(|s| (s - 1.0).abs() <= tol)
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &NonNegMatrix) -> Result<NonNegMatrix> {
        self.check_dim(rhs.dim)?;
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        mul_into(p, &self.data, &rhs.data, &mut out);
        Ok(NonNegMatrix::from_trusted(p, out))
    }

    /// `A v` for a (possibly signed) vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        let mut out = vec![0.0; self.dim];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.dim)) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `vᵀ A` as a vector.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        let mut out = vec![0.0; self.dim];
        self.apply_transpose_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (vi, row) in v.iter().zip(self.data.chunks_exact(self.dim)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += vi * a;
            }
        }
    }

    pub fn transpose(&self) -> NonNegMatrix {
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[j * p + i] = self.data[i * p + j];
            }
        }
        NonNegMatrix::from_trusted(p, out)
    }

    /// `diag(rows) * A * diag(cols)` for positive scalings.
    pub fn scale(&self, rows: &[f64], cols: &[f64]) -> Result<NonNegMatrix> {
        self.check_dim(rows.len())?;
        self.check_dim(cols.len())?;
        if rows.iter().chain(cols).any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidParameter("scaling factors must be positive".into()));
        }
        let p = self.dim;
        let data = (0..p * p).map(|idx| self.data[idx] * rows[idx / p] * cols[idx % p]).collect();
        Ok(NonNegMatrix::from_trusted(p, data))
    }

    /// Natural log of `|det A|`, `-inf` when singular. LU with partial pivoting.
    pub fn log_abs_det(&self) -> f64 {
        let p = self.dim;
        let mut lu = self.data.clone();
        let mut acc = 0.0;
        for col in 0..p {
            let (pivot_row, pivot_abs) =
                (col..p)
                    .map(|r| (r, lu[r * p + col].abs()))
                    .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 {
                return f64::NEG_INFINITY;
            }
            if pivot_row != col {
                for j in 0..p {
                    lu.swap(col * p + j, pivot_row * p + j);
                }
            }
            let pivot = lu[col * p + col];
            acc += pivot.abs().ln();
            for r in col + 1..p {
                let factor = lu[r * p + col] / pivot;
                if factor != 0.0 {
                    for j in col + 1..p {
                        lu[r * p + j] -= factor * lu[col * p + j];
                    }
                }
            }
        }
        acc
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got })
        }
    }
}

/// Row-major `out = a * b` for `p x p` buffers.
pub(crate) fn mul_into(p: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..p {
        let out_row = &mut out[i * p..(i + 1) * p];
        for k in 0..p {
            let aik = a[i * p + k];
            if aik != 0.0 {
                for (o, bkj) in out_row.iter_mut().zip(&b[k * p..(k + 1) * p]) {
                    *o += aik * bkj;
                }
            }
        }
    }
}

impl fmt::Debug for NonNegMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonNegMatrix").field("dim", &self.dim).field("rows", &self.rows()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(matches!(
            NonNegMatrix::from_rows(&[[1.0, -0.5], [0.0, 1.0]]),
            Err(Error::InvalidEntry { index: 1, .. })
        ));
        assert!(NonNegMatrix::from_rows(&[[f64::NAN]]).is_err());
        assert!(NonNegMatrix::new(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn allowability() {
        assert!(NonNegMatrix::identity(3).is_allowable());
        let zero_col = NonNegMatrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(!zero_col.is_allowable());
        assert!(zero_col.is_row_allowable());
        let lossy = NonNegMatrix::from_rows(&[[0.5, 0.0], [0.0, 1.0]]).unwrap();
        assert!(lossy.is_allowable());
        assert!(!lossy.is_strictly_positive());
        let zero_row = NonNegMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(!zero_row.is_row_allowable());
        assert!(!zero_row.is_allowable());
    }

    #[test]
    fn extreme_entries_examples() {
        let a = NonNegMatrix::from_rows(&[[0.5, 0.0], [0.5, 1.0]]).unwrap();
        assert_eq!(a.extreme_entries().unwrap(), (0.5, 1.0));
        assert_eq!(NonNegMatrix::identity(4).extreme_entries().unwrap(), (1.0, 1.0));
        let b = NonNegMatrix::from_rows(&[[2.0, 0.1], [0.1, 2.0]]).unwrap();
        assert_eq!(b.extreme_entries().unwrap(), (0.1, 2.0));
        let z = NonNegMatrix::new(2, vec![0.0; 4]).unwrap();
        assert_eq!(z.extreme_entries(), Err(Error::NoPositiveEntry));
    }

    #[test]
    fn log_abs_det_examples() {
        assert_eq!(NonNegMatrix::identity(3).log_abs_det(), 0.0);
        let d = NonNegMatrix::diagonal(&[2.0, 3.0]).unwrap();
        assert_relative_eq!(d.log_abs_det(), 6f64.ln(), epsilon = 1e-15);
        let lossy = NonNegMatrix::from_rows(&[[0.5, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(lossy.log_abs_det(), 0.5f64.ln());
        let singular = NonNegMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(singular.log_abs_det(), f64::NEG_INFINITY);
        // needs a row swap
        let perm = NonNegMatrix::from_rows(&[[0.0, 2.0], [3.0, 0.0]]).unwrap();
        assert_relative_eq!(perm.log_abs_det(), 6f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn products_and_sums() {
        let a = NonNegMatrix::from_rows(&[[0.5, 0.25], [0.5, 0.75]]).unwrap();
        assert_eq!(a.column_sums(), vec![1.0, 1.0]);
        assert!(a.is_column_stochastic(1e-12));
        let aa = a.mul(&a).unwrap();
        assert_relative_eq!(aa.get(0, 0), 0.375);
        assert_relative_eq!(aa.get(1, 1), 0.6875);
        assert_eq!(a.apply(&[1.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(a.apply_transpose(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(a.transpose().get(0, 1), 0.5);
        assert!(a.apply(&[1.0]).is_err());
    }
}

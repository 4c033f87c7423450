//! Dense row-major vectors and matrices of `f64`.

use std::ops::{Deref, DerefMut};

use crate::error::{invalid, mismatch, LabError, Result};
use crate::numerics::rng::RngStream;

/// A dense vector. Dereferences to `[f64]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite(format!("vector entry {i}")));
        }
        Ok(Self(values))
    }

    /// Wraps values without the finiteness scan. Callers guarantee finiteness.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// A dense row-major matrix with immutable shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix shape {rows}x{cols} must be positive")));
        }
        if data.len() != rows * cols {
            return Err(mismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite(format!("matrix entry {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(mismatch("ragged rows"));
        }
        Self::from_row_major(n, m, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }


    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(mismatch(format!(
                "matvec: {}x{} times length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let out = self.data.chunks_exact(self.cols).map(|r| dot(r, x)).collect();
        Ok(DenseVector::from_vec_unchecked(out))
    }

    /// `Aᵀ y`, accumulated row by row.
    pub fn matvec_t(&self, y: &[f64]) -> Result<DenseVector> {
        if y.len() != self.rows {
            return Err(mismatch(format!(
                "matvec_t: ({}x{})ᵀ times length {}",
                self.rows,
                self.cols,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            if yi != 0.0 {
                axpy(yi, r, &mut out);
            }
        }
        Ok(DenseVector::from_vec_unchecked(out))
    }

    /// `A += alpha · u vᵀ`
    pub fn rank_one_update(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                axpy(alpha * ui, v, self.row_mut(i));
            }
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Matrix with i.i.d. `N(0, variance)` entries drawn from `stream`.
pub fn sample_gaussian_matrix(
    stream: &mut RngStream,
    rows: usize,
    cols: usize,
    variance: f64,
) -> Result<DenseMatrix> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(invalid(format!("variance must be positive, got {variance}")));
    }
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("matrix shape {rows}x{cols} must be positive")));
    }
    let sd = variance.sqrt();
    let mut data = vec![0.0; rows * cols];
    stream.fill_gaussian(&mut data);
    for v in data.iter_mut() {
        *v *= sd;
    }
    Ok(DenseMatrix { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::derive_stream;

    #[test]
    fn sample_variance_matches_request() {
        let mut s = derive_stream(1, 0);
        let w = sample_gaussian_matrix(&mut s, 500, 500, 1.0 / 500.0).unwrap();
        let n = w.as_slice().len() as f64;
        let mean = w.as_slice().iter().sum::<f64>() / n;
        let var = w.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var * 500.0 - 1.0).abs() < 0.05, "var*500 = {}", var * 500.0);
    }

    #[test]
    fn zero_variance_rejected() {
        let mut s = derive_stream(1, 0);
        assert!(sample_gaussian_matrix(&mut s, 2, 2, 0.0).is_err());
        assert!(sample_gaussian_matrix(&mut s, 2, 2, -1.0).is_err());
    }

    #[test]
    fn same_stream_same_matrix() {
        let a = sample_gaussian_matrix(&mut derive_stream(9, 2), 10, 7, 0.3).unwrap();
        let b = sample_gaussian_matrix(&mut derive_stream(9, 2), 10, 7, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matvec_and_transpose_agree() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(&*a.matvec(&[1.0, 0.0, -1.0]).unwrap(), &[-2.0, -2.0]);
        assert_eq!(&*a.matvec_t(&[1.0, -1.0]).unwrap(), &[-3.0, -3.0, -3.0]);
        let at = a.transpose();
        assert_eq!(at.matvec(&[1.0, -1.0]).unwrap(), a.matvec_t(&[1.0, -1.0]).unwrap());
        assert!(a.matvec(&[1.0]).is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::from_vec(vec![f64::INFINITY]).is_err());
    }
}

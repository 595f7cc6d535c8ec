//! Dense row-major matrices with `NaN` as the missing value.

use crate::{Error, Result};

/// Row-major grid of values. `Grid<f64>` (aliased [`Matrix`]) is the
/// workhorse; boolean and integer grids carry spot flags and masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type Matrix = Grid<f64>;
pub type BoolMatrix = Grid<bool>;
pub type IntMatrix = Grid<i64>;

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Grid { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix dimension mismatch");
        Grid { rows, cols, data }
    }

    /// Build row by row from a closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.data[r * self.cols + c].clone()).collect()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// New grid keeping only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Grid { rows: rows.len(), cols: self.cols, data }
    }

    /// New grid keeping only the listed columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            for &c in cols {
                data.push(row[c].clone());
            }
        }
        Grid { rows: self.rows, cols: cols.len(), data }
    }

    pub fn transpose(&self) -> Self {
        Grid::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }
}

impl Matrix {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn nan(rows: usize, cols: usize) -> Self {
        Matrix::filled(rows, cols, f64::NAN)
    }

    pub fn missing_count(&self) -> usize {
        self.data.iter().filter(|v| v.is_nan()).count()
    }

    /// Bitwise equality; missing cells compare equal regardless of the
    /// NaN payload.
    pub fn bits_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn check_index(&self, r: usize, c: usize) -> Result<()> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::IndexOutOfRange { index: r.max(c), len: self.rows.max(self.cols) });
        }
        Ok(())
    }
}

/// Mean of the finite entries, `NaN` when there are none.
pub fn finite_mean(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &v in values {
        if v.is_finite() {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Median of the finite entries, `NaN` when there are none. Even counts
/// average the two middle values.
pub fn finite_median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sample mean over all values (caller guarantees finiteness).
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Median absolute deviation scaled by 1.4826 for normal consistency.
pub fn mad(values: &[f64]) -> f64 {
    let med = finite_median(values);
    if med.is_nan() {
        return f64::NAN;
    }
    let dev: Vec<f64> = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|&v| (v - med).abs())
        .collect();
    1.4826 * finite_median(&dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.at(0, 2), 3.0);
        assert_eq!(m.at(1, 0), 4.0);
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(m.col(1), vec![2.0, 5.0]);
    }

    #[test]
    fn select_and_transpose() {
        let m = Matrix::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row(0), &[4.0, 5.0]);
        assert_eq!(s.row(1), &[0.0, 1.0]);
        let t = m.transpose();
        assert_eq!(t.at(1, 2), m.at(2, 1));
    }

    #[test]
    fn medians_and_mad() {
        assert_eq!(finite_median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(finite_median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(finite_median(&[f64::NAN]).is_nan());
        assert_eq!(finite_mean(&[1.0, f64::NAN, 3.0]), 2.0);
        // MAD of 1..=5 is 1.4826 * 1
        assert!((mad(&[1.0, 2.0, 3.0, 4.0, 5.0]) - 1.4826).abs() < 1e-12);
    }
}

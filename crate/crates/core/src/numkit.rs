//! Dense vectors, dense design matrices, and positive diagonal
//! preconditioners with the weighted norms `‖v‖²_P = Σ pᵢvᵢ²`.
//!
//! Preconditioners are stored as diagonals only: every metric in the method
//! family is diagonal, so inverses are exact and memory stays O(d).
//! Dimension mismatches are programming errors and panic, like `ndarray`.

use crate::Scalar;

/// Floor applied to every preconditioner diagonal entry at construction.
/// Keeps `P ≻ 0` under the decaying update without division blowup.
pub const EPS_PRECOND: f64 = 1e-12;

/// Dense vector of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn new(entries: Vec<T>) -> Self {
        Vector(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![T::zero(); dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "vector dimension mismatch");
        self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// `max |vᵢ|`; panics on the empty vector.
    pub fn inf_norm(&self) -> T {
        assert!(!self.is_empty(), "inf_norm of empty vector");
        self.0.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, c: T) -> Self {
        Vector(self.0.iter().map(|&a| c * a).collect())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: T, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "vector dimension mismatch");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + c * b)
                .collect(),
        )
    }

    /// Componentwise clamp to `[-bound, bound]`.
    pub fn clamp_box(&self, bound: T) -> Self {
        Vector(
            self.0
                .iter()
                .map(|&a| a.min(bound).max(-bound))
                .collect(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T: Scalar> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Scalar> std::ops::IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Scalar> From<Vec<T>> for Vector<T> {
    fn from(v: Vec<T>) -> Self {
        Vector(v)
    }
}

/// Positive diagonal preconditioner `P = diag(p₁,…,p_d)`, `pᵢ > 0`.
///
/// Construction clamps every entry to at least [`EPS_PRECOND`], so the
/// positive-definiteness invariant holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagPrecond<T> {
    diag: Vec<T>,
}

impl<T: Scalar> DiagPrecond<T> {
    pub fn new(diag: Vec<T>) -> Self {
        let floor = T::of(EPS_PRECOND);
        DiagPrecond {
            diag: diag.into_iter().map(|p| p.max(floor)).collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        DiagPrecond {
            diag: vec![T::one(); dim],
        }
    }

    /// Uniform diagonal `c·I` (clamped like any other construction).
    pub fn uniform(dim: usize, c: T) -> Self {
        Self::new(vec![c; dim])
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    pub fn mean_diag(&self) -> T {
        let sum: T = self.diag.iter().copied().sum();
        sum / T::of(self.len() as f64)
    }

    pub fn min_diag(&self) -> T {
        self.diag.iter().fold(T::infinity(), |m, &p| m.min(p))
    }

    pub fn max_diag(&self) -> T {
        self.diag.iter().fold(T::zero(), |m, &p| m.max(p))
    }

    /// `P v` componentwise.
    pub fn apply(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(self.len(), v.len(), "preconditioner dimension mismatch");
        Vector::new(
            self.diag
                .iter()
                .zip(v.iter())
                .map(|(&p, &x)| p * x)
                .collect(),
        )
    }

    /// `P⁻¹ v = (vᵢ/pᵢ)ᵢ`; exact because the diagonal is strictly positive.
    pub fn inverse_apply(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(self.len(), v.len(), "preconditioner dimension mismatch");
        Vector::new(
            self.diag
                .iter()
                .zip(v.iter())
                .map(|(&p, &x)| x / p)
                .collect(),
        )
    }

    /// `‖v‖²_P = Σ pᵢ vᵢ²`.
    pub fn weighted_sq_norm(&self, v: &Vector<T>) -> T {
        assert_eq!(self.len(), v.len(), "preconditioner dimension mismatch");
        self.diag
            .iter()
            .zip(v.iter())
            .map(|(&p, &x)| p * x * x)
            .sum()
    }

    /// `‖v‖²_{P⁻¹} = Σ vᵢ²/pᵢ`.
    pub fn inv_weighted_sq_norm(&self, v: &Vector<T>) -> T {
        assert_eq!(self.len(), v.len(), "preconditioner dimension mismatch");
        self.diag
            .iter()
            .zip(v.iter())
            .map(|(&p, &x)| x * x / p)
            .sum()
    }

    /// `‖v‖²_{P⁻²} = Σ vᵢ²/pᵢ²`.
    pub fn inv_sq_weighted_sq_norm(&self, v: &Vector<T>) -> T {
        assert_eq!(self.len(), v.len(), "preconditioner dimension mismatch");
        self.diag
            .iter()
            .zip(v.iter())
            .map(|(&p, &x)| x * x / (p * p))
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.diag.iter().all(|p| p.is_finite())
    }
}

/// Free-function form of the weighted norm, `Σ wᵢ vᵢ²`.
pub fn weighted_sq_norm<T: Scalar>(v: &Vector<T>, w: &DiagPrecond<T>) -> T {
    w.weighted_sq_norm(v)
}

/// Dense row-major matrix; just enough linear algebra for the objectives
/// (matvec and transposed matvec).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == ncols),
            "ragged rows in dense matrix"
        );
        DenseMatrix {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "flat data length mismatch");
        DenseMatrix { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    /// `A v`.
    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(&a, &x)| a * x)
                    .sum::<T>()
            })
            .collect()
    }

    /// `Aᵀ u`.
    pub fn t_matvec(&self, u: &[T]) -> Vec<T> {
        assert_eq!(self.rows, u.len(), "t_matvec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &ui) in u.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * ui;
            }
        }
        out
    }

    /// Converts entries (used to move file data into the working scalar type).
    pub fn map_from_f64(m: &DenseMatrix<f64>) -> Self {
        DenseMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|&v| T::of(v)).collect(),
        }
    }
}

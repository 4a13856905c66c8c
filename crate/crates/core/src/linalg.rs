//! Small dense real linear algebra: vectors, column-major matrices, LU with
//! partial pivoting, Householder QR with a non-negative diagonal, orthogonal
//! projection onto a span and normalized Gram determinants.
//!
//! Everything here is sized for systems with a few dozen unknowns. There are
//! no blocked kernels and no sparse formats.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Norms at or below this value are treated as exactly zero.
pub const ZERO_NORM: f64 = 1e-300;

/// Relative pivot threshold used by [`LuFactors::factorize`].
pub const PIVOT_RELATIVE: f64 = 1e-14;

/// A basis column whose QR diagonal falls below this fraction of its own norm
/// is considered dependent and dropped from projections.
const DEPENDENT_COLUMN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("zero vector at position {0}")]
    ZeroVector(usize),
    #[error("non-finite entry")]
    NonFinite,
    #[error("empty matrix or vector")]
    Empty,
}

/// A real column vector.
#[derive(Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn from_vec(data: Vec<f64>) -> Self {
        DenseVector(data)
    }

    /// Checked constructor enforcing non-empty, finite entries.
    pub fn try_from_vec(data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.is_empty() {
            return Err(LinalgError::Empty);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(DenseVector(data))
    }

    pub fn zeros(n: usize) -> Self {
        DenseVector(vec![0.0; n])
    }

    pub fn from_elem(n: usize, value: f64) -> Self {
        DenseVector(vec![value; n])
    }

    /// The `i`-th canonical basis vector of length `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm, computed with scaling so that tiny or huge entries do
    /// not underflow or overflow.
    pub fn norm(&self) -> f64 {
        let scale = self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return scale;
        }
        let sum: f64 = self.0.iter().map(|v| (v / scale).powi(2)).sum();
        scale * sum.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn add(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.dim(), other.dim());
        DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.dim(), other.dim());
        DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.dim(), other.dim());
        DenseVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    /// Returns the unit vector in the direction of `self`.
    pub fn normalized(&self) -> Option<DenseVector> {
        let norm = self.norm();
        if norm <= ZERO_NORM {
            None
        } else {
            Some(self.scaled(1.0 / norm))
        }
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(data: Vec<f64>) -> Self {
        DenseVector(data)
    }
}

impl<const N: usize> From<[f64; N]> for DenseVector {
    fn from(data: [f64; N]) -> Self {
        DenseVector(data.to_vec())
    }
}

/// A real matrix stored in column-major order.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from column-major data, checking shape and finiteness.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[DenseVector]) -> Result<Self, LinalgError> {
        let first = columns.first().ok_or(LinalgError::Empty)?;
        let rows = first.dim();
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.dim() != rows {
                return Err(LinalgError::DimensionMismatch(format!(
                    "column {j} has length {} instead of {rows}",
                    c.dim()
                )));
            }
            data.extend_from_slice(c.as_slice());
        }
        Ok(DenseMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_vector(&self, j: usize) -> DenseVector {
        DenseVector::from_vec(self.column(j).to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &DenseVector) -> DenseVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for j in 0..self.cols {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * vj;
            }
        }
        DenseVector::from_vec(out)
    }

    /// `selfᵀ v`
    pub fn tr_mul_vec(&self, v: &DenseVector) -> DenseVector {
        assert_eq!(self.rows, v.dim(), "matrix-vector dimension mismatch");
        DenseVector::from_vec(
            (0..self.cols)
                .map(|j| self.column(j).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    pub fn mul_mat(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matrix-matrix dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == 0.0 {
                    continue;
                }
                for i in 0..self.rows {
                    out.data[j * self.rows + i] += self.data[k * self.rows + i] * b;
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Adds `alpha * u vᵀ` in place.
    pub fn add_outer(&mut self, alpha: f64, u: &DenseVector, v: &DenseVector) {
        assert_eq!(self.rows, u.dim());
        assert_eq!(self.cols, v.dim());
        for j in 0..self.cols {
            let coef = alpha * v[j];
            if coef == 0.0 {
                continue;
            }
            for i in 0..self.rows {
                self.data[j * self.rows + i] += coef * u[i];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        DenseVector::from_vec(self.data.clone()).norm()
    }

    /// Estimate of the induced 2-norm by power iteration on `AᵀA`. The
    /// estimate never exceeds the true norm by more than roundoff.
    pub fn spectral_norm(&self) -> f64 {
        let mut v = DenseVector::from_elem(self.cols, 1.0 / (self.cols as f64).sqrt());
        let mut estimate = 0.0;
        for _ in 0..200 {
            let w = self.tr_mul_vec(&self.mul_vec(&v));
            let norm = w.norm();
            if norm <= ZERO_NORM {
                return 0.0;
            }
            let next = norm.sqrt();
            v = w.scaled(1.0 / norm);
            if (next - estimate).abs() <= 1e-14 * next {
                return next;
            }
            estimate = next;
        }
        estimate
    }

    fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                DenseVector::from_vec((0..self.cols).map(|j| self[(i, j)]).collect()).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<f64> = (0..self.cols).map(|j| self[(i, j)]).collect();
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// Row-pivoted LU factorization `P A = L U` of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    // L below the diagonal (unit diagonal implied), U on and above it.
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factorizes `a`; fails when a pivot is smaller than
    /// `PIVOT_RELATIVE` times the largest row norm of `a`.
    pub fn factorize(a: &DenseMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows;
        let threshold = PIVOT_RELATIVE * a.max_row_norm();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 || pivot_abs < threshold {
                return Err(LinalgError::SingularMatrix {
                    column: k,
                    pivot: pivot_abs,
                });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DenseVector) -> Result<DenseVector, LinalgError> {
        if b.dim() != self.n {
            return Err(LinalgError::DimensionMismatch(format!(
                "right-hand side has length {}, expected {}",
                b.dim(),
                self.n
            )));
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(DenseVector::from_vec(x))
    }

    pub fn determinant(&self) -> f64 {
        let mut det: f64 = (0..self.n).map(|i| self.lu[(i, i)]).product();
        // parity of the permutation
        let mut seen = vec![false; self.n];
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.perm[i];
                len += 1;
            }
            if len % 2 == 0 {
                det = -det;
            }
        }
        det
    }
}

/// Solves `A x = b` through a row-pivoted LU factorization.
pub fn solve_linear(a: &DenseMatrix, b: &DenseVector) -> Result<DenseVector, LinalgError> {
    if a.rows != b.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix with right-hand side of length {}",
            a.rows,
            a.cols,
            b.dim()
        )));
    }
    LuFactors::factorize(a)?.solve(b)
}

/// Thin QR factors `M = Q R` with `Q` having orthonormal columns and every
/// diagonal entry of `R` non-negative.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

impl QrFactors {
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.r.cols()).map(|i| self.r[(i, i)]).collect()
    }
}

/// Householder QR of an `n x m` matrix with `m <= n`, returning the thin
/// factors. Rank deficiency shows up as zero diagonal entries in `R`.
pub fn qr_nonneg_diag(m: &DenseMatrix) -> Result<QrFactors, LinalgError> {
    let (n, cols) = (m.rows(), m.cols());
    if cols > n {
        return Err(LinalgError::DimensionMismatch(format!(
            "QR needs at most as many columns as rows, got {n}x{cols}"
        )));
    }
    let mut work = m.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let x: Vec<f64> = (k..n).map(|i| work[(i, k)]).collect();
        let alpha = DenseVector::from_vec(x.clone()).norm();
        let mut v = x;
        if alpha > 0.0 {
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
        }
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let dot: f64 = (k..n).map(|i| v[i - k] * work[(i, j)]).sum();
                let coef = 2.0 * dot / vnorm2;
                for i in k..n {
                    work[(i, j)] -= coef * v[i - k];
                }
            }
            for i in k + 1..n {
                work[(i, k)] = 0.0;
            }
        }
        reflectors.push(v);
    }

    // Accumulate the first `cols` columns of Q = H_0 H_1 ... H_{cols-1}.
    let mut q = DenseMatrix::zeros(n, cols);
    for j in 0..cols {
        q[(j, j)] = 1.0;
    }
    for k in (0..cols).rev() {
        let v = &reflectors[k];
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in 0..cols {
            let dot: f64 = (k..n).map(|i| v[i - k] * q[(i, j)]).sum();
            let coef = 2.0 * dot / vnorm2;
            for i in k..n {
                q[(i, j)] -= coef * v[i - k];
            }
        }
    }

    let mut r = DenseMatrix::zeros(cols, cols);
    for j in 0..cols {
        for i in 0..=j {
            r[(i, j)] = work[(i, j)];
        }
    }
    for i in 0..cols {
        if r[(i, i)] < 0.0 {
            for j in i..cols {
                r[(i, j)] = -r[(i, j)];
            }
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Ok(QrFactors { q, r })
}

/// Orthogonal projection of `v` onto the span of `basis`.
///
/// An empty basis projects everything to zero. Columns that are numerically
/// dependent on the preceding ones are dropped.
pub fn project_onto_span(basis: &[DenseVector], v: &DenseVector) -> Result<DenseVector, LinalgError> {
    let q = span_basis(basis, v.dim())?;
    Ok(apply_projector(&q, v, v.dim()))
}

/// `v - P v` for the orthogonal projector `P` onto the span of `basis`, with
/// one reorthogonalization pass so the result stays orthogonal to the span
/// even when it is much shorter than `v`.
pub fn remove_span(basis: &[DenseVector], v: &DenseVector) -> Result<DenseVector, LinalgError> {
    let n = v.dim();
    let q = span_basis(basis, n)?;
    if q.is_empty() {
        return Ok(v.clone());
    }
    let once = v.sub(&apply_projector(&q, v, n));
    Ok(once.sub(&apply_projector(&q, &once, n)))
}

/// Orthonormal columns spanning the nonzero, nondegenerate part of `basis`.
fn span_basis(basis: &[DenseVector], n: usize) -> Result<Vec<DenseVector>, LinalgError> {
    let usable: Vec<&DenseVector> = basis.iter().filter(|b| b.norm() > ZERO_NORM).collect();
    if let Some(bad) = usable.iter().find(|b| b.dim() != n) {
        return Err(LinalgError::DimensionMismatch(format!(
            "basis vector of length {} for a vector of length {n}",
            bad.dim()
        )));
    }
    if usable.is_empty() {
        return Ok(Vec::new());
    }
    let mut columns: Vec<DenseVector> = usable
        .iter()
        .map(|b| b.normalized().expect("filtered nonzero"))
        .collect();
    if columns.len() > n {
        columns = independent_subset(columns, n)?;
    }
    let qr = qr_nonneg_diag(&DenseMatrix::from_columns(&columns)?)?;
    Ok((0..columns.len())
        .filter(|&j| qr.r[(j, j)] > DEPENDENT_COLUMN)
        .map(|j| qr.q.column_vector(j))
        .collect())
}

fn apply_projector(q: &[DenseVector], v: &DenseVector, n: usize) -> DenseVector {
    let mut out = DenseVector::zeros(n);
    for qj in q {
        out = out.add_scaled(qj.dot(v), qj);
    }
    out
}

/// Keeps columns in order, skipping each one that is dependent on the ones
/// already kept, and stops once `n` are kept.
fn independent_subset(columns: Vec<DenseVector>, n: usize) -> Result<Vec<DenseVector>, LinalgError> {
    let mut kept: Vec<DenseVector> = Vec::with_capacity(n);
    for c in columns {
        if kept.len() == n {
            break;
        }
        kept.push(c);
        let qr = qr_nonneg_diag(&DenseMatrix::from_columns(&kept)?)?;
        let last = kept.len() - 1;
        if qr.r[(last, last)] <= DEPENDENT_COLUMN {
            kept.pop();
        }
    }
    Ok(kept)
}

/// Determinant of the Gram matrix of the normalized inputs, a value in
/// `[0, 1]` that measures how far the vectors are from linear dependence.
/// The empty set gives 1.
pub fn gram_determinant(vectors: &[DenseVector]) -> Result<f64, LinalgError> {
    let Some(first) = vectors.first() else {
        return Ok(1.0);
    };
    let n = first.dim();
    let mut columns = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        if v.dim() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector {i} has length {} instead of {n}",
                v.dim()
            )));
        }
        columns.push(v.normalized().ok_or(LinalgError::ZeroVector(i))?);
    }
    if columns.len() > n {
        return Ok(0.0);
    }
    let qr = qr_nonneg_diag(&DenseMatrix::from_columns(&columns)?)?;
    Ok(qr.r_diagonal().iter().map(|d| d * d).product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_vec_eq(a: &DenseVector, b: &[f64], tol: f64) {
        assert_eq!(a.dim(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(*x, *y, epsilon = tol);
        }
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = solve_linear(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0].into()).unwrap();
        assert_vec_eq(&x, &[1.0, 2.0, 3.0], 0.0);
        let x = solve_linear(&DenseMatrix::diagonal(&[2.0, 4.0]), &[2.0, 4.0].into()).unwrap();
        assert_vec_eq(&x, &[1.0, 1.0], 0.0);
    }

    #[test]
    fn solve_rank_deficient_is_singular() {
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            solve_linear(&a, &[1.0, 0.0].into()),
            Err(LinalgError::SingularMatrix { .. })
        ));
        assert!(matches!(
            solve_linear(&DenseMatrix::zeros(2, 2), &[1.0, 0.0].into()),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let x = solve_linear(&a, &[2.0, 3.0].into()).unwrap();
        assert_vec_eq(&x, &[3.0, 2.0], 1e-15);
    }

    #[test]
    fn lu_determinant_matches_hand_value() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]);
        let det = LuFactors::factorize(&a).unwrap().determinant();
        assert_abs_diff_eq!(det, -6.0, epsilon = 1e-14);
    }

    #[test]
    fn qr_sign_convention() {
        let m = DenseMatrix::from_rows(&[&[-1.0], &[0.0]]);
        let qr = qr_nonneg_diag(&m).unwrap();
        assert_abs_diff_eq!(qr.r[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(qr.q[(0, 0)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(qr.q[(1, 0)], 0.0, epsilon = 1e-15);

        let qr = qr_nonneg_diag(&DenseMatrix::identity(2)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(qr.q[(i, j)], e, epsilon = 1e-15);
                assert_abs_diff_eq!(qr.r[(i, j)], e, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn qr_duplicated_column_has_zero_diagonal() {
        let m = DenseMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]);
        let qr = qr_nonneg_diag(&m).unwrap();
        assert_abs_diff_eq!(qr.r[(1, 1)], 0.0, epsilon = 1e-15);
        assert!(qr.r[(0, 0)] >= 0.0);
    }

    #[test]
    fn qr_rejects_wide_matrix() {
        assert!(qr_nonneg_diag(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn projection_examples() {
        let p = project_onto_span(&[DenseVector::unit(2, 0)], &[3.0, 4.0].into()).unwrap();
        assert_vec_eq(&p, &[3.0, 0.0], 1e-15);

        let p = project_onto_span(&[], &[3.0, 4.0].into()).unwrap();
        assert_vec_eq(&p, &[0.0, 0.0], 0.0);

        let u = DenseVector::from([1.0, 1.0]).scaled(1.0 / 2f64.sqrt());
        let p = project_onto_span(&[u], &[1.0, 0.0].into()).unwrap();
        assert_vec_eq(&p, &[0.5, 0.5], 1e-15);
    }

    #[test]
    fn projection_drops_dependent_columns() {
        let e1 = DenseVector::unit(3, 0);
        let p = project_onto_span(&[e1.clone(), e1.scaled(2.0)], &[1.0, 2.0, 3.0].into()).unwrap();
        assert_vec_eq(&p, &[1.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn gram_examples() {
        let e1 = DenseVector::unit(2, 0);
        let e2 = DenseVector::unit(2, 1);
        assert_abs_diff_eq!(gram_determinant(&[e1.clone(), e2.clone()]).unwrap(), 1.0, epsilon = 1e-15);
        let diag = e1.add(&e2).scaled(1.0 / 2f64.sqrt());
        assert_abs_diff_eq!(gram_determinant(&[e1.clone(), diag]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(gram_determinant(&[e1.clone(), e1.clone()]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(gram_determinant(&[]).unwrap(), 1.0);
    }

    #[test]
    fn gram_rejects_zero_vector() {
        let e1 = DenseVector::unit(2, 0);
        assert_eq!(
            gram_determinant(&[e1, DenseVector::zeros(2)]),
            Err(LinalgError::ZeroVector(1))
        );
    }

    fn matrix_strategy(max_n: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1..=max_n).prop_flat_map(move |n| {
            (1..=n).prop_flat_map(move |m| {
                (Just(n), Just(m), prop::collection::vec(-1.0..1.0f64, n * m))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn qr_reconstructs_and_is_orthonormal((n, m, data) in matrix_strategy(50)) {
            let a = DenseMatrix::from_column_major(n, m, data).unwrap();
            let qr = qr_nonneg_diag(&a).unwrap();
            let recon = qr.q.mul_mat(&qr.r);
            prop_assert!(a.sub(&recon).frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1e-300));
            let qtq = qr.q.transpose().mul_mat(&qr.q);
            prop_assert!(qtq.sub(&DenseMatrix::identity(m)).frobenius_norm() <= 1e-12);
            for i in 0..m {
                prop_assert!(qr.r[(i, i)] >= 0.0);
                for j in 0..i {
                    prop_assert_eq!(qr.r[(i, j)], 0.0);
                }
            }
        }

        #[test]
        fn solve_residual_is_small(n in 1usize..20, data in prop::collection::vec(-1.0..1.0f64, 400), rhs in prop::collection::vec(-1.0..1.0f64, 20)) {
            // Diagonally dominant, hence well conditioned.
            let mut a = DenseMatrix::from_column_major(n, n, data[..n * n].to_vec()).unwrap();
            for i in 0..n {
                a[(i, i)] += n as f64 + 1.0;
            }
            let b = DenseVector::from_vec(rhs[..n].to_vec());
            let x = solve_linear(&a, &b).unwrap();
            let residual = a.mul_vec(&x).sub(&b).norm();
            prop_assert!(residual <= 1e-12 * (a.spectral_norm() * x.norm() + b.norm()));
        }

        #[test]
        fn projection_is_idempotent_and_orthogonal(
            n in 2usize..8,
            k in 0usize..4,
            data in prop::collection::vec(-1.0..1.0f64, 32),
            v in prop::collection::vec(-1.0..1.0f64, 8),
        ) {
            let k = k.min(n - 1);
            let basis: Vec<DenseVector> = (0..k)
                .map(|j| DenseVector::from_vec(data[j * n..(j + 1) * n].to_vec()))
                .collect();
            let v = DenseVector::from_vec(v[..n].to_vec());
            let pv = project_onto_span(&basis, &v).unwrap();
            let ppv = project_onto_span(&basis, &pv).unwrap();
            prop_assert!(ppv.sub(&pv).norm() <= 1e-12);
            let residual = v.sub(&pv);
            for b in &basis {
                prop_assert!(residual.dot(b).abs() <= 1e-12 * (1.0 + b.norm()));
            }
        }

        #[test]
        fn remainder_keeps_inner_product_identity_near_the_span(
            n in 3usize..10,
            data in prop::collection::vec(-1.0..1.0f64, 40),
            offset in prop::collection::vec(-1.0..1.0f64, 10),
            tiny in -5.0..-1.0f64,
        ) {
            // v lies within 10^tiny of span(basis), so the remainder is short.
            let basis: Vec<DenseVector> = (0..n - 1)
                .map(|j| DenseVector::from_vec(data[j * 4 % 30..j * 4 % 30 + n].to_vec()))
                .collect();
            prop_assume!(gram_determinant(&basis).map(|d| d > 1e-6).unwrap_or(false));
            let mut v = DenseVector::zeros(n);
            for (j, b) in basis.iter().enumerate() {
                v = v.add_scaled(offset[j], b);
            }
            v = v.add_scaled(10f64.powf(tiny), &DenseVector::from_vec(offset[..n].to_vec()));
            let r = remove_span(&basis, &v).unwrap();
            prop_assume!(r.norm() > 0.0 && v.norm() <= 1e5 * r.norm());
            let rr = r.dot(&r);
            prop_assert!((r.dot(&v) - rr).abs() <= 1e-10 * rr, "ratio {:e} err {:e}", v.norm() / r.norm(), (r.dot(&v) - rr).abs() / rr);
            prop_assert!(r.norm() <= v.norm() * (1.0 + 1e-12));
        }

        #[test]
        fn gram_determinant_is_permutation_and_scale_invariant(
            data in prop::collection::vec(-1.0..1.0f64, 12),
            scales in prop::collection::vec(0.01..100.0f64, 3),
        ) {
            let vs: Vec<DenseVector> = (0..3)
                .map(|j| DenseVector::from_vec(data[j * 4..(j + 1) * 4].to_vec()))
                .collect();
            prop_assume!(vs.iter().all(|v| v.norm() > 1e-3));
            let base = gram_determinant(&vs).unwrap();
            prop_assert!((-1e-14..=1.0 + 1e-14).contains(&base));
            let permuted = vec![vs[2].clone(), vs[0].clone(), vs[1].clone()];
            prop_assert!((gram_determinant(&permuted).unwrap() - base).abs() <= 1e-12);
            let scaled: Vec<DenseVector> = vs.iter().zip(&scales).map(|(v, s)| v.scaled(*s)).collect();
            prop_assert!((gram_determinant(&scaled).unwrap() - base).abs() <= 1e-12);
        }
    }
}

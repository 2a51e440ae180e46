//! Small dense linear algebra: rank, Gauss–Jordan inversion, independent
//! column selection and monomial detection.
//!
//! Pivot thresholds are relative: a pivot counts iff `|pivot| > tol * max|m|`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {actual}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular (pivot {pivot} at step {step} below threshold)")]
    Singular { step: usize, pivot: f64 },
    #[error("matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Matrix<T> {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::Shape(format!(
                    "ragged rows: expected {cols} columns, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Permutation matrix with a one at `(i, perm[i])` for every row `i`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut m = Self::zeros(n, n);
        for (i, &j) in perm.iter().enumerate() {
            m[(i, j)] = T::one();
        }
        m
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// Largest absolute entry, zero for an empty matrix.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(LinalgError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(LinalgError::Shape(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// Submatrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out[(r, j)] = self[(r, c)];
            }
        }
        out
    }

    /// Max-norm distance `max |a_ij - b_ij|`; infinite on shape mismatch.
    pub fn max_diff(&self, other: &Self) -> T {
        if self.shape() != other.shape() {
            return T::infinity();
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn check_finite<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    match m.data.iter().position(|x| !x.is_finite()) {
        Some(idx) => Err(LinalgError::NonFinite {
            row: idx / m.cols.max(1),
            col: idx % m.cols.max(1),
        }),
        None => Ok(()),
    }
}

/// Row reduction with partial pivoting. Returns the pivot columns in
/// left-to-right order.
fn pivot_columns<T: Scalar>(m: &Matrix<T>, tol: T) -> Vec<usize> {
    let scale = m.max_abs();
    if scale == T::zero() {
        return Vec::new();
    }
    let threshold = tol * scale;
    let mut a = m.clone();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..a.cols {
        if r == a.rows {
            break;
        }
        let (p, best) = (r..a.rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= threshold {
            continue;
        }
        if p != r {
            for j in 0..a.cols {
                let tmp = a[(r, j)];
                a[(r, j)] = a[(p, j)];
                a[(p, j)] = tmp;
            }
        }
        let pivot = a[(r, c)];
        for i in (r + 1)..a.rows {
            let factor = a[(i, c)] / pivot;
            if factor == T::zero() {
                continue;
            }
            for j in c..a.cols {
                a[(i, j)] = a[(i, j)] - factor * a[(r, j)];
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Numerical rank via row reduction with partial pivoting.
pub fn rank<T: Scalar>(m: &Matrix<T>, tol: T) -> Result<usize> {
    check_finite(m)?;
    Ok(pivot_columns(m, tol).len())
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert<T: Scalar>(m: &Matrix<T>, tol: T) -> Result<Matrix<T>> {
    check_finite(m)?;
    if !m.is_square() {
        return Err(LinalgError::Shape(format!(
            "cannot invert a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let scale = m.max_abs();
    let threshold = tol * scale;
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for c in 0..n {
        let (p, best) = (c..n)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((c, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= threshold || best == T::zero() {
            return Err(LinalgError::Singular {
                step: c,
                pivot: best.to_f64_lossy(),
            });
        }
        if p != c {
            for j in 0..n {
                let tmp = a[(c, j)];
                a[(c, j)] = a[(p, j)];
                a[(p, j)] = tmp;
                let tmp = inv[(c, j)];
                inv[(c, j)] = inv[(p, j)];
                inv[(p, j)] = tmp;
            }
        }
        let pivot = a[(c, c)];
        for j in 0..n {
            a[(c, j)] = a[(c, j)] / pivot;
            inv[(c, j)] = inv[(c, j)] / pivot;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let factor = a[(i, c)];
            if factor == T::zero() {
                continue;
            }
            for j in 0..n {
                a[(i, j)] = a[(i, j)] - factor * a[(c, j)];
                inv[(i, j)] = inv[(i, j)] - factor * inv[(c, j)];
            }
        }
    }
    Ok(inv)
}

/// A choice of `n` linearly independent columns of a full-row-rank `n x m`
/// matrix `W`, with `W1 = W[:, basis]`, `W2 = W[:, rest]`, `V = W1^-1` and
/// `U = V W2` so that `W2 = W1 U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSplit<T: Scalar = f64> {
    pub basis_cols: Vec<usize>,
    pub rest_cols: Vec<usize>,
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub v: Matrix<T>,
    /// `n x (m - n)`; has zero columns when `W` is square.
    pub u: Matrix<T>,
}

impl<T: Scalar> ColumnSplit<T> {
    /// Builds the split for an explicit basis index set. Fails if the
    /// selected columns are singular.
    pub fn from_basis(m: &Matrix<T>, basis_cols: &[usize], tol: T) -> Result<Self> {
        let n = m.rows;
        if basis_cols.len() != n {
            return Err(LinalgError::Shape(format!(
                "basis needs {n} columns, got {}",
                basis_cols.len()
            )));
        }
        let mut seen = vec![false; m.cols];
        for &c in basis_cols {
            if c >= m.cols || seen[c] {
                return Err(LinalgError::Shape(format!(
                    "invalid basis column {c} for {} columns",
                    m.cols
                )));
            }
            seen[c] = true;
        }
        let rest_cols: Vec<usize> = (0..m.cols).filter(|&c| !seen[c]).collect();
        let w1 = m.select_columns(basis_cols);
        let w2 = m.select_columns(&rest_cols);
        let v = invert(&w1, tol)?;
        let u = v.matmul(&w2)?;
        Ok(Self {
            basis_cols: basis_cols.to_vec(),
            rest_cols,
            w1,
            w2,
            v,
            u,
        })
    }

    /// Row count `n` of the split matrix.
    pub fn n(&self) -> usize {
        self.basis_cols.len()
    }

    /// Column count `m` of the split matrix.
    pub fn m(&self) -> usize {
        self.basis_cols.len() + self.rest_cols.len()
    }

    /// Places `basis_part` at the basis coordinates and `rest_part` at the
    /// rest coordinates of a length-`m` vector.
    pub fn embed(&self, basis_part: &[T], rest_part: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.m()];
        for (&c, &x) in self.basis_cols.iter().zip(basis_part) {
            out[c] = x;
        }
        for (&c, &x) in self.rest_cols.iter().zip(rest_part) {
            out[c] = x;
        }
        out
    }

    /// Coordinates of `x` at the rest columns.
    pub fn rest_of(&self, x: &[T]) -> Vec<T> {
        self.rest_cols.iter().map(|&c| x[c]).collect()
    }

    /// `max(|V W1 - I|, |W1 U - W2|)`.
    pub fn residual(&self) -> T {
        let n = self.n();
        let vw = self.v.matmul(&self.w1).expect("square");
        let a = vw.max_diff(&Matrix::identity(n));
        let b = self.w1.matmul(&self.u).expect("shapes").max_diff(&self.w2);
        a.max(b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SplitMode {
    /// Leftmost pivot columns from row reduction.
    #[default]
    Greedy,
    /// All invertible column subsets in lexicographic order, examining at
    /// most `budget` candidate subsets.
    Exhaustive { budget: usize },
}

impl SplitMode {
    pub const DEFAULT_BUDGET: usize = 10_000;

    pub fn exhaustive() -> Self {
        SplitMode::Exhaustive {
            budget: Self::DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet<T: Scalar = f64> {
    pub splits: Vec<ColumnSplit<T>>,
    /// Set when the exhaustive budget ran out before all subsets were seen.
    pub truncated: bool,
}

/// Selects `n` independent columns of an `n x k` matrix (`k >= n`).
pub fn column_split<T: Scalar>(m: &Matrix<T>, tol: T, mode: SplitMode) -> Result<SplitSet<T>> {
    check_finite(m)?;
    let n = m.rows;
    if m.cols < n {
        return Err(LinalgError::Shape(format!(
            "column split needs at least as many columns as rows, got {}x{}",
            m.rows, m.cols
        )));
    }
    let pivots = pivot_columns(m, tol);
    if pivots.len() < n {
        return Err(LinalgError::RankDeficient {
            rank: pivots.len(),
            expected: n,
        });
    }
    match mode {
        SplitMode::Greedy => Ok(SplitSet {
            splits: vec![ColumnSplit::from_basis(m, &pivots, tol)?],
            truncated: false,
        }),
        SplitMode::Exhaustive { budget } => {
            let mut splits = Vec::new();
            let mut examined = 0usize;
            let mut truncated = false;
            for subset in Combinations::new(m.cols, n) {
                if examined == budget {
                    truncated = true;
                    break;
                }
                examined += 1;
                if let Ok(split) = ColumnSplit::from_basis(m, &subset, tol) {
                    splits.push(split);
                }
            }
            Ok(SplitSet { splits, truncated })
        }
    }
}

/// Lexicographic `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        let current = (k <= n).then(|| (0..k).collect());
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in (i + 1)..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

/// True iff every entry is `>= -tol`.
pub fn is_nonneg<T: Scalar>(m: &Matrix<T>, tol: T) -> bool {
    first_negative(m, tol).is_none()
}

/// First entry (row-major) below `-tol`, with its value.
pub fn first_negative<T: Scalar>(m: &Matrix<T>, tol: T) -> Option<(usize, usize, T)> {
    m.data
        .iter()
        .position(|&x| x < -tol)
        .map(|idx| (idx / m.cols, idx % m.cols, m.data[idx]))
}

/// `D P` factorization of a non-negative monomial matrix: row `i` holds
/// `diag[i]` at column `perm[i]` and zeros elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<T: Scalar = f64> {
    pub diag: Vec<T>,
    pub perm: Vec<usize>,
}

impl<T: Scalar> Monomial<T> {
    pub fn to_matrix(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.diag.len(), self.diag.len());
        for (i, (&d, &j)) in self.diag.iter().zip(&self.perm).enumerate() {
            m[(i, j)] = d;
        }
        m
    }

    /// `(D P)^-1 = P^T D^-1`, computed exactly entry by entry.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, (&d, &j)) in self.diag.iter().zip(&self.perm).enumerate() {
            m[(j, i)] = T::one() / d;
        }
        m
    }
}

/// Detects a positive monomial matrix: exactly one entry with `|x| > tol` per
/// row and per column, and that entry positive.
pub fn is_monomial<T: Scalar>(m: &Matrix<T>, tol: T) -> Option<Monomial<T>> {
    if !m.is_square() || m.rows == 0 {
        return None;
    }
    let n = m.rows;
    let mut perm = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut col_used = vec![false; n];
    for r in 0..n {
        let mut hit = None;
        for c in 0..n {
            if m[(r, c)].abs() > tol {
                if hit.is_some() {
                    return None;
                }
                hit = Some(c);
            }
        }
        let c = hit?;
        if m[(r, c)] <= T::zero() || col_used[c] {
            return None;
        }
        col_used[c] = true;
        perm.push(c);
        diag.push(m[(r, c)]);
    }
    let mono = Monomial { diag, perm };
    (mono.to_matrix().max_diff(m) <= tol).then_some(mono)
}

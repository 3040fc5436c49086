//! Small dense linear algebra for the compact representations.
//!
//! Every matrix here has order at most `2m + O(1)` (rarely more than ~100),
//! so the kernels are plain loops without blocking.
//!
//! **Storage order.** [`DenseMatrix`] is column-major: entry `(i, j)` lives at
//! `data[i + j * rows]`. All modules in this crate rely on that layout.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative tolerance for singular pivots, scaled by the matrix ∞-norm.
pub const SINGULAR_RTOL: f64 = 1e-14;

/// Relative tolerance of the symmetry check, scaled by `max(1, ‖A‖∞)`.
pub const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("triangular matrix is singular at diagonal entry {index}")]
    SingularTriangular { index: usize },
    #[error("middle matrix is singular (pivot {index})")]
    SingularMiddleMatrix { index: usize },
    #[error("shifted operator K + {shift:e} I is singular or not positive definite")]
    SingularShift { shift: f64 },
    #[error("matrix is not symmetric (|a_ij - a_ji| = {gap:e})")]
    NotSymmetric { gap: f64 },
    #[error("{kind} matrix has a nonzero entry at ({row}, {col})")]
    NotTriangular {
        kind: &'static str,
        row: usize,
        col: usize,
    },
}

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.5e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
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

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    /// Builds an `n x j` matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, cols: &[&[f64]]) -> Self {
        let mut data = Vec::with_capacity(n * cols.len());
        for c in cols {
            assert_eq!(c.len(), n, "column length");
            data.extend_from_slice(c);
        }
        Self {
            rows: n,
            cols: cols.len(),
            data,
        }
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

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        let mut y = vec![0.0; self.rows];
        for (j, xj) in x.iter().enumerate() {
            if *xj == 0.0 {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension");
        (0..self.cols)
            .map(|j| self.col(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let y = self.matvec(other.col(j));
            out.data[j * self.rows..(j + 1) * self.rows].copy_from_slice(&y);
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        DenseMatrix { data, ..*self }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { data, ..*self }
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        let data = self.data.iter().map(|a| alpha * a).collect();
        DenseMatrix { data, ..*self }
    }

    pub fn add_diag(&mut self, alpha: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += alpha;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Symmetry check with tolerance `1e-12 * max(1, ‖A‖∞)`.
    pub fn check_symmetric(&self) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        let tol = SYMMETRY_RTOL * self.norm_inf().max(1.0);
        let mut gap = 0.0_f64;
        for j in 0..self.cols {
            for i in j + 1..self.rows {
                gap = gap.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        if gap > tol {
            return Err(LinalgError::NotSymmetric { gap });
        }
        Ok(())
    }

    /// Copy of `self` with row 0 and column 0 removed.
    pub fn without_first(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows - 1, self.cols - 1, |i, j| self[(i + 1, j + 1)])
    }

    /// Copy of `self` with row `r` and column `c` removed.
    pub fn without_row_col(&self, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows - 1, self.cols - 1, |i, j| {
            let ii = if i >= r { i + 1 } else { i };
            let jj = if j >= c { j + 1 } else { j };
            self[(ii, jj)]
        })
    }

    /// Assembles `[[a11, a12], [a21, a22]]`.
    pub fn block2x2(
        a11: &DenseMatrix,
        a12: &DenseMatrix,
        a21: &DenseMatrix,
        a22: &DenseMatrix,
    ) -> DenseMatrix {
        assert_eq!(a11.rows, a12.rows);
        assert_eq!(a21.rows, a22.rows);
        assert_eq!(a11.cols, a21.cols);
        assert_eq!(a12.cols, a22.cols);
        let (r1, c1) = (a11.rows, a11.cols);
        DenseMatrix::from_fn(r1 + a21.rows, c1 + a12.cols, |i, j| match (i < r1, j < c1) {
            (true, true) => a11[(i, j)],
            (true, false) => a12[(i, j - c1)],
            (false, true) => a21[(i - r1, j)],
            (false, false) => a22[(i - r1, j - c1)],
        })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangularKind {
    /// Upper triangular including the diagonal.
    Upper,
    StrictlyLower,
    Diagonal,
}

impl TriangularKind {
    fn name(self) -> &'static str {
        match self {
            Self::Upper => "upper",
            Self::StrictlyLower => "strictly-lower",
            Self::Diagonal => "diagonal",
        }
    }

    fn allows(self, i: usize, j: usize) -> bool {
        match self {
            Self::Upper => i <= j,
            Self::StrictlyLower => i > j,
            Self::Diagonal => i == j,
        }
    }
}

/// A square matrix with exact zeros outside its triangular pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularMatrix {
    kind: TriangularKind,
    inner: DenseMatrix,
}

impl TriangularMatrix {
    pub fn new(kind: TriangularKind, inner: DenseMatrix) -> Result<Self, LinalgError> {
        if !inner.is_square() {
            return Err(LinalgError::DimensionMismatch {
                expected: inner.rows,
                got: inner.cols,
            });
        }
        for j in 0..inner.cols {
            for i in 0..inner.rows {
                if !kind.allows(i, j) && inner[(i, j)] != 0.0 {
                    return Err(LinalgError::NotTriangular {
                        kind: kind.name(),
                        row: i,
                        col: j,
                    });
                }
            }
        }
        Ok(Self { kind, inner })
    }

    pub fn empty(kind: TriangularKind) -> Self {
        Self {
            kind,
            inner: DenseMatrix::zeros(0, 0),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self {
            kind: TriangularKind::Diagonal,
            inner: DenseMatrix::from_diag(d),
        }
    }

    pub fn kind(&self) -> TriangularKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.inner.rows()
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.inner
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.inner
    }

    pub fn diag(&self) -> Vec<f64> {
        self.inner.diag()
    }
}

/// Solves `R x = b` (or `Rᵀ x = b`) by substitution.
///
/// `R` must be upper or diagonal. A diagonal entry with
/// `|R_ii| <= 1e-14 * ‖R‖∞` is reported as [`LinalgError::SingularTriangular`].
pub fn tri_solve_upper(
    r: &TriangularMatrix,
    b: &[f64],
    transpose: bool,
) -> Result<Vec<f64>, LinalgError> {
    assert!(
        matches!(r.kind, TriangularKind::Upper | TriangularKind::Diagonal),
        "tri_solve_upper needs an upper triangular matrix"
    );
    let m = &r.inner;
    let n = m.rows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let tol = SINGULAR_RTOL * m.norm_inf();
    for i in 0..n {
        if m[(i, i)].abs() <= tol {
            return Err(LinalgError::SingularTriangular { index: i });
        }
    }
    let mut x = b.to_vec();
    if !transpose {
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= m[(i, j)] * x[j];
            }
            x[i] = acc / m[(i, i)];
        }
    } else {
        // Rᵀ is lower triangular: forward substitution down column i of R.
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= m[(j, i)] * x[j];
            }
            x[i] = acc / m[(i, i)];
        }
    }
    Ok(x)
}

/// Eigenvalue sign counts of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn is_positive_definite(&self) -> bool {
        self.negative == 0 && self.zero == 0
    }
}

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One(f64),
    Two { a11: f64, a21: f64, a22: f64 },
}

/// Bunch–Kaufman factorization `P A Pᵀ = L D Lᵀ` of a symmetric, possibly
/// indefinite matrix, with 1x1 and 2x2 pivots in `D`.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    l: DenseMatrix,
    pivots: Vec<(usize, Pivot)>,
    perm: Vec<usize>,
}

impl Ldlt {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        a.check_symmetric()?;
        let n = a.rows();
        let mut w = a.clone();
        let mut l = DenseMatrix::identity(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::new();
        let tol = SINGULAR_RTOL * a.norm_inf();
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;

        let swap = |w: &mut DenseMatrix, l: &mut DenseMatrix, k: usize, p: usize, q: usize| {
            if p == q {
                return;
            }
            for c in 0..n {
                let t = w[(p, c)];
                w[(p, c)] = w[(q, c)];
                w[(q, c)] = t;
            }
            for r in 0..n {
                let t = w[(r, p)];
                w[(r, p)] = w[(r, q)];
                w[(r, q)] = t;
            }
            for c in 0..k {
                let t = l[(p, c)];
                l[(p, c)] = l[(q, c)];
                l[(q, c)] = t;
            }
        };

        let mut k = 0;
        while k < n {
            let absakk = w[(k, k)].abs();
            let (mut imax, mut colmax) = (k, 0.0);
            for i in k + 1..n {
                if w[(i, k)].abs() > colmax {
                    colmax = w[(i, k)].abs();
                    imax = i;
                }
            }
            if absakk.max(colmax) <= tol {
                return Err(LinalgError::SingularMiddleMatrix { index: k });
            }
            let (kp, size) = if absakk >= alpha * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0_f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(w[(imax, j)].abs());
                    }
                }
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    (k, 1)
                } else if w[(imax, imax)].abs() >= alpha * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + size - 1;
            if kp != kk {
                swap(&mut w, &mut l, k, kk, kp);
                perm.swap(kk, kp);
            }
            if size == 1 {
                let d = w[(k, k)];
                if d.abs() <= tol {
                    return Err(LinalgError::SingularMiddleMatrix { index: k });
                }
                for j in k + 1..n {
                    let cj = w[(j, k)];
                    if cj == 0.0 {
                        continue;
                    }
                    for i in k + 1..n {
                        w[(i, j)] -= w[(i, k)] * cj / d;
                    }
                }
                for i in k + 1..n {
                    l[(i, k)] = w[(i, k)] / d;
                }
                pivots.push((k, Pivot::One(d)));
            } else {
                let (a11, a21, a22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a11 * a22 - a21 * a21;
                if det.abs() <= tol * a11.abs().max(a21.abs()).max(a22.abs()) {
                    return Err(LinalgError::SingularMiddleMatrix { index: k });
                }
                let (i11, i12, i22) = (a22 / det, -a21 / det, a11 / det);
                for i in k + 2..n {
                    let (c1, c2) = (w[(i, k)], w[(i, k + 1)]);
                    l[(i, k)] = c1 * i11 + c2 * i12;
                    l[(i, k + 1)] = c1 * i12 + c2 * i22;
                }
                for j in k + 2..n {
                    let (c1, c2) = (w[(j, k)], w[(j, k + 1)]);
                    for i in k + 2..n {
                        w[(i, j)] -= l[(i, k)] * c1 + l[(i, k + 1)] * c2;
                    }
                }
                pivots.push((k, Pivot::Two { a11, a21, a22 }));
            }
            k += size;
        }
        Ok(Self { n, l, pivots, perm })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "Ldlt::solve_vec dimension");
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for c in 0..i {
                acc -= self.l[(i, c)] * y[c];
            }
            y[i] = acc;
        }
        for &(k, piv) in &self.pivots {
            match piv {
                Pivot::One(d) => y[k] /= d,
                Pivot::Two { a11, a21, a22 } => {
                    let det = a11 * a22 - a21 * a21;
                    let (b1, b2) = (y[k], y[k + 1]);
                    y[k] = (a22 * b1 - a21 * b2) / det;
                    y[k + 1] = (a11 * b2 - a21 * b1) / det;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for r in i + 1..n {
                acc -= self.l[(r, i)] * y[r];
            }
            y[i] = acc;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..b.cols()).map(|j| self.solve_vec(b.col(j))).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        DenseMatrix::from_columns(self.n, &refs)
    }

    /// Inertia of the factored matrix (Sylvester's law applied to `D`).
    pub fn inertia(&self) -> Inertia {
        let mut out = Inertia::default();
        for &(_, piv) in &self.pivots {
            match piv {
                Pivot::One(d) => {
                    if d > 0.0 {
                        out.positive += 1
                    } else {
                        out.negative += 1
                    }
                }
                Pivot::Two { a11, a21, a22 } => {
                    let det = a11 * a22 - a21 * a21;
                    if det < 0.0 {
                        out.positive += 1;
                        out.negative += 1;
                    } else if a11 + a22 > 0.0 {
                        out.positive += 2;
                    } else {
                        out.negative += 2;
                    }
                }
            }
        }
        out
    }
}

/// Solves `A X = B` for symmetric, possibly indefinite `A`.
pub fn sym_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if b.rows() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    Ok(Ldlt::factor(a)?.solve(b))
}

/// Lower Cholesky factor, or `None` as soon as a pivot is `<= pd_tol`.
pub fn cholesky(a: &DenseMatrix, pd_tol: f64) -> Option<DenseMatrix> {
    let n = a.rows();
    if !a.is_square() {
        return None;
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > pd_tol) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut acc = y[i];
        for k in 0..i {
            acc -= l[(i, k)] * y[k];
        }
        y[i] = acc / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in i + 1..n {
            acc -= l[(k, i)] * y[k];
        }
        y[i] = acc / l[(i, i)];
    }
    y
}

/// `true` iff Cholesky succeeds with every pivot strictly positive
/// (`pd_tol = 0`, i.e. plain numerical success).
pub fn is_positive_definite(a: &DenseMatrix) -> bool {
    is_positive_definite_with_tol(a, 0.0)
}

pub fn is_positive_definite_with_tol(a: &DenseMatrix, pd_tol: f64) -> bool {
    debug_assert!(a.check_symmetric().is_ok());
    cholesky(a, pd_tol).is_some()
}

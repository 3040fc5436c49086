//! Limited-memory storage of the pairs `(s_i, u_i[, v_i])` and the small
//! cross products the compact representations need.
//!
//! Every product is maintained by bordering: the old product loses its first
//! row and column when the memory is full, and the new last row/column are
//! formed against the *old* columns before the new column is appended.

use std::collections::VecDeque;
use std::io::{self, Write};

use thiserror::Error;

use crate::dense::{DenseMatrix, TriangularKind, TriangularMatrix};
use crate::vecops;

/// Default relative curvature tolerance: pairs need `sᵀu > tol·‖s‖‖u‖`.
pub const CURVATURE_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("curvature condition failed: sᵀu = {s_dot_u:e} <= {tol:e}")]
    CurvatureReject { s_dot_u: f64, tol: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("plus-mode history needs a v vector with every pair")]
    MissingV,
}

/// An `n x j` matrix kept as a queue of columns, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    n: usize,
    cols: VecDeque<Vec<f64>>,
}

impl Columns {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cols: VecDeque::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn col(&self, i: usize) -> &[f64] {
        &self.cols[i]
    }

    pub fn refs(&self) -> Vec<&[f64]> {
        self.cols.iter().map(|c| c.as_slice()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.cols.iter().map(|c| c.as_slice())
    }

    /// Appends `c`, first dropping the oldest column when `len == m`.
    pub fn col_update(&mut self, c: Vec<f64>, m: usize) -> Result<(), HistoryError> {
        if c.len() != self.n {
            return Err(HistoryError::DimensionMismatch {
                expected: self.n,
                got: c.len(),
            });
        }
        while self.cols.len() >= m {
            self.cols.pop_front();
        }
        self.cols.push_back(c);
        Ok(())
    }

    /// `Mᵀ x`
    pub fn t_mul(&self, x: &[f64]) -> Vec<f64> {
        vecops::gemv_t(&self.refs(), x)
    }

    /// `M w`
    pub fn mul(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        vecops::gemv_acc(&self.refs(), w, &mut out);
        out
    }

    /// `out += M w`
    pub fn mul_acc(&self, w: &[f64], out: &mut [f64]) {
        vecops::gemv_acc(&self.refs(), w, out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.n, &self.refs())
    }

    /// `Aᵀ B` formed from scratch.
    pub fn cross(&self, other: &Columns) -> DenseMatrix {
        DenseMatrix::from_fn(self.len(), other.len(), |i, j| {
            vecops::dot(self.col(i), other.col(j))
        })
    }
}

/// Bordered product update.
///
/// `p` must equal `AᵀB` for the current (pre-update) columns; `None` stands
/// for an all-zero matrix or vector whose products are skipped. Returns
/// `[[core, Aᵀb], [aᵀB, aᵀb]]`, where `core` is `p` without its first row
/// and column when the memory is full, together with the number of scalar
/// multiplications performed.
pub fn prod_update(
    p: &DenseMatrix,
    a_mat: Option<&Columns>,
    b_mat: Option<&Columns>,
    a: Option<&[f64]>,
    b: Option<&[f64]>,
    m: usize,
) -> (DenseMatrix, u64) {
    let j = p.rows();
    let drop = usize::from(j >= m);
    let j_new = j + 1 - drop;
    let mut flops = 0u64;
    let mut out = DenseMatrix::zeros(j_new, j_new);
    for c in 0..j - drop {
        for r in 0..j - drop {
            out[(r, c)] = p[(r + drop, c + drop)];
        }
    }
    let last = j_new - 1;
    if let (Some(am), Some(b)) = (a_mat, b) {
        for i in drop..j {
            out[(i - drop, last)] = vecops::dot(am.col(i), b);
            flops += b.len() as u64;
        }
    }
    if let (Some(bm), Some(a)) = (b_mat, a) {
        for i in drop..j {
            out[(last, i - drop)] = vecops::dot(a, bm.col(i));
            flops += a.len() as u64;
        }
    }
    if let (Some(a), Some(b)) = (a, b) {
        out[(last, last)] = vecops::dot(a, b);
        flops += a.len() as u64;
    }
    (out, flops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryMode {
    /// Stores `S, U` with `Rᵁ, Dᵁ, UᵀU`.
    Minus,
    /// Additionally stores `V` with `Lᵁ, Lⱽ, Dⱽ, SᵀS`.
    Plus,
}

#[derive(Debug, Clone)]
struct PlusProducts {
    v: Columns,
    l_u: TriangularMatrix,
    l_v: TriangularMatrix,
    d_v: TriangularMatrix,
    sts: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct QnHistory {
    n: usize,
    m: usize,
    curvature_rtol: f64,
    s: Columns,
    u: Columns,
    r_u: TriangularMatrix,
    d_u: TriangularMatrix,
    utu: DenseMatrix,
    plus: Option<PlusProducts>,
    flops: u64,
    generation: u64,
}

impl QnHistory {
    pub fn new(n: usize, m: usize, mode: HistoryMode) -> Self {
        assert!(m >= 1, "memory must be at least 1");
        let plus = (mode == HistoryMode::Plus).then(|| PlusProducts {
            v: Columns::new(n),
            l_u: TriangularMatrix::empty(TriangularKind::StrictlyLower),
            l_v: TriangularMatrix::empty(TriangularKind::StrictlyLower),
            d_v: TriangularMatrix::empty(TriangularKind::Diagonal),
            sts: DenseMatrix::zeros(0, 0),
        });
        Self {
            n,
            m,
            curvature_rtol: CURVATURE_RTOL,
            s: Columns::new(n),
            u: Columns::new(n),
            r_u: TriangularMatrix::empty(TriangularKind::Upper),
            d_u: TriangularMatrix::empty(TriangularKind::Diagonal),
            utu: DenseMatrix::zeros(0, 0),
            plus,
            flops: 0,
            generation: 0,
        }
    }

    pub fn with_curvature_rtol(mut self, rtol: f64) -> Self {
        self.curvature_rtol = rtol;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn memory(&self) -> usize {
        self.m
    }

    /// Number of stored pairs.
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn mode(&self) -> HistoryMode {
        if self.plus.is_some() {
            HistoryMode::Plus
        } else {
            HistoryMode::Minus
        }
    }

    pub fn s(&self) -> &Columns {
        &self.s
    }

    pub fn u(&self) -> &Columns {
        &self.u
    }

    pub fn v(&self) -> Option<&Columns> {
        self.plus.as_ref().map(|p| &p.v)
    }

    /// Upper triangle (with diagonal) of `SᵀU`.
    pub fn r_u(&self) -> &TriangularMatrix {
        &self.r_u
    }

    pub fn d_u(&self) -> &TriangularMatrix {
        &self.d_u
    }

    pub fn utu(&self) -> &DenseMatrix {
        &self.utu
    }

    /// Strictly lower triangle of `SᵀU` (plus mode only).
    pub fn l_u(&self) -> Option<&TriangularMatrix> {
        self.plus.as_ref().map(|p| &p.l_u)
    }

    /// Strictly lower triangle of `SᵀV` (plus mode only).
    pub fn l_v(&self) -> Option<&TriangularMatrix> {
        self.plus.as_ref().map(|p| &p.l_v)
    }

    pub fn d_v(&self) -> Option<&TriangularMatrix> {
        self.plus.as_ref().map(|p| &p.d_v)
    }

    pub fn sts(&self) -> Option<&DenseMatrix> {
        self.plus.as_ref().map(|p| &p.sts)
    }

    /// Cumulative multiplications spent in [`QnHistory::push_pair`].
    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// Counter bumped by every accepted push and every [`QnHistory::clear`];
    /// caches built from the columns compare it to detect staleness.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn clear(&mut self) {
        let mode = self.mode();
        let generation = self.generation + 1;
        *self = Self::new(self.n, self.m, mode).with_curvature_rtol(self.curvature_rtol);
        self.generation = generation;
    }

    pub fn push_pair(&mut self, s: &[f64], u: &[f64], v: Option<&[f64]>) -> Result<(), HistoryError> {
        for len in [s.len(), u.len()].into_iter().chain(v.map(|v| v.len())) {
            if len != self.n {
                return Err(HistoryError::DimensionMismatch {
                    expected: self.n,
                    got: len,
                });
            }
        }
        if self.plus.is_some() && v.is_none() {
            return Err(HistoryError::MissingV);
        }
        let s_dot_u = vecops::dot(s, u);
        let tol = self.curvature_rtol * vecops::norm2(s) * vecops::norm2(u);
        self.flops += 3 * self.n as u64;
        if !(s_dot_u > tol) {
            return Err(HistoryError::CurvatureReject { s_dot_u, tol });
        }

        let m = self.m;
        let (r_u, f1) = prod_update(self.r_u.as_dense(), Some(&self.s), None, Some(s), Some(u), m);
        let (d_u, f2) = prod_update(self.d_u.as_dense(), None, None, Some(s), Some(u), m);
        let (utu, f3) = prod_update(&self.utu, Some(&self.u), Some(&self.u), Some(u), Some(u), m);
        self.flops += f1 + f2 + f3;
        self.r_u = TriangularMatrix::new(TriangularKind::Upper, r_u).expect("bordered upper");
        self.d_u = TriangularMatrix::new(TriangularKind::Diagonal, d_u).expect("bordered diagonal");
        self.utu = utu;

        if let Some(p) = self.plus.as_mut() {
            let v = v.expect("checked above");
            let (l_u, f4) = prod_update(p.l_u.as_dense(), None, Some(&self.u), Some(s), None, m);
            let (l_v, f5) = prod_update(p.l_v.as_dense(), None, Some(&p.v), Some(s), None, m);
            let (d_v, f6) = prod_update(p.d_v.as_dense(), None, None, Some(s), Some(v), m);
            let (sts, f7) = prod_update(&p.sts, Some(&self.s), Some(&self.s), Some(s), Some(s), m);
            self.flops += f4 + f5 + f6 + f7;
            p.l_u = TriangularMatrix::new(TriangularKind::StrictlyLower, l_u).expect("bordered lower");
            p.l_v = TriangularMatrix::new(TriangularKind::StrictlyLower, l_v).expect("bordered lower");
            p.d_v = TriangularMatrix::new(TriangularKind::Diagonal, d_v).expect("bordered diagonal");
            p.sts = sts;
            p.v.col_update(v.to_vec(), m)?;
        }
        self.s.col_update(s.to_vec(), m)?;
        self.u.col_update(u.to_vec(), m)?;
        self.generation += 1;
        Ok(())
    }

    /// Writes every stored matrix as plain text.
    ///
    /// Format: for each matrix a header line `# <name> <rows> <cols>`
    /// followed by `rows` lines of whitespace-separated values in `%.17e`.
    pub fn write_debug_dump(&self, mut w: impl Write) -> io::Result<()> {
        let mut mats: Vec<(&str, DenseMatrix)> = vec![
            ("S", self.s.to_dense()),
            ("U", self.u.to_dense()),
            ("R_U", self.r_u.as_dense().clone()),
            ("D_U", self.d_u.as_dense().clone()),
            ("UTU", self.utu.clone()),
        ];
        if let Some(p) = &self.plus {
            mats.push(("V", p.v.to_dense()));
            mats.push(("L_U", p.l_u.as_dense().clone()));
            mats.push(("L_V", p.l_v.as_dense().clone()));
            mats.push(("D_V", p.d_v.as_dense().clone()));
            mats.push(("STS", p.sts.clone()));
        }
        for (name, m) in mats {
            writeln!(w, "# {name} {} {}", m.rows(), m.cols())?;
            for i in 0..m.rows() {
                let row: Vec<String> = (0..m.cols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn e(n: usize, i: usize, a: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = a;
        v
    }

    fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).norm_inf() / b.norm_inf().max(1e-300)
    }

    fn split_upper(p: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(p.rows(), p.cols(), |i, j| if i <= j { p[(i, j)] } else { 0.0 })
    }

    fn split_lower(p: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(p.rows(), p.cols(), |i, j| if i > j { p[(i, j)] } else { 0.0 })
    }

    #[test]
    fn col_update_examples() {
        let mut c = Columns::new(3);
        c.col_update(vec![1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(c.len(), 1);
        c.col_update(vec![4.0, 5.0, 6.0], 2).unwrap();
        assert_eq!(c.col(0), &[1.0, 2.0, 3.0]);
        c.col_update(vec![7.0, 8.0, 9.0], 2).unwrap();
        assert_eq!(c.refs(), vec![&[4.0, 5.0, 6.0][..], &[7.0, 8.0, 9.0][..]]);
        assert!(c.col_update(vec![1.0], 2).is_err());
    }

    #[test]
    fn prod_update_matches_recompute() {
        let mut s = Columns::new(3);
        let mut u = Columns::new(3);
        s.col_update(vec![1.0, 0.5, -1.0], 3).unwrap();
        u.col_update(vec![2.0, 1.0, 0.0], 3).unwrap();
        let p = s.cross(&u);
        let (sn, un) = (vec![0.3, -1.0, 2.0], vec![1.0, 1.0, 1.0]);
        let (full, _) = prod_update(&p, Some(&s), Some(&u), Some(&sn), Some(&un), 3);
        s.col_update(sn.clone(), 3).unwrap();
        u.col_update(un.clone(), 3).unwrap();
        assert!(rel_err(&full, &s.cross(&u)) < 1e-15);

        let d = DenseMatrix::from_diag(&[2.0]);
        let (d2, _) = prod_update(&d, None, None, Some(&sn), Some(&un), 3);
        assert_eq!(d2, DenseMatrix::from_diag(&[2.0, 1.3]));
    }

    #[test]
    fn push_pair_examples() {
        let mut h = QnHistory::new(3, 2, HistoryMode::Plus);
        h.push_pair(&e(3, 0, 1.0), &e(3, 0, 2.0), Some(&e(3, 0, 1.0))).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.d_u().diag(), vec![2.0]);
        assert_eq!(h.r_u().as_dense()[(0, 0)], 2.0);
        assert_eq!(h.l_u().unwrap().as_dense()[(0, 0)], 0.0);

        let mut h1 = QnHistory::new(3, 1, HistoryMode::Minus);
        h1.push_pair(&e(3, 0, 1.0), &e(3, 0, 2.0), None).unwrap();
        h1.push_pair(&e(3, 1, 1.0), &e(3, 1, 5.0), None).unwrap();
        assert_eq!(h1.len(), 1);
        assert_eq!(h1.s().col(0), e(3, 1, 1.0).as_slice());
        assert_eq!(h1.d_u().diag(), vec![5.0]);

        let err = h1.push_pair(&e(3, 0, 1.0), &e(3, 0, -1.0), None);
        assert!(matches!(err, Err(HistoryError::CurvatureReject { .. })));
        assert_eq!(h1.len(), 1);
        assert!(matches!(
            h.push_pair(&e(3, 0, 1.0), &e(3, 0, 1.0), None),
            Err(HistoryError::MissingV)
        ));
    }

    #[test]
    fn dump_format() {
        let mut h = QnHistory::new(2, 2, HistoryMode::Minus);
        h.push_pair(&[1.0, 0.0], &[2.0, 0.0], None).unwrap();
        let mut buf = Vec::new();
        h.write_debug_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# S 2 1\n1.00000000000000000e0\n"));
        assert!(text.contains("# UTU 1 1\n4.00000000000000000e0\n"));
    }

    fn check_against_scratch(h: &QnHistory) {
        let stu = h.s().cross(h.u());
        let tol = 1e-12;
        assert!(rel_err(h.r_u().as_dense(), &split_upper(&stu)) <= tol);
        assert!(rel_err(h.d_u().as_dense(), &DenseMatrix::from_diag(&stu.diag())) <= tol);
        assert!(rel_err(h.utu(), &h.u().cross(h.u())) <= tol);
        if let Some(v) = h.v() {
            let stv = h.s().cross(v);
            assert!(rel_err(h.l_u().unwrap().as_dense(), &split_lower(&stu)) <= tol || h.len() == 1);
            assert!(rel_err(h.l_v().unwrap().as_dense(), &split_lower(&stv)) <= tol || h.len() == 1);
            assert!(rel_err(h.d_v().unwrap().as_dense(), &DenseMatrix::from_diag(&stv.diag())) <= tol);
            assert!(rel_err(h.sts().unwrap(), &h.s().cross(h.s())) <= tol);
        }
        assert!(h.d_u().diag().iter().all(|d| *d > 0.0));
    }

    proptest! {
        #[test]
        fn products_match_scratch_recompute(
            n in 2usize..12,
            m in 1usize..6,
            pushes in 1usize..18,
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut h = QnHistory::new(n, m, HistoryMode::Plus);
            let mut log = Vec::new();
            for _ in 0..pushes.min(3 * m) {
                let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let su = vecops::dot(&s, &u);
                if su <= 0.1 {
                    vecops::axpy((1.0 - su) / vecops::dot(&s, &s), &s, &mut u);
                }
                h.push_pair(&s, &u, Some(&v)).unwrap();
                log.push(s);
                check_against_scratch(&h);
            }
            // eviction keeps the newest m pairs in order
            let keep = &log[log.len().saturating_sub(m)..];
            prop_assert_eq!(h.len(), keep.len());
            for (i, s) in keep.iter().enumerate() {
                prop_assert_eq!(h.s().col(i), s.as_slice());
            }
        }
    }

    #[test]
    fn push_cost_is_linear_in_n() {
        let m = 5;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for n in [100usize, 200, 400, 800, 1600] {
            let mut h = QnHistory::new(n, m, HistoryMode::Plus);
            for k in 0..2 * m {
                let s: Vec<f64> = (0..n).map(|i| ((i + k) as f64 * 0.37).sin()).collect();
                let mut u = s.clone();
                u[k % n] += 0.5;
                h.push_pair(&s, &u, Some(&s)).unwrap();
            }
            xs.push(n as f64);
            ys.push(h.flops() as f64);
        }
        // least-squares line through the points; every point within 20%
        let k = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        let icpt = my - slope * mx;
        for (x, y) in xs.iter().zip(&ys) {
            let fit = icpt + slope * x;
            assert!((y - fit).abs() <= 0.2 * fit, "n={x}: {y} vs {fit}");
        }
    }
}

//! Compact structured-plus representation and its shifted solves.
//!
//! With `A₀ = σI`, `Q = V + σS` and `Ξ = [Q U]`,
//!
//! ```text
//! A = σI - Ξ M⁻¹ Ξᵀ,   M = [[Dⱽ + Lⱽ + Lⱽᵀ + σSᵀS, Lᵁ], [Lᵁᵀ, -Dᵁ]]
//! ```
//!
//! so `K + A + δI = K̂₀ - Ξ M⁻¹ Ξᵀ` with `K̂₀ = K + (σ+δ)I`, which is
//! inverted by Sherman–Morrison–Woodbury around solves with `K̂₀`.

use std::sync::Arc;

use crate::dense::{cholesky, DenseMatrix, Inertia, Ldlt, LinalgError};
use crate::error::QnError;
use crate::history::{Columns, HistoryMode, QnHistory};
use crate::problems::{KnownHessianOp, DENSE_CAP};
use crate::vecops;

/// Largest exponent tried by the power-of-ten shift search.
pub const MAX_DELTA_EXP: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMode {
    /// `δ = 10ʲ` for the first `j = 0, 1, …, 12` that works.
    PowerOfTen,
    /// `δ = max(0, (ε - (u+v)ᵀs)/‖s‖²)` from the newest pair, checked by the
    /// probe and replaced by the power search if it is not enough.
    Cheap { epsilon: f64 },
}

/// `K̂₀⁻¹Ξ` and the factored capacitance matrix `M - ΞᵀK̂₀⁻¹Ξ` for one shift.
struct Smw {
    delta: f64,
    qhat: Columns,
    uhat: Columns,
    cap: Result<Ldlt, LinalgError>,
}

pub struct PlusState<'a> {
    history: &'a QnHistory,
    sigma: f64,
    k: Arc<dyn KnownHessianOp>,
    q: Columns,
    middle: DenseMatrix,
    middle_ldlt: Option<Ldlt>,
    delta: f64,
    dense_cap: usize,
    smw: Option<Smw>,
    solves: u64,
}

impl<'a> PlusState<'a> {
    /// Assembles `Q` and `M` and factors `M`.
    pub fn new(history: &'a QnHistory, sigma: f64, k: Arc<dyn KnownHessianOp>) -> Result<Self, QnError> {
        assert_eq!(history.mode(), HistoryMode::Plus, "plus state needs a plus-mode history");
        assert_eq!(k.dim(), history.dim());
        let j = history.len();
        let mut q = Columns::new(history.dim());
        let v = history.v().expect("plus mode");
        for (vi, si) in v.iter().zip(history.s().iter()) {
            let mut c = vi.to_vec();
            vecops::axpy(sigma, si, &mut c);
            q.col_update(c, usize::MAX).expect("column length n");
        }
        let (middle, middle_ldlt) = if j == 0 {
            (DenseMatrix::zeros(0, 0), None)
        } else {
            let l_v = history.l_v().expect("plus mode").as_dense();
            let l_u = history.l_u().expect("plus mode").as_dense();
            let d_v = history.d_v().expect("plus mode").as_dense();
            let sts = history.sts().expect("plus mode");
            let m11 = d_v.add(l_v).add(&l_v.transpose()).add(&sts.scaled(sigma));
            let m22 = history.d_u().as_dense().scaled(-1.0);
            let m = DenseMatrix::block2x2(&m11, l_u, &l_u.transpose(), &m22);
            let f = Ldlt::factor(&m)?;
            (m, Some(f))
        };
        Ok(Self {
            history,
            sigma,
            k,
            q,
            middle,
            middle_ldlt,
            delta: 0.0,
            dense_cap: DENSE_CAP,
            smw: None,
            solves: 0,
        })
    }

    /// Order up to which the probe may densify `K + A` when the operator
    /// reports no inertia.
    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn history(&self) -> &QnHistory {
        self.history
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn set_delta(&mut self, delta: f64) {
        assert!(delta >= 0.0);
        self.delta = delta;
    }

    pub fn q(&self) -> &Columns {
        &self.q
    }

    pub fn middle(&self) -> &DenseMatrix {
        &self.middle
    }

    /// `K̂₀` solves performed so far.
    pub fn solves(&self) -> u64 {
        self.solves
    }

    fn xi_t_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.q.t_mul(x);
        z.extend(self.history.u().t_mul(x));
        z
    }

    /// `A x = σx - Ξ M⁻¹ Ξᵀ x`
    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vecops::scale(self.sigma, x);
        if let Some(f) = &self.middle_ldlt {
            let j = self.history.len();
            let w = f.solve_vec(&self.xi_t_mul(x));
            let neg: Vec<f64> = w.iter().map(|v| -v).collect();
            self.q.mul_acc(&neg[..j], &mut out);
            self.history.u().mul_acc(&neg[j..], &mut out);
        }
        out
    }

    /// `(K + A + δI) x`
    pub fn apply_full(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.apply_a(x);
        let kx = self.k.apply(x);
        for i in 0..out.len() {
            out[i] += kx[i] + self.delta * x[i];
        }
        out
    }

    fn shift(&self, delta: f64) -> f64 {
        self.sigma + delta
    }

    fn k0_solve(&mut self, delta: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.solves += 1;
        self.k.solve_shifted(self.shift(delta), rhs)
    }

    /// Builds (or reuses) the SMW pieces for the shift `delta`.
    fn prepare(&mut self, delta: f64) -> Result<(), LinalgError> {
        if self.smw.as_ref().is_some_and(|s| s.delta == delta) {
            return Ok(());
        }
        let shift = self.shift(delta);
        let qhat = solve_columns(self.k.as_ref(), shift, &self.q)?;
        let uhat = solve_columns(self.k.as_ref(), shift, self.history.u())?;
        self.solves += (qhat.len() + uhat.len()) as u64;
        let cap = match &self.middle_ldlt {
            None => Ldlt::factor(&DenseMatrix::zeros(0, 0)),
            Some(_) => {
                let j = self.history.len();
                let u = self.history.u();
                let mut c = self.middle.clone();
                for a in 0..2 * j {
                    let xa = if a < j { self.q.col(a) } else { u.col(a - j) };
                    for b in 0..2 * j {
                        let yb = if b < j { qhat.col(b) } else { uhat.col(b - j) };
                        c[(a, b)] -= vecops::dot(xa, yb);
                    }
                }
                // exact symmetry for the factorization
                for a in 0..2 * j {
                    for b in 0..a {
                        let m = 0.5 * (c[(a, b)] + c[(b, a)]);
                        c[(a, b)] = m;
                        c[(b, a)] = m;
                    }
                }
                Ldlt::factor(&c)
            }
        };
        self.smw = Some(Smw { delta, qhat, uhat, cap });
        Ok(())
    }

    /// `p = -(K + A + δI)⁻¹ g` by Sherman–Morrison–Woodbury.
    pub fn solve_plus(&mut self, g: &[f64]) -> Result<Vec<f64>, QnError> {
        let delta = self.delta;
        let not_pd = QnError::InitNotPD { sigma: self.shift(delta) };
        self.prepare(delta).map_err(|_| not_pd.clone())?;
        let h = self.k0_solve(delta, g).map_err(|_| not_pd)?;
        let mut x = h.clone();
        if !self.history.is_empty() {
            let j = self.history.len();
            let z = self.xi_t_mul(&h);
            let smw = self.smw.as_ref().expect("prepared");
            let cap = smw.cap.as_ref().map_err(|e| QnError::Linalg(e.clone()))?;
            let y = cap.solve_vec(&z);
            smw.qhat.mul_acc(&y[..j], &mut x);
            smw.uhat.mul_acc(&y[j..], &mut x);
        }
        Ok(vecops::scale(-1.0, &x))
    }

    /// Whether `K + A + δI` is positive definite at the current `δ`.
    pub fn pd_probe_plus(&mut self) -> bool {
        self.probe(self.delta)
    }

    fn probe(&mut self, delta: f64) -> bool {
        let n = self.history.dim();
        let small = n <= self.dense_cap;
        let Some(k0) = self.k.shifted_inertia(self.shift(delta)) else {
            if small {
                return self.dense_probe(delta);
            }
            // no inertia available: a successful K̂₀ factorization stands in
            // for K̂₀ ≻ 0
            return self.prepare(delta).is_ok() && self.smw_inertia().is_some_and(|(c, m)| c.negative == m.negative);
        };
        if self.history.is_empty() {
            return k0.is_positive_definite();
        }
        // the inertia identity needs K̂₀ nonsingular
        if k0.zero > 0 || self.prepare(delta).is_err() {
            return small && self.dense_probe(delta);
        }
        match self.smw_inertia() {
            // In(X) = In(K̂₀) + In(M - ΞᵀK̂₀⁻¹Ξ) - In(M)
            Some((cap, m)) => k0.negative + cap.negative == m.negative,
            None => small && self.dense_probe(delta),
        }
    }

    /// Shift usable for [`PlusState::solve_plus`]: positive definite and
    /// with `K̂₀` and the capacitance matrix nonsingular.
    fn usable(&mut self, delta: f64) -> bool {
        self.probe(delta) && self.prepare(delta).is_ok() && self.smw_inertia().is_some()
    }

    /// Inertia of the capacitance matrix and of `M`, or `None` if the
    /// capacitance matrix is singular.
    fn smw_inertia(&self) -> Option<(Inertia, Inertia)> {
        let smw = self.smw.as_ref()?;
        let m = self.middle_ldlt.as_ref().map(Ldlt::inertia).unwrap_or_default();
        match &smw.cap {
            Ok(c) => Some((c.inertia(), m)),
            Err(_) if self.history.is_empty() => Some((Inertia::default(), m)),
            Err(_) => None,
        }
    }

    fn dense_probe(&self, delta: f64) -> bool {
        let n = self.history.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                let mut y = self.apply_a(&e);
                let ke = self.k.apply(&e);
                for i in 0..n {
                    y[i] += ke[i];
                }
                y[c] += delta;
                y
            })
            .collect();
        let x = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (cols[j][i] + cols[i][j]));
        cholesky(&x, 0.0).is_some()
    }

    /// Chooses `δ ≥ 0` so that `K + A + δI` is positive definite and stores
    /// it; `δ = 0` whenever `K + A` already is (and `K + σI` is
    /// nonsingular, which the solve needs).
    pub fn ensure_positive_definite(&mut self, mode: DeltaMode) -> Result<f64, QnError> {
        if self.usable(0.0) {
            self.delta = 0.0;
            return Ok(0.0);
        }
        if let DeltaMode::Cheap { epsilon } = mode {
            if let Some(d) = self.cheap_delta(epsilon) {
                if d > 0.0 && self.usable(d) {
                    self.delta = d;
                    return Ok(d);
                }
            }
        }
        for e in 0..=MAX_DELTA_EXP {
            let d = 10f64.powi(e);
            if self.usable(d) {
                self.delta = d;
                return Ok(d);
            }
        }
        Err(QnError::RegularizationFailed {
            max_delta: 10f64.powi(MAX_DELTA_EXP),
        })
    }

    fn cheap_delta(&self, epsilon: f64) -> Option<f64> {
        let h = self.history;
        let j = h.len();
        if j == 0 {
            return None;
        }
        let s = h.s().col(j - 1);
        let u = h.u().col(j - 1);
        let v = h.v().expect("plus mode").col(j - 1);
        let uvs = vecops::dot(u, s) + vecops::dot(v, s);
        let ss = vecops::dot(s, s);
        Some(((epsilon - uvs) / ss).max(0.0))
    }
}

#[cfg(feature = "parallel")]
fn solve_columns(k: &dyn KnownHessianOp, shift: f64, cols: &Columns) -> Result<Columns, LinalgError> {
    use rayon::prelude::*;
    let solved: Vec<Vec<f64>> = cols
        .refs()
        .par_iter()
        .map(|c| k.solve_shifted(shift, c))
        .collect::<Result<_, _>>()?;
    Ok(collect_columns(cols.rows(), solved))
}

#[cfg(not(feature = "parallel"))]
fn solve_columns(k: &dyn KnownHessianOp, shift: f64, cols: &Columns) -> Result<Columns, LinalgError> {
    let solved: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| k.solve_shifted(shift, c))
        .collect::<Result<_, _>>()?;
    Ok(collect_columns(cols.rows(), solved))
}

fn collect_columns(n: usize, cols: Vec<Vec<f64>>) -> Columns {
    let mut out = Columns::new(n);
    for c in cols {
        out.col_update(c, usize::MAX).expect("column length n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Diagonal, ScaledIdentity};

    fn diag(d: &[f64]) -> Arc<dyn KnownHessianOp> {
        Arc::new(Diagonal::new(d.to_vec(), true))
    }

    fn plus_history(n: usize, m: usize, pairs: usize, k: &[f64]) -> QnHistory {
        let mut h = QnHistory::new(n, m, HistoryMode::Plus);
        for p in 0..pairs {
            let s: Vec<f64> = (0..n).map(|i| ((i * 5 + p * 3) as f64 * 0.37).sin()).collect();
            let v: Vec<f64> = s.iter().zip(k).map(|(s, k)| s * k).collect();
            let mut u = v.clone();
            for i in 0..n {
                u[i] += 0.8 * s[i] + 0.05 * ((i + p) as f64).cos() * s[(i + 1) % n];
            }
            h.push_pair(&s, &u, Some(&v)).unwrap();
        }
        h
    }

    #[test]
    fn empty_history_is_scaled_identity() {
        let h = QnHistory::new(3, 2, HistoryMode::Plus);
        let st = PlusState::new(&h, 3.0, Arc::new(ScaledIdentity::new(3, 1.0))).unwrap();
        assert_eq!(st.apply_a(&[1.0, -2.0, 0.5]), vec![3.0, -6.0, 1.5]);
    }

    #[test]
    fn empty_history_solve_halves() {
        let h = QnHistory::new(4, 2, HistoryMode::Plus);
        let mut st = PlusState::new(&h, 1.0, Arc::new(ScaledIdentity::new(4, 1.0))).unwrap();
        assert!(st.pd_probe_plus());
        assert_eq!(st.solve_plus(&[1.0; 4]).unwrap(), vec![-0.5; 4]);
    }

    #[test]
    fn delta_examples() {
        let h = QnHistory::new(2, 2, HistoryMode::Plus);
        let cases = [([2.0, 3.0], 0.0), ([-0.5, 1.0], 1.0), ([-5.0, 1.0], 10.0)];
        for (d, want) in cases {
            let mut st = PlusState::new(&h, 0.0, diag(&d)).unwrap();
            assert_eq!(st.ensure_positive_definite(DeltaMode::PowerOfTen).unwrap(), want);
            assert!(st.pd_probe_plus());
        }
        let mut st = PlusState::new(&h, 1.0, diag(&[-3.0, 1.0])).unwrap();
        assert!(!st.pd_probe_plus());
    }

    #[test]
    fn solve_residual_with_history() {
        let k = [1.0, 2.0, 0.5, 3.0, 1.5];
        let h = plus_history(5, 3, 2, &k);
        let mut st = PlusState::new(&h, 0.7, diag(&k)).unwrap();
        st.ensure_positive_definite(DeltaMode::PowerOfTen).unwrap();
        let g = vec![1.0, -1.0, 2.0, 0.25, -0.5];
        let p = st.solve_plus(&g).unwrap();
        let r = vecops::add(&st.apply_full(&p), &g);
        assert!(vecops::norm_inf(&r) <= 1e-8 * vecops::norm_inf(&g));
    }

    #[test]
    fn probe_matches_dense_fallback() {
        let k = [-2.0, 1.0, 0.3, 2.0, -0.1, 1.0];
        let h = plus_history(6, 4, 3, &k);
        for sigma in [0.1, 0.5, 1.0, 2.5, 5.0] {
            for delta in [0.0, 0.5, 1.0, 3.0] {
                let mut st = PlusState::new(&h, sigma, diag(&k)).unwrap();
                st.set_delta(delta);
                let fast = st.pd_probe_plus();
                assert_eq!(fast, st.dense_probe(delta), "sigma={sigma} delta={delta}");
            }
        }
    }

    #[test]
    fn cheap_delta_is_verified() {
        let k = [-4.0, 1.0, 1.0];
        let h = plus_history(3, 2, 1, &[1.0, 1.0, 1.0]);
        let mut st = PlusState::new(&h, 0.5, diag(&k)).unwrap();
        let d = st.ensure_positive_definite(DeltaMode::Cheap { epsilon: 1e-8 }).unwrap();
        assert!(d > 0.0);
        assert!(st.pd_probe_plus());
    }
}

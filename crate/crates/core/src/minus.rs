//! Compact structured-minus representation.
//!
//! With `B₀` the initial matrix and `SᵀU = L + R` (strictly lower plus upper),
//!
//! ```text
//! B = B₀ - [B₀S U] [[SᵀB₀S, L], [Lᵀ, -D]]⁻¹ [SᵀB₀; Uᵀ]
//! H = H₀ + [S H₀U] [[R⁻ᵀ(D + UᵀH₀U)R⁻¹, -R⁻ᵀ], [-R⁻¹, 0]] [Sᵀ; UᵀH₀]
//! ```
//!
//! where `B` approximates the full Hessian `K + A`. `R⁻¹` is only ever
//! applied through triangular solves.

use std::sync::Arc;

use crate::dense::{sym_solve, tri_solve_upper, DenseMatrix};
use crate::error::QnError;
use crate::history::{Columns, QnHistory};
use crate::problems::{shifted_is_positive_definite, KnownHessianOp, DENSE_CAP};
use crate::vecops;

/// `B₀ = K₀ + σ̄ I` together with the cached columns `Ū = H₀U` and `UᵀŪ`.
#[derive(Clone)]
pub struct OperatorInit {
    k0: Arc<dyn KnownHessianOp>,
    sigma_bar: f64,
    incremental: bool,
    hu: Columns,
    uthu: DenseMatrix,
    seen: Option<u64>,
    solves: u64,
}

impl std::fmt::Debug for OperatorInit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorInit")
            .field("n", &self.k0.dim())
            .field("sigma_bar", &self.sigma_bar)
            .field("incremental", &self.incremental)
            .field("cached", &self.hu.len())
            .finish()
    }
}

impl OperatorInit {
    /// Fails with `InitNotPD` unless `K₀ + σ̄I` is positive definite. When
    /// the definiteness cannot be probed (large operator without inertia),
    /// a successful shifted solve is accepted instead.
    pub fn new(k0: Arc<dyn KnownHessianOp>, sigma_bar: f64, incremental: bool) -> Result<Self, QnError> {
        let n = k0.dim();
        match shifted_is_positive_definite(k0.as_ref(), sigma_bar, DENSE_CAP) {
            Some(true) => {}
            Some(false) => return Err(QnError::InitNotPD { sigma: sigma_bar }),
            None => {
                k0.solve_shifted(sigma_bar, &vec![1.0; n])
                    .map_err(|_| QnError::InitNotPD { sigma: sigma_bar })?;
            }
        }
        Ok(Self {
            k0,
            sigma_bar,
            incremental,
            hu: Columns::new(n),
            uthu: DenseMatrix::zeros(0, 0),
            seen: None,
            solves: 0,
        })
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn k0(&self) -> &Arc<dyn KnownHessianOp> {
        &self.k0
    }

    /// Number of `B₀` solves performed so far.
    pub fn solves(&self) -> u64 {
        self.solves
    }

    /// `H₀ x`
    pub fn h0(&mut self, x: &[f64]) -> Result<Vec<f64>, QnError> {
        self.solves += 1;
        Ok(self.k0.solve_shifted(self.sigma_bar, x)?)
    }

    /// `B₀ x`
    pub fn b0(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.k0.apply(x);
        vecops::axpy(self.sigma_bar, x, &mut y);
        y
    }

    /// Changes `σ̄`; the cache is rebuilt on the next refresh.
    pub fn set_sigma_bar(&mut self, sigma_bar: f64) {
        if sigma_bar != self.sigma_bar {
            self.sigma_bar = sigma_bar;
            self.seen = None;
        }
    }

    pub fn is_current(&self, h: &QnHistory) -> bool {
        self.seen == Some(h.generation())
    }

    /// Brings `H₀U` and `UᵀH₀U` in line with the history: one solve when
    /// exactly one pair was pushed since the last refresh (incremental mode),
    /// otherwise a rebuild with one solve per stored pair.
    pub fn refresh(&mut self, h: &QnHistory) -> Result<(), QnError> {
        if self.is_current(h) {
            return Ok(());
        }
        let one_push = self.seen.map(|g| g + 1) == Some(h.generation())
            && self.hu.len() + 1 >= h.len()
            && !h.is_empty();
        if self.incremental && one_push {
            let u = h.u().col(h.len() - 1).to_vec();
            let ubar = self.h0(&u)?;
            let j = h.len();
            let core = if self.hu.len() == j { self.uthu.without_first() } else { self.uthu.clone() };
            let col = h.u().t_mul(&ubar);
            let mut next = DenseMatrix::zeros(j, j);
            for c in 0..j - 1 {
                for r in 0..j - 1 {
                    next[(r, c)] = core[(r, c)];
                }
            }
            for i in 0..j {
                next[(i, j - 1)] = col[i];
                next[(j - 1, i)] = col[i];
            }
            self.uthu = next;
            self.hu.col_update(ubar, h.memory()).expect("column length n");
        } else {
            let mut hu = Columns::new(h.dim());
            for u in h.u().iter() {
                let ubar = self.h0(u)?;
                hu.col_update(ubar, usize::MAX).expect("column length n");
            }
            self.uthu = h.u().cross(&hu);
            self.hu = hu;
        }
        self.seen = Some(h.generation());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum MinusInit {
    /// `B₀ = σ I`
    Scalar { sigma: f64 },
    Operator(OperatorInit),
}

/// A history paired with its initialization.
pub struct MinusState<'a> {
    pub history: &'a QnHistory,
    pub init: &'a mut MinusInit,
}

impl<'a> MinusState<'a> {
    pub fn new(history: &'a QnHistory, init: &'a mut MinusInit) -> Self {
        Self { history, init }
    }

    fn b0(&self, x: &[f64]) -> Vec<f64> {
        match &*self.init {
            MinusInit::Scalar { sigma } => vecops::scale(*sigma, x),
            MinusInit::Operator(op) => op.b0(x),
        }
    }

    /// `B x` through the compact form (middle matrix assembled from scratch;
    /// this is a verification path, not used to compute directions).
    pub fn apply_b(&self, x: &[f64]) -> Result<Vec<f64>, QnError> {
        let h = self.history;
        let j = h.len();
        let mut out = self.b0(x);
        if j == 0 {
            return Ok(out);
        }
        let mut b0s = Columns::new(h.dim());
        for s in h.s().iter() {
            b0s.col_update(self.b0(s), usize::MAX).expect("column length n");
        }
        let stb0s = h.s().cross(&b0s);
        let stu = h.s().cross(h.u());
        let l = DenseMatrix::from_fn(j, j, |r, c| if r > c { stu[(r, c)] } else { 0.0 });
        let neg_d = DenseMatrix::from_diag(&stu.diag().iter().map(|d| -d).collect::<Vec<_>>());
        let m = DenseMatrix::block2x2(&stb0s, &l, &l.transpose(), &neg_d);
        let mut rhs = b0s.t_mul(x);
        rhs.extend(h.u().t_mul(x));
        let w = sym_solve(&m, &DenseMatrix::from_columns(2 * j, &[&rhs]))?;
        let w = w.col(0);
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        b0s.mul_acc(&neg[..j], &mut out);
        h.u().mul_acc(&neg[j..], &mut out);
        Ok(out)
    }

    /// `H x` with the inverse compact form. For the operator path the
    /// `H₀U` cache is refreshed first; the call itself costs one `B₀` solve.
    pub fn apply_h(&mut self, x: &[f64]) -> Result<Vec<f64>, QnError> {
        let h0 = match &mut *self.init {
            MinusInit::Scalar { sigma } => H0::Scalar(*sigma),
            MinusInit::Operator(op) => H0::Operator(op),
        };
        apply_h_with(self.history, h0, x)
    }

    /// `p = -H g`
    pub fn search_direction(&mut self, g: &[f64]) -> Result<Vec<f64>, QnError> {
        Ok(vecops::scale(-1.0, &self.apply_h(g)?))
    }
}

enum H0<'a> {
    Scalar(f64),
    Operator(&'a mut OperatorInit),
}

fn apply_h_with(h: &QnHistory, h0: H0<'_>, x: &[f64]) -> Result<Vec<f64>, QnError> {
    let empty = h.is_empty();
    match h0 {
        H0::Scalar(sigma) => {
            let mut out = vecops::scale(1.0 / sigma, x);
            if empty {
                return Ok(out);
            }
            let b = vecops::scale(1.0 / sigma, &h.u().t_mul(x));
            finish(
                h,
                x,
                &mut out,
                &b,
                |t| vecops::scale(1.0 / sigma, &h.utu().matvec(t)),
                |w2, out| h.u().mul_acc(&vecops::scale(1.0 / sigma, w2), out),
            )?;
            Ok(out)
        }
        H0::Operator(op) => {
            op.refresh(h)?;
            let mut out = op.h0(x)?;
            if empty {
                return Ok(out);
            }
            let op: &OperatorInit = op;
            let b = op.hu.t_mul(x);
            finish(h, x, &mut out, &b, |t| op.uthu.matvec(t), |w2, out| op.hu.mul_acc(w2, out))?;
            Ok(out)
        }
    }
}

/// Adds `S w₁ + Ū w₂` to `out`, where `t = R⁻¹Sᵀx`,
/// `w₁ = R⁻ᵀ((D + UᵀŪ)t - Ūᵀx)` and `w₂ = -t`.
fn finish(
    h: &QnHistory,
    x: &[f64],
    out: &mut [f64],
    b: &[f64],
    uthu: impl Fn(&[f64]) -> Vec<f64>,
    add_ubar: impl Fn(&[f64], &mut [f64]),
) -> Result<(), QnError> {
    let j = h.len();
    let r = h.r_u();
    let t = tri_solve_upper(r, &h.s().t_mul(x), false)?;
    let d = h.d_u().diag();
    let ut = uthu(&t);
    let rhs: Vec<f64> = (0..j).map(|i| d[i] * t[i] + ut[i] - b[i]).collect();
    let w1 = tri_solve_upper(r, &rhs, true)?;
    h.s().mul_acc(&w1, out);
    let w2: Vec<f64> = t.iter().map(|v| -v).collect();
    add_ubar(&w2, out);
    Ok(())
}

/// Direction for the scalar initialization `B₀ = σI`.
pub fn search_direction_scalar(h: &QnHistory, sigma: f64, g: &[f64]) -> Result<Vec<f64>, QnError> {
    assert!(sigma > 0.0, "scalar initialization needs sigma > 0");
    Ok(vecops::scale(-1.0, &apply_h_with(h, H0::Scalar(sigma), g)?))
}

/// Direction for the operator initialization `B₀ = K₀ + σ̄I`.
pub fn search_direction_general(h: &QnHistory, init: &mut OperatorInit, g: &[f64]) -> Result<Vec<f64>, QnError> {
    Ok(vecops::scale(-1.0, &apply_h_with(h, H0::Operator(init), g)?))
}

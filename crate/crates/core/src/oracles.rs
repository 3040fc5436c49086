//! Dense full-memory reference updates, used as test oracles.
//!
//! All routines here are `O(n²)` or worse and assert `n <= 200`.

use thiserror::Error;

use crate::dense::{cholesky, cholesky_solve, sym_solve, DenseMatrix, LinalgError};
use crate::line_search::{strong_wolfe_structured, structured_u, StepStatus, WolfeConfig};
use crate::problems::StructuredProblem;
use crate::vecops;

pub const ORACLE_MAX_N: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("curvature condition violated: {0:e}")]
    CurvatureViolation(f64),
    #[error("sᵀBs = {0:e} is zero")]
    DegenerateCurvature(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnKind {
    Bfgs,
    SbfgsMinus,
    SbfgsPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseQnMatrix {
    pub b: DenseMatrix,
    pub kind: QnKind,
}

impl DenseQnMatrix {
    pub fn new(b: DenseMatrix, kind: QnKind) -> Self {
        assert!(b.rows() <= ORACLE_MAX_N, "oracles are capped at n <= {ORACLE_MAX_N}");
        Self { b, kind }
    }

    pub fn dim(&self) -> usize {
        self.b.rows()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `B - (Bs)(Bs)ᵀ/(sᵀBs) + yyᵀ/(sᵀy)`, formed on the upper triangle and
/// mirrored so the result is exactly symmetric.
fn rank_two(b: &DenseMatrix, s: &[f64], y: &[f64], sty: f64) -> Result<DenseMatrix, OracleError> {
    let bs = b.matvec(s);
    let sbs = dot(s, &bs);
    if sbs == 0.0 || !sbs.is_finite() {
        return Err(OracleError::DegenerateCurvature(sbs));
    }
    let n = b.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = b[(i, j)] - bs[i] * bs[j] / sbs + y[i] * y[j] / sty;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Recursive BFGS update.
pub fn bfgs_update(b: &DenseQnMatrix, s: &[f64], y: &[f64]) -> Result<DenseQnMatrix, OracleError> {
    let sty = dot(s, y);
    if !(sty > 0.0) {
        return Err(OracleError::CurvatureViolation(sty));
    }
    let sbs = dot(s, &b.b.matvec(s));
    if !(sbs > 0.0) {
        return Err(OracleError::CurvatureViolation(sbs));
    }
    Ok(DenseQnMatrix::new(rank_two(&b.b, s, y, sty)?, QnKind::Bfgs))
}

/// Compact BFGS: `B₀ - [B₀S Y] [[SᵀB₀S, L], [Lᵀ, -D]]⁻¹ [SᵀB₀; Yᵀ]`,
/// formed densely.
pub fn compact_bfgs_dense(b0: &DenseQnMatrix, s: &[Vec<f64>], y: &[Vec<f64>]) -> Result<DenseQnMatrix, OracleError> {
    assert_eq!(s.len(), y.len());
    let k = s.len();
    let n = b0.dim();
    if k == 0 {
        return Ok(DenseQnMatrix::new(b0.b.clone(), QnKind::Bfgs));
    }
    for (si, yi) in s.iter().zip(y) {
        let c = dot(si, yi);
        if !(c > 0.0) {
            return Err(OracleError::CurvatureViolation(c));
        }
    }
    let b0s: Vec<Vec<f64>> = s.iter().map(|si| b0.b.matvec(si)).collect();
    let sty = DenseMatrix::from_fn(k, k, |i, j| dot(&s[i], &y[j]));
    let m11 = DenseMatrix::from_fn(k, k, |i, j| dot(&s[i], &b0s[j]));
    let l = DenseMatrix::from_fn(k, k, |i, j| if i > j { sty[(i, j)] } else { 0.0 });
    let nd = DenseMatrix::from_fn(k, k, |i, j| if i == j { -sty[(i, i)] } else { 0.0 });
    let m = DenseMatrix::block2x2(&m11, &l, &l.transpose(), &nd);
    let mut cols: Vec<&[f64]> = b0s.iter().map(|c| c.as_slice()).collect();
    cols.extend(y.iter().map(|c| c.as_slice()));
    let xi = DenseMatrix::from_columns(n, &cols);
    let w = sym_solve(&m, &xi.transpose())?;
    let b = b0.b.sub(&xi.matmul(&w));
    Ok(DenseQnMatrix::new(symmetrize(&b), QnKind::Bfgs))
}

fn symmetrize(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Structured-minus update of the unknown-part approximation:
/// `A₊ = Bᴹ - K₊ - Bᴹssᵀ Bᴹ/(sᵀBᴹs) + uuᵀ/(sᵀu)` with `Bᴹ = A + K`.
pub fn sbfgs_minus_update(
    a: &DenseQnMatrix,
    k_now: &DenseMatrix,
    k_next: &DenseMatrix,
    s: &[f64],
    u: &[f64],
) -> Result<DenseQnMatrix, OracleError> {
    let stu = dot(s, u);
    if !(stu > 0.0) {
        return Err(OracleError::CurvatureViolation(stu));
    }
    let bm = a.b.add(k_now);
    let sbs = dot(s, &bm.matvec(s));
    if !(sbs > 0.0) {
        return Err(OracleError::CurvatureViolation(sbs));
    }
    let b_next = rank_two(&bm, s, u, stu)?;
    Ok(DenseQnMatrix::new(symmetrize(&b_next.sub(k_next)), QnKind::SbfgsMinus))
}

/// Structured-plus update: `A₊ = A - B̂ssᵀB̂/(sᵀB̂s) + uuᵀ/(sᵀu)` with
/// `B̂ = A + K₊`. The result may be indefinite.
pub fn sbfgs_plus_update(a: &DenseQnMatrix, k_next: &DenseMatrix, s: &[f64], u: &[f64]) -> Result<DenseQnMatrix, OracleError> {
    let stu = dot(s, u);
    if !(stu > 0.0) {
        return Err(OracleError::CurvatureViolation(stu));
    }
    let bh = a.b.add(k_next);
    let bs = bh.matvec(s);
    let sbs = dot(s, &bs);
    if sbs.abs() <= 1e-300 || !sbs.is_finite() {
        return Err(OracleError::DegenerateCurvature(sbs));
    }
    let n = a.dim();
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = a.b[(i, j)] - bs[i] * bs[j] / sbs + u[i] * u[j] / stu;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(DenseQnMatrix::new(out, QnKind::SbfgsPlus))
}

/// `true` iff Cholesky succeeds.
pub fn is_spd(a: &DenseMatrix) -> bool {
    cholesky(a, 0.0).is_some()
}

/// Full-memory structured-plus driver with `A₀ = σI`: `p = -(K + A + δI)⁻¹g`
/// with `δ` the first of `0, 1, 10, …, 10¹²` giving a Cholesky factor, the
/// same line search as the limited solver, and the recursive update.
///
/// Returns the iterates `x₀, x₁, …`, stopping at `‖g‖∞ <= epsilon`, after
/// `max_iters` steps or at the first failed line search.
pub fn full_memory_plus_iterates(
    problem: &dyn StructuredProblem,
    x0: &[f64],
    sigma: f64,
    epsilon: f64,
    max_iters: usize,
    wolfe: &WolfeConfig,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let n = problem.dim();
    assert!(n <= ORACLE_MAX_N);
    let mut a = DenseQnMatrix::new(DenseMatrix::identity(n).scaled(sigma), QnKind::SbfgsPlus);
    let mut x = x0.to_vec();
    let ev = problem.evaluate(&x);
    let (mut f, mut g, mut grad_u) = (ev.f, ev.grad(), ev.grad_u);
    let mut out = vec![x.clone()];
    for _ in 0..max_iters {
        if vecops::norm_inf(&g) <= epsilon {
            break;
        }
        let k = problem.known_hessian(&x).to_dense();
        let xmat = k.add(&a.b);
        let l = std::iter::once(0.0)
            .chain((0..=12).map(|e| 10f64.powi(e)))
            .find_map(|d| {
                let mut m = xmat.clone();
                m.add_diag(d);
                cholesky(&m, 0.0)
            })
            .ok_or(OracleError::DegenerateCurvature(f64::NAN))?;
        let p = vecops::scale(-1.0, &cholesky_solve(&l, &g));
        let step = {
            let mut u_of = structured_u(problem, &grad_u);
            strong_wolfe_structured(problem, &x, &p, f, &g, &mut u_of, wolfe)
        };
        if step.status != StepStatus::Converged {
            break;
        }
        let k_next = problem.known_hessian(&step.x_new).to_dense();
        a = sbfgs_plus_update(&a, &k_next, &step.s, &step.u)?;
        x = step.x_new;
        f = step.f_new;
        g = step.g_new;
        grad_u = step.grad_u_new;
        out.push(x.clone());
    }
    Ok(out)
}

//! Discretized Poisson control: `min ½‖x‖² + ½‖y(x) - y*‖²` with
//! `A y = x + g`, where `A` is the five-point Laplacian on the interior
//! `N x N` grid of the unit square, `N = 10 j - 2`.
//!
//! Boundary values are zero, so `g = 0`; the target is
//! `y*(u, v) = sin(πu) sin(πv)` sampled at the interior nodes. Solves with
//! `A` use the exact sine-transform diagonalization of [`Laplacian2d`].

use std::f64::consts::PI;
use std::sync::Arc;

use super::{Evaluation, KnownHessianOp, Laplacian2d, ProblemMetadata, ScaledIdentity, StructuredProblem};
use crate::vecops;

#[derive(Debug)]
pub struct PoissonControl {
    /// `-A`, symmetric positive definite.
    neg_a: Laplacian2d,
    g: Vec<f64>,
    y_star: Vec<f64>,
    known: Arc<ScaledIdentity>,
    meta: ProblemMetadata,
}

pub fn make_poisson_control(j: usize) -> PoissonControl {
    assert!(j >= 1, "mesh index must be >= 1");
    let side = 10 * j - 2;
    let n = side * side;
    let h = 1.0 / (side + 1) as f64;
    let mut y_star = vec![0.0; n];
    for a in 0..side {
        for b in 0..side {
            let (u, v) = ((b + 1) as f64 * h, (a + 1) as f64 * h);
            y_star[a * side + b] = (PI * u).sin() * (PI * v).sin();
        }
    }
    PoissonControl {
        neg_a: Laplacian2d::new(side),
        g: vec![0.0; n],
        y_star,
        known: Arc::new(ScaledIdentity::new(n, 1.0)),
        meta: ProblemMetadata::new("poisson").param("j", j).param("n", n),
    }
}

impl PoissonControl {
    pub fn side(&self) -> usize {
        self.neg_a.side()
    }

    pub fn target(&self) -> &[f64] {
        &self.y_star
    }

    /// `y(x) = A⁻¹(x + g)`
    pub fn state(&self, x: &[f64]) -> Vec<f64> {
        let rhs = vecops::add(x, &self.g);
        let y = self.neg_a.solve_shifted(0.0, &rhs).expect("Laplacian is nonsingular");
        vecops::scale(-1.0, &y)
    }

    /// The control whose state is `y`: `x = A y - g`.
    pub fn control_for_state(&self, y: &[f64]) -> Vec<f64> {
        let ay = vecops::scale(-1.0, &self.neg_a.apply(y));
        vecops::sub(&ay, &self.g)
    }

    /// `A⁻ᵀ r`; `A` is symmetric.
    fn adjoint_solve(&self, r: &[f64]) -> Vec<f64> {
        let z = self.neg_a.solve_shifted(0.0, r).expect("Laplacian is nonsingular");
        vecops::scale(-1.0, &z)
    }
}

impl StructuredProblem for PoissonControl {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        let r = vecops::sub(&self.state(x), &self.y_star);
        0.5 * vecops::dot(x, x) + 0.5 * vecops::dot(&r, &r)
    }

    fn grad_k(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn grad_u(&self, x: &[f64]) -> Vec<f64> {
        let r = vecops::sub(&self.state(x), &self.y_star);
        self.adjoint_solve(&r)
    }

    fn known_hessian(&self, _x: &[f64]) -> Arc<dyn KnownHessianOp> {
        self.known.clone()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn constant_known_hessian(&self) -> bool {
        true
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let r = vecops::sub(&self.state(x), &self.y_star);
        Evaluation {
            f: 0.5 * vecops::dot(x, x) + 0.5 * vecops::dot(&r, &r),
            grad_k: x.to_vec(),
            grad_u: self.adjoint_solve(&r),
        }
    }
}

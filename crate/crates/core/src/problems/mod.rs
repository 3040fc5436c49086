//! Structured test problems `f = k̂ + û` and the known-Hessian operators.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dense::{DenseMatrix, Inertia, LinalgError};
use crate::history::Columns;
use crate::vecops;

pub mod gradcheck;
pub mod libsvm;
pub mod logistic;
pub mod operators;
pub mod poisson;
pub mod quadratic;
pub mod quartic;

pub use gradcheck::fd_gradient_check;
pub use libsvm::{parse_libsvm, parse_libsvm_file, LibsvmData};
pub use logistic::{make_logistic, LogisticProblem};
pub use operators::{Diagonal, Laplacian2d, LowRankPlusIdentity, ScaledIdentity};
pub use poisson::{make_poisson_control, PoissonControl};
pub use quadratic::{make_structured_quadratic, StructuredQuadratic};
pub use quartic::{make_structured_quartic, StructuredQuartic};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("rank r = {r} exceeds dimension n = {n}")]
    BadRank { r: usize, n: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset contains no samples")]
    EmptyDataset,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The known Hessian `K = ∇²k̂(x)` at some point, as an abstract operator.
pub trait KnownHessianOp: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Solves `(K + σ I) z = rhs`.
    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError>;

    /// Inertia of `K + σ I` when the operator can provide it cheaply.
    fn shifted_inertia(&self, _sigma: f64) -> Option<Inertia> {
        None
    }

    /// `true` when `K` does not depend on `x`.
    fn is_constant(&self) -> bool;

    /// Multiplications per entry of one solve (the `l` of the cost tables).
    fn cost_class(&self) -> usize;

    /// Dense copy, for tests and small reference computations.
    fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.apply(&e)
            })
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        DenseMatrix::from_columns(n, &refs)
    }
}

impl fmt::Debug for dyn KnownHessianOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KnownHessianOp(n={}, l={})", self.dim(), self.cost_class())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMetadata {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub seed: Option<u64>,
}

impl ProblemMetadata {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: Vec::new(),
            seed: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// `name(key=value,...)`
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            return self.name.clone();
        }
        let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, p.join(","))
    }
}

/// Objective value and both gradient parts at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub grad_k: Vec<f64>,
    pub grad_u: Vec<f64>,
}

impl Evaluation {
    pub fn grad(&self) -> Vec<f64> {
        vecops::add(&self.grad_k, &self.grad_u)
    }
}

pub trait StructuredProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn metadata(&self) -> &ProblemMetadata;

    fn eval_f(&self, x: &[f64]) -> f64;

    /// `∇k̂(x)`
    fn grad_k(&self, x: &[f64]) -> Vec<f64>;

    /// `∇û(x)`
    fn grad_u(&self, x: &[f64]) -> Vec<f64>;

    /// `K(x) = ∇²k̂(x)`
    fn known_hessian(&self, x: &[f64]) -> Arc<dyn KnownHessianOp>;

    fn initial_point(&self) -> Vec<f64>;

    /// `true` when `∇²k̂` does not depend on `x`.
    fn constant_known_hessian(&self) -> bool {
        false
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Evaluation {
            f: self.eval_f(x),
            grad_k: self.grad_k(x),
            grad_u: self.grad_u(x),
        }
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        vecops::add(&self.grad_k(x), &self.grad_u(x))
    }
}

/// `r` orthonormal columns from gaussian draws, by modified Gram–Schmidt
/// with one reorthogonalization pass.
pub fn orthonormal_columns(n: usize, r: usize, rng: &mut impl Rng) -> Columns {
    assert!(r <= n);
    let mut q = Columns::new(n);
    while q.len() < r {
        let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm0 = vecops::norm2(&c);
        for _pass in 0..2 {
            for k in 0..q.len() {
                let proj = vecops::dot(q.col(k), &c);
                vecops::axpy(-proj, q.col(k), &mut c);
            }
        }
        let norm = vecops::norm2(&c);
        if norm <= 1e-8 * norm0 {
            continue;
        }
        q.col_update(vecops::scale(1.0 / norm, &c), usize::MAX).expect("length n");
    }
    q
}

pub(crate) fn gaussian_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Default order up to which operators without cheap inertia are densified.
pub const DENSE_CAP: usize = 500;

/// Whether `K + σI` is positive definite: operator inertia when available,
/// otherwise dense Cholesky for `n <= dense_cap`; `None` if neither applies.
pub fn shifted_is_positive_definite(op: &dyn KnownHessianOp, sigma: f64, dense_cap: usize) -> Option<bool> {
    if let Some(inertia) = op.shifted_inertia(sigma) {
        return Some(inertia.is_positive_definite());
    }
    if op.dim() <= dense_cap {
        let mut k = op.to_dense();
        k.add_diag(sigma);
        return Some(crate::dense::is_positive_definite(&k));
    }
    None
}

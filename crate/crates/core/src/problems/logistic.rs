//! Regularized logistic regression, `k̂ = λ/2 ‖x‖²`,
//! `û = Σᵢ log(1 + exp(-yᵢ xᵀdᵢ))`.

use std::sync::Arc;

use super::{KnownHessianOp, LibsvmData, ProblemError, ProblemMetadata, ScaledIdentity, StructuredProblem};
use crate::vecops;

#[derive(Debug)]
pub struct LogisticProblem {
    data: LibsvmData,
    lambda: f64,
    known: Arc<ScaledIdentity>,
    meta: ProblemMetadata,
}

pub fn make_logistic(data: LibsvmData, lambda: f64) -> Result<LogisticProblem, ProblemError> {
    if data.n_samples() == 0 {
        return Err(ProblemError::EmptyDataset);
    }
    if data.n_features == 0 {
        return Err(ProblemError::InvalidParameter("dataset has no features".into()));
    }
    if !(lambda > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    let n = data.n_features;
    let meta = ProblemMetadata::new("logistic")
        .param("samples", data.n_samples())
        .param("n", n)
        .param("lambda", lambda);
    Ok(LogisticProblem {
        data,
        lambda,
        known: Arc::new(ScaledIdentity::new(n, lambda)),
        meta,
    })
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(-t))` without overflow.
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    pub fn data(&self) -> &LibsvmData {
        &self.data
    }

    /// Records the dataset name in the metadata label.
    pub fn set_dataset(&mut self, name: &str) {
        self.meta.params.insert(0, ("data".to_string(), name.to_string()));
    }

    fn margins(&self, x: &[f64]) -> Vec<f64> {
        (0..self.data.n_samples())
            .map(|i| {
                let (idx, val) = self.data.row(i);
                let m: f64 = idx.iter().zip(val).map(|(j, v)| x[*j] * v).sum();
                self.data.labels[i] * m
            })
            .collect()
    }

    fn grad_u_from_margins(&self, margins: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.data.n_features];
        for (i, m) in margins.iter().enumerate() {
            let w = -self.data.labels[i] * logistic(-m);
            let (idx, val) = self.data.row(i);
            for (j, v) in idx.iter().zip(val) {
                g[*j] += w * v;
            }
        }
        g
    }
}

impl StructuredProblem for LogisticProblem {
    fn dim(&self) -> usize {
        self.data.n_features
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        let u: f64 = self.margins(x).iter().map(|m| softplus(-m)).sum();
        0.5 * self.lambda * vecops::dot(x, x) + u
    }

    fn grad_k(&self, x: &[f64]) -> Vec<f64> {
        vecops::scale(self.lambda, x)
    }

    fn grad_u(&self, x: &[f64]) -> Vec<f64> {
        self.grad_u_from_margins(&self.margins(x))
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

    fn evaluate(&self, x: &[f64]) -> super::Evaluation {
        let margins = self.margins(x);
        let u: f64 = margins.iter().map(|m| softplus(-m)).sum();
        super::Evaluation {
            f: 0.5 * self.lambda * vecops::dot(x, x) + u,
            grad_k: self.grad_k(x),
            grad_u: self.grad_u_from_margins(&margins),
        }
    }
}

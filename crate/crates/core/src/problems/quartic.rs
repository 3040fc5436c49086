//! Structured quartic `k̂ = Σ (aᵢ² xᵢ⁴ / 12 + xᵢ gᵢ)`, `û = ½ Σ qᵢ xᵢ²`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{gaussian_vec, Diagonal, KnownHessianOp, ProblemMetadata, StructuredProblem};

/// `|aᵢ|` below this is redrawn, so `K(x)` stays away from singular.
pub const MIN_ABS_A: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct StructuredQuartic {
    a: Vec<f64>,
    g: Vec<f64>,
    q: Vec<f64>,
    meta: ProblemMetadata,
}

/// Draw order: `a` (with redraws of `|aᵢ| < 0.1`), then `g`, then `q`, all
/// standard normal. Starts at `x = 1`.
pub fn make_structured_quartic(n: usize, seed: u64) -> StructuredQuartic {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..n)
        .map(|_| loop {
            let v: f64 = rng.sample(StandardNormal);
            if v.abs() >= MIN_ABS_A {
                break v;
            }
        })
        .collect();
    let g = gaussian_vec(n, &mut rng);
    let q = gaussian_vec(n, &mut rng);
    let meta = ProblemMetadata::new("quartic").param("n", n).seed(seed);
    StructuredQuartic { a, g, q, meta }
}

impl StructuredQuartic {
    pub fn from_coefficients(a: Vec<f64>, g: Vec<f64>, q: Vec<f64>) -> Self {
        assert!(a.len() == g.len() && g.len() == q.len());
        let meta = ProblemMetadata::new("quartic").param("n", a.len());
        Self { a, g, q, meta }
    }
}

impl StructuredProblem for StructuredQuartic {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for i in 0..x.len() {
            let (a, xi) = (self.a[i], x[i]);
            f += a * a * xi.powi(4) / 12.0 + xi * self.g[i] + 0.5 * self.q[i] * xi * xi;
        }
        f
    }

    fn grad_k(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| self.a[i] * self.a[i] * x[i].powi(3) / 3.0 + self.g[i])
            .collect()
    }

    fn grad_u(&self, x: &[f64]) -> Vec<f64> {
        self.q.iter().zip(x).map(|(q, x)| q * x).collect()
    }

    fn known_hessian(&self, x: &[f64]) -> Arc<dyn KnownHessianOp> {
        let d = (0..x.len()).map(|i| self.a[i] * self.a[i] * x[i] * x[i]).collect();
        Arc::new(Diagonal::new(d, false))
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }
}

//! Central-difference gradient check.

use rand::seq::index::sample;
use rand::SeedableRng;

use super::StructuredProblem;
use crate::vecops;

/// Coordinates checked when `n` exceeds this; the rest are skipped.
pub const MAX_CHECKED_COORDS: usize = 2000;

/// Returns `‖g_fd - g‖∞ / max(1, ‖g‖∞)` over the checked coordinates.
///
/// `h` defaults to `1e-6 · max(1, ‖x‖∞)`. For `n > 2000` a fixed-seed
/// sample of 2000 coordinates is checked.
pub fn fd_gradient_check(problem: &dyn StructuredProblem, x: &[f64], h: Option<f64>) -> f64 {
    let n = problem.dim();
    assert_eq!(x.len(), n);
    let h = h.unwrap_or(1e-6 * vecops::norm_inf(x).max(1.0));
    let g = problem.grad(x);
    let coords: Vec<usize> = if n > MAX_CHECKED_COORDS {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e37);
        let mut c = sample(&mut rng, n, MAX_CHECKED_COORDS).into_vec();
        c.sort_unstable();
        c
    } else {
        (0..n).collect()
    };
    let mut xp = x.to_vec();
    let mut err = 0.0_f64;
    for i in coords {
        let xi = xp[i];
        xp[i] = xi + h;
        let fp = problem.eval_f(&xp);
        xp[i] = xi - h;
        let fm = problem.eval_f(&xp);
        xp[i] = xi;
        let fd = (fp - fm) / (2.0 * h);
        err = err.max((fd - g[i]).abs());
    }
    err / vecops::norm_inf(&g).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::*;
    use std::sync::Arc;

    struct Broken(StructuredQuartic);

    impl StructuredProblem for Broken {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn metadata(&self) -> &ProblemMetadata {
            self.0.metadata()
        }
        fn eval_f(&self, x: &[f64]) -> f64 {
            self.0.eval_f(x)
        }
        fn grad_k(&self, x: &[f64]) -> Vec<f64> {
            vecops::scale(2.0, &self.0.grad_k(x))
        }
        fn grad_u(&self, x: &[f64]) -> Vec<f64> {
            self.0.grad_u(x)
        }
        fn known_hessian(&self, x: &[f64]) -> Arc<dyn KnownHessianOp> {
            self.0.known_hessian(x)
        }
        fn initial_point(&self) -> Vec<f64> {
            self.0.initial_point()
        }
    }

    #[test]
    fn quadratic_is_near_exact() {
        let p = make_structured_quadratic(30, 3, 1.0, (0.0, 10.0), 1).unwrap();
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        assert!(fd_gradient_check(&p, &x, None) <= 1e-7);
    }

    #[test]
    fn quartic_passes_and_broken_fails() {
        let p = make_structured_quartic(10, 2);
        let x = p.initial_point();
        assert!(fd_gradient_check(&p, &x, None) <= 1e-5);
        let b = Broken(p);
        assert!(fd_gradient_check(&b, &x, None) > 1e-2);
    }
}

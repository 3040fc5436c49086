//! Structured quadratics `k̂ = xᵀg + Q₁(x)`, `û = Q₂(x)` with
//! `Qᵢ(x) = ½ xᵀ(φI + QᵢDᵢQᵢᵀ)x`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    gaussian_vec, orthonormal_columns, KnownHessianOp, LowRankPlusIdentity, ProblemError,
    ProblemMetadata, StructuredProblem,
};
use crate::vecops;

#[derive(Debug)]
pub struct StructuredQuadratic {
    g: Vec<f64>,
    known: Arc<LowRankPlusIdentity>,
    unknown: LowRankPlusIdentity,
    meta: ProblemMetadata,
}

/// Builds the quadratic pair from one seed.
///
/// Draw order: `g`, then `Q₁`, `D₁`, then `Q₂`, `D₂`. `D` entries are
/// uniform in `d_range`; `Qᵢ` are orthonormalized gaussian columns.
pub fn make_structured_quadratic(
    n: usize,
    r: usize,
    phi: f64,
    d_range: (f64, f64),
    seed: u64,
) -> Result<StructuredQuadratic, ProblemError> {
    if r > n || r == 0 {
        return Err(ProblemError::BadRank { r, n });
    }
    if !(phi > 0.0) {
        return Err(ProblemError::InvalidParameter(format!("phi must be > 0, got {phi}")));
    }
    let (lo, hi) = d_range;
    if !(lo <= hi) {
        return Err(ProblemError::InvalidParameter(format!("empty d_range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_vec(n, &mut rng);
    let draw_d = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..r).map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect()
    };
    let q1 = orthonormal_columns(n, r, &mut rng);
    let d1 = draw_d(&mut rng);
    let q2 = orthonormal_columns(n, r, &mut rng);
    let d2 = draw_d(&mut rng);
    let meta = ProblemMetadata::new("structured_quadratic")
        .param("n", n)
        .param("r", r)
        .param("phi", phi)
        .param("d", format!("[{lo},{hi}]"))
        .seed(seed);
    Ok(StructuredQuadratic {
        g,
        known: Arc::new(LowRankPlusIdentity::new(phi, q1, d1)),
        unknown: LowRankPlusIdentity::new(phi, q2, d2),
        meta,
    })
}

impl StructuredQuadratic {
    pub fn linear_term(&self) -> &[f64] {
        &self.g
    }

    pub fn known_part(&self) -> &LowRankPlusIdentity {
        &self.known
    }

    pub fn unknown_part(&self) -> &LowRankPlusIdentity {
        &self.unknown
    }
}

impl StructuredProblem for StructuredQuadratic {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        vecops::dot(x, &self.g) + 0.5 * self.known.quad_form(x) + 0.5 * self.unknown.quad_form(x)
    }

    fn grad_k(&self, x: &[f64]) -> Vec<f64> {
        vecops::add(&self.known.apply(x), &self.g)
    }

    fn grad_u(&self, x: &[f64]) -> Vec<f64> {
        self.unknown.apply(x)
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{cholesky, cholesky_solve, DenseMatrix};

    #[test]
    fn full_rank_zero_d_has_symmetric_minimizer() {
        let p = make_structured_quadratic(6, 6, 2.0, (0.0, 0.0), 3).unwrap();
        let xs = vecops::scale(-1.0 / (2.0 * 2.0), p.linear_term());
        assert!(vecops::norm_inf(&p.grad(&xs)) < 1e-14);
    }

    #[test]
    fn bad_rank() {
        assert!(matches!(
            make_structured_quadratic(3, 4, 1.0, (0.0, 1.0), 0),
            Err(ProblemError::BadRank { r: 4, n: 3 })
        ));
    }

    /// Number of eigenvalues below `lam`, by Sylvester inertia of `A - lam I`.
    fn count_below(a: &DenseMatrix, lam: f64) -> usize {
        let mut s = a.clone();
        s.add_diag(-lam);
        crate::dense::Ldlt::factor(&s).unwrap().inertia().negative
    }

    #[test]
    fn known_part_spectrum_has_expected_shape() {
        let p = make_structured_quadratic(100, 10, 1.0, (0.0, 999.0), 1).unwrap();
        let kd = p.known_part().to_dense();
        let ones = count_below(&kd, 1.0 + 1e-8) - count_below(&kd, 1.0 - 1e-8);
        assert_eq!(ones, 90);
        let p = make_structured_quadratic(60, 6, 1000.0, (-999.0, 0.0), 2).unwrap();
        let ud = p.unknown_part().to_dense();
        assert_eq!(count_below(&ud, 1.0 - 1e-8), 0);
        assert_eq!(count_below(&ud, 1000.0 + 1e-8), 60);
    }

    #[test]
    fn dense_minimizer_zeroes_gradient() {
        let p = make_structured_quadratic(80, 8, 1.0, (0.0, 999.0), 5).unwrap();
        let h = p.known_part().to_dense().add(&p.unknown_part().to_dense());
        let l = cholesky(&h, 0.0).unwrap();
        let rhs = vecops::scale(-1.0, p.linear_term());
        let xs = cholesky_solve(&l, &rhs);
        assert!(vecops::norm_inf(&p.grad(&xs)) <= 1e-8);
    }
}

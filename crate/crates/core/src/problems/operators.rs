//! Concrete known-Hessian operators.

use std::f64::consts::PI;

use crate::dense::{Inertia, LinalgError};
use crate::history::Columns;
use crate::vecops;

use super::KnownHessianOp;

fn count_inertia(eigs: impl Iterator<Item = f64>, scale: f64) -> Inertia {
    let tol = 1e-14 * scale.max(1.0);
    let mut out = Inertia::default();
    for e in eigs {
        if e > tol {
            out.positive += 1;
        } else if e < -tol {
            out.negative += 1;
        } else {
            out.zero += 1;
        }
    }
    out
}

/// `K = c I`
#[derive(Debug, Clone)]
pub struct ScaledIdentity {
    n: usize,
    c: f64,
}

impl ScaledIdentity {
    pub fn new(n: usize, c: f64) -> Self {
        Self { n, c }
    }
}

impl KnownHessianOp for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        vecops::scale(self.c, x)
    }

    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let d = self.c + sigma;
        if d.abs() <= 1e-300 {
            return Err(LinalgError::SingularShift { shift: sigma });
        }
        Ok(vecops::scale(1.0 / d, rhs))
    }

    fn shifted_inertia(&self, sigma: f64) -> Option<Inertia> {
        let d = self.c + sigma;
        Some(count_inertia(std::iter::repeat_n(d, self.n), d.abs()))
    }

    fn is_constant(&self) -> bool {
        true
    }

    fn cost_class(&self) -> usize {
        1
    }
}

/// `K = diag(d)`
#[derive(Debug, Clone)]
pub struct Diagonal {
    d: Vec<f64>,
    constant: bool,
}

impl Diagonal {
    pub fn new(d: Vec<f64>, constant: bool) -> Self {
        Self { d, constant }
    }

    pub fn entries(&self) -> &[f64] {
        &self.d
    }
}

impl KnownHessianOp for Diagonal {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.d.iter().zip(x).map(|(d, x)| d * x).collect()
    }

    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let scale = vecops::norm_inf(&self.d) + sigma.abs();
        let mut out = Vec::with_capacity(rhs.len());
        for (d, r) in self.d.iter().zip(rhs) {
            let e = d + sigma;
            if e.abs() <= 1e-14 * scale.max(1e-300) {
                return Err(LinalgError::SingularShift { shift: sigma });
            }
            out.push(r / e);
        }
        Ok(out)
    }

    fn shifted_inertia(&self, sigma: f64) -> Option<Inertia> {
        let scale = vecops::norm_inf(&self.d) + sigma.abs();
        Some(count_inertia(self.d.iter().map(|d| d + sigma), scale))
    }

    fn is_constant(&self) -> bool {
        self.constant
    }

    fn cost_class(&self) -> usize {
        1
    }
}

/// `K = φ I + Q diag(d) Qᵀ` with orthonormal columns `Q` (`n x r`).
#[derive(Debug, Clone)]
pub struct LowRankPlusIdentity {
    phi: f64,
    q: Columns,
    d: Vec<f64>,
}

impl LowRankPlusIdentity {
    /// `q` must have orthonormal columns; only then is `solve_shifted` exact.
    pub fn new(phi: f64, q: Columns, d: Vec<f64>) -> Self {
        assert_eq!(q.len(), d.len(), "rank and diagonal length");
        Self { phi, q, d }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn basis(&self) -> &Columns {
        &self.q
    }

    pub fn low_rank_diag(&self) -> &[f64] {
        &self.d
    }

    /// `xᵀ K x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let qx = self.q.t_mul(x);
        self.phi * vecops::dot(x, x) + qx.iter().zip(&self.d).map(|(a, d)| d * a * a).sum::<f64>()
    }
}

impl KnownHessianOp for LowRankPlusIdentity {
    fn dim(&self) -> usize {
        self.q.rows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let qx = self.q.t_mul(x);
        let w: Vec<f64> = qx.iter().zip(&self.d).map(|(a, d)| a * d).collect();
        let mut out = vecops::scale(self.phi, x);
        self.q.mul_acc(&w, &mut out);
        out
    }

    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        // (cI + Q D Qᵀ)⁻¹ = (1/c)(I - Q diag(d/(c+d)) Qᵀ) for orthonormal Q
        let c = self.phi + sigma;
        let scale = self.phi.abs() + sigma.abs() + vecops::norm_inf(&self.d);
        let tiny = 1e-14 * scale.max(1e-300);
        if c.abs() <= tiny || self.d.iter().any(|d| (c + d).abs() <= tiny) {
            return Err(LinalgError::SingularShift { shift: sigma });
        }
        let qr = self.q.t_mul(rhs);
        let w: Vec<f64> = qr.iter().zip(&self.d).map(|(a, d)| -a * d / (c + d)).collect();
        let mut out = rhs.to_vec();
        self.q.mul_acc(&w, &mut out);
        Ok(vecops::scale(1.0 / c, &out))
    }

    fn shifted_inertia(&self, sigma: f64) -> Option<Inertia> {
        let c = self.phi + sigma;
        let n = self.dim();
        let r = self.d.len();
        let scale = c.abs() + vecops::norm_inf(&self.d);
        let eigs = self.d.iter().map(|d| c + d).chain(std::iter::repeat_n(c, n - r));
        Some(count_inertia(eigs, scale))
    }

    fn is_constant(&self) -> bool {
        true
    }

    fn cost_class(&self) -> usize {
        self.d.len().max(1)
    }
}

/// Symmetric positive definite five-point operator `-Δ_h` on an `N x N`
/// interior grid with zero Dirichlet boundary, `h = 1/(N+1)`.
///
/// Grid point `(a, b)` (row `a`, column `b`) has index `a * N + b`. Shifted
/// solves diagonalize the operator with the discrete sine transform
/// `Φ_ik = sqrt(2/(N+1)) sin(i k π/(N+1))`, which costs `O(N³) = O(n^1.5)`.
#[derive(Debug, Clone)]
pub struct Laplacian2d {
    side: usize,
    inv_h2: f64,
    sine: Vec<f64>,
    mu: Vec<f64>,
}

impl Laplacian2d {
    pub fn new(side: usize) -> Self {
        assert!(side >= 1);
        let np1 = (side + 1) as f64;
        let norm = (2.0 / np1).sqrt();
        let mut sine = vec![0.0; side * side];
        for i in 0..side {
            for k in 0..side {
                sine[i * side + k] = norm * (((i + 1) * (k + 1)) as f64 * PI / np1).sin();
            }
        }
        let mu = (1..=side).map(|k| 2.0 - 2.0 * (k as f64 * PI / np1).cos()).collect();
        Self {
            side,
            inv_h2: np1 * np1,
            sine,
            mu,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `Φ X Φ` for an `N x N` grid function (Φ is symmetric and orthogonal).
    fn transform(&self, x: &[f64]) -> Vec<f64> {
        let n = self.side;
        let mut tmp = vec![0.0; n * n];
        // rows: tmp[a, k] = Σ_b x[a, b] Φ[b, k]
        for a in 0..n {
            let row = &x[a * n..(a + 1) * n];
            let out = &mut tmp[a * n..(a + 1) * n];
            for (b, xb) in row.iter().enumerate() {
                if *xb == 0.0 {
                    continue;
                }
                vecops::axpy(*xb, &self.sine[b * n..(b + 1) * n], out);
            }
        }
        // columns: out[k, c] = Σ_a Φ[k, a] tmp[a, c]
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let dst = &mut out[k * n..(k + 1) * n];
            for a in 0..n {
                let w = self.sine[k * n + a];
                vecops::axpy(w, &tmp[a * n..(a + 1) * n], dst);
            }
        }
        out
    }

    fn eigenvalue(&self, k: usize, l: usize) -> f64 {
        (self.mu[k] + self.mu[l]) * self.inv_h2
    }
}

impl KnownHessianOp for Laplacian2d {
    fn dim(&self) -> usize {
        self.side * self.side
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.side;
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let i = a * n + b;
                let mut v = 4.0 * x[i];
                if a > 0 {
                    v -= x[i - n];
                }
                if a + 1 < n {
                    v -= x[i + n];
                }
                if b > 0 {
                    v -= x[i - 1];
                }
                if b + 1 < n {
                    v -= x[i + 1];
                }
                out[i] = v * self.inv_h2;
            }
        }
        out
    }

    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.side;
        let scale = 8.0 * self.inv_h2 + sigma.abs();
        let mut hat = self.transform(rhs);
        for k in 0..n {
            for l in 0..n {
                let e = self.eigenvalue(k, l) + sigma;
                if e.abs() <= 1e-14 * scale {
                    return Err(LinalgError::SingularShift { shift: sigma });
                }
                hat[k * n + l] /= e;
            }
        }
        Ok(self.transform(&hat))
    }

    fn shifted_inertia(&self, sigma: f64) -> Option<Inertia> {
        let n = self.side;
        let eigs = (0..n * n).map(|i| self.eigenvalue(i / n, i % n) + sigma);
        Some(count_inertia(eigs, 8.0 * self.inv_h2 + sigma.abs()))
    }

    fn is_constant(&self) -> bool {
        true
    }

    fn cost_class(&self) -> usize {
        // O(N³) per solve, i.e. about 4√n multiplications per entry
        4 * self.side
    }
}

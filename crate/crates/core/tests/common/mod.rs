#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sqn_core::dense::DenseMatrix;
use sqn_core::history::{HistoryMode, QnHistory};
use sqn_core::minus::{MinusInit, MinusState};
use sqn_core::oracles::{bfgs_update, sbfgs_minus_update, sbfgs_plus_update, DenseQnMatrix, QnKind};
use sqn_core::plus::PlusState;
use sqn_core::problems::ScaledIdentity;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric with gaussian entries times `scale`.
pub fn random_sym(n: usize, scale: f64, rng: &mut impl Rng) -> DenseMatrix {
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    DenseMatrix::from_fn(n, n, |i, j| 0.5 * scale * (g[(i, j)] + g[(j, i)]))
}

/// `I + 0.9 W/‖W‖_F`: eigenvalues in `[0.1, 1.9]`.
pub fn near_identity(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    let w = random_sym(n, 1.0, rng);
    let f = w.norm_fro().max(1e-300);
    let mut c = w.scaled(0.9 / f);
    c.add_diag(1.0);
    c
}

pub fn densify(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> DenseMatrix {
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            apply(&e)
        })
        .collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    DenseMatrix::from_columns(n, &refs)
}

pub fn rel_fro(a: &DenseMatrix, reference: &DenseMatrix) -> f64 {
    a.sub(reference).norm_fro() / reference.norm_fro().max(1e-300)
}

/// `k` pairs with `u = C s`, `C` near the identity, and known Hessians
/// `K₀ … K_k`. `v_i = K_{i+1} s_i`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n: usize,
    pub sigma: f64,
    pub ks: Vec<DenseMatrix>,
    pub s: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }
}

/// Minus trajectory with `n ≤ 20`, `k ≤ 6`; `K` symmetric, possibly
/// indefinite (the minus recursion only depends on `K` through `A + K`).
pub fn minus_trajectory(seed: u64) -> (Trajectory, DenseMatrix) {
    let mut r = rng(seed);
    let n = r.random_range(2..=20);
    let k = r.random_range(1..=6);
    let sigma = 10f64.powf(r.random_range(-1.0..1.0));
    let ks: Vec<DenseMatrix> = (0..=k).map(|_| random_sym(n, 0.5, &mut r)).collect();
    let mut a = DenseQnMatrix::new(
        {
            let mut m = ks[0].scaled(-1.0);
            m.add_diag(sigma);
            m
        },
        QnKind::SbfgsMinus,
    );
    let mut t = Trajectory {
        n,
        sigma,
        ks,
        s: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
    };
    for i in 0..k {
        let s = gaussian(n, &mut r);
        let u = near_identity(n, &mut r).matvec(&s);
        a = sbfgs_minus_update(&a, &t.ks[i], &t.ks[i + 1], &s, &u).expect("sᵀu > 0 by construction");
        t.v.push(t.ks[i + 1].matvec(&s));
        t.s.push(s);
        t.u.push(u);
    }
    let b = a.b.add(&t.ks[k]);
    (t, b)
}

/// Plus trajectory; with `indefinite`, `K` has eigenvalues of both signs.
/// Steps whose `sᵀB̂s` is tiny relative to `‖s‖² ‖B̂‖` are redrawn, so the
/// recursion itself stays well conditioned.
pub fn plus_trajectory(seed: u64, indefinite: bool) -> (Trajectory, DenseMatrix) {
    let mut r = rng(seed);
    let n = r.random_range(2..=20);
    let k = r.random_range(1..=6);
    let sigma = 10f64.powf(r.random_range(-1.0..1.0));
    let ks: Vec<DenseMatrix> = (0..=k)
        .map(|_| {
            if indefinite {
                random_sym(n, 1.0, &mut r)
            } else {
                let mut c = near_identity(n, &mut r);
                c.add_diag(0.5);
                c
            }
        })
        .collect();
    let mut a = DenseQnMatrix::new(DenseMatrix::from_fn(n, n, |i, j| if i == j { sigma } else { 0.0 }), QnKind::SbfgsPlus);
    let mut t = Trajectory {
        n,
        sigma,
        ks,
        s: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
    };
    for i in 0..k {
        let kn = &t.ks[i + 1];
        let bh = a.b.add(kn);
        let s = loop {
            let s = gaussian(n, &mut r);
            let sbs = dot(&s, &bh.matvec(&s));
            if sbs.abs() > 1e-2 * dot(&s, &s) * bh.norm_fro() {
                break s;
            }
        };
        let u = near_identity(n, &mut r).matvec(&s);
        a = sbfgs_plus_update(&a, kn, &s, &u).expect("well-conditioned step");
        t.v.push(kn.matvec(&s));
        t.s.push(s);
        t.u.push(u);
    }
    (t, a.b)
}

/// Recursive BFGS from `σI` on the pairs `(s, u)`.
pub fn recursive_bfgs(t: &Trajectory) -> DenseMatrix {
    let mut b = DenseQnMatrix::new(DenseMatrix::from_fn(t.n, t.n, |i, j| if i == j { t.sigma } else { 0.0 }), QnKind::Bfgs);
    for (s, u) in t.s.iter().zip(&t.u) {
        b = bfgs_update(&b, s, u).expect("positive curvature");
    }
    b.b
}

pub fn minus_history(t: &Trajectory, m: usize) -> QnHistory {
    let mut h = QnHistory::new(t.n, m, HistoryMode::Minus);
    for (s, u) in t.s.iter().zip(&t.u) {
        h.push_pair(s, u, None).expect("positive curvature");
    }
    h
}

pub fn plus_history(t: &Trajectory, m: usize) -> QnHistory {
    let mut h = QnHistory::new(t.n, m, HistoryMode::Plus);
    for ((s, u), v) in t.s.iter().zip(&t.u).zip(&t.v) {
        h.push_pair(s, u, Some(v)).expect("positive curvature");
    }
    h
}

/// Densified compact minus matrix `B` with `B₀ = σI`.
pub fn compact_minus_b(t: &Trajectory) -> DenseMatrix {
    let h = minus_history(t, t.len().max(1));
    let mut init = MinusInit::Scalar { sigma: t.sigma };
    let st = MinusState::new(&h, &mut init);
    densify(t.n, |e| st.apply_b(e).expect("nonsingular middle matrix"))
}

/// Densified compact plus matrix `A` with `A₀ = σI`.
pub fn compact_plus_a(t: &Trajectory) -> DenseMatrix {
    let h = plus_history(t, t.len().max(1));
    let st = PlusState::new(&h, t.sigma, Arc::new(ScaledIdentity::new(t.n, 1.0))).expect("nonsingular middle matrix");
    densify(t.n, |e| st.apply_a(e))
}

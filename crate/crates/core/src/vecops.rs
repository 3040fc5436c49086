//! Length-`n` vector kernels.
//!
//! Reductions are always summed chunk by chunk in a fixed order, so the
//! sequential and the rayon paths produce bitwise identical results. The
//! dispatching functions switch to rayon (feature `parallel`) once the vector
//! is longer than [`PAR_THRESHOLD`].

/// Chunk length used by all reductions.
pub const CHUNK: usize = 4096;

/// Minimum length before the dispatching kernels go parallel.
pub const PAR_THRESHOLD: usize = 1 << 15;

#[inline]
fn dot_chunk(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.chunks(CHUNK)
        .zip(b.chunks(CHUNK))
        .map(|(x, y)| dot_chunk(x, y))
        .fold(0.0, |acc, p| acc + p)
}

#[cfg(feature = "parallel")]
pub fn dot_par(a: &[f64], b: &[f64]) -> f64 {
    use rayon::prelude::*;
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| dot_chunk(x, y))
        .collect();
    partial.into_iter().fold(0.0, |acc, p| acc + p)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(feature = "parallel")]
    if a.len() >= PAR_THRESHOLD {
        return dot_par(a, b);
    }
    dot_seq(a, b)
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `[c_0 .. c_{j-1}]^T x` for a list of columns.
pub fn gemv_t_seq(cols: &[&[f64]], x: &[f64]) -> Vec<f64> {
    cols.iter().map(|c| dot_seq(c, x)).collect()
}

#[cfg(feature = "parallel")]
pub fn gemv_t_par(cols: &[&[f64]], x: &[f64]) -> Vec<f64> {
    use rayon::prelude::*;
    cols.par_iter().map(|c| dot_par(c, x)).collect()
}

pub fn gemv_t(cols: &[&[f64]], x: &[f64]) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if x.len() >= PAR_THRESHOLD {
        return gemv_t_par(cols, x);
    }
    gemv_t_seq(cols, x)
}

#[inline]
fn gemv_rows(cols: &[&[f64]], w: &[f64], offset: usize, out: &mut [f64]) {
    for (c, &wi) in cols.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        let src = &c[offset..offset + out.len()];
        for (o, s) in out.iter_mut().zip(src) {
            *o += wi * s;
        }
    }
}

/// `out += [c_0 .. c_{j-1}] w`
pub fn gemv_acc_seq(cols: &[&[f64]], w: &[f64], out: &mut [f64]) {
    debug_assert_eq!(cols.len(), w.len());
    for (k, chunk) in out.chunks_mut(CHUNK).enumerate() {
        gemv_rows(cols, w, k * CHUNK, chunk);
    }
}

#[cfg(feature = "parallel")]
pub fn gemv_acc_par(cols: &[&[f64]], w: &[f64], out: &mut [f64]) {
    use rayon::prelude::*;
    debug_assert_eq!(cols.len(), w.len());
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(k, chunk)| gemv_rows(cols, w, k * CHUNK, chunk));
}

pub fn gemv_acc(cols: &[&[f64]], w: &[f64], out: &mut [f64]) {
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_THRESHOLD {
        return gemv_acc_par(cols, w, out);
    }
    gemv_acc_seq(cols, w, out)
}

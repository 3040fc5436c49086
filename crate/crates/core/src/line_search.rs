//! Strong Wolfe line search (Moré–Thuente) with the extra structured
//! acceptance condition `sᵀu > 0`.
//!
//! The bracketing logic and the safeguarded step `dcstep` follow the
//! MINPACK-2 `dcsrch` routine.

use crate::problems::StructuredProblem;
use crate::vecops;

#[derive(Debug, Clone, PartialEq)]
pub struct WolfeConfig {
    /// Sufficient decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub alpha_init: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_evals: usize,
    /// Relative width below which the bracket counts as collapsed.
    pub xtol: f64,
    pub require_structured_curvature: bool,
}

impl Default for WolfeConfig {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            alpha_init: 1.0,
            alpha_min: 0.0,
            alpha_max: 1e8,
            max_evals: 60,
            xtol: 1e-14,
            require_structured_curvature: true,
        }
    }
}

impl WolfeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.c1 && self.c1 <= self.c2 && self.c2 < 1.0) {
            return Err(format!("need 0 < c1 <= c2 < 1, got c1={} c2={}", self.c1, self.c2));
        }
        if !(self.alpha_init > 0.0 && self.alpha_max >= self.alpha_init && self.alpha_min >= 0.0) {
            return Err("need 0 <= alpha_min, 0 < alpha_init <= alpha_max".into());
        }
        if self.max_evals == 0 {
            return Err("max_evals must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Converged,
    MaxEvals,
    NoDescent,
    /// The bracket collapsed or the step hit `alpha_min`/`alpha_max`
    /// before the conditions held (MINPACK warnings).
    Stalled,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub alpha: f64,
    pub x_new: Vec<f64>,
    pub f_new: f64,
    pub g_new: Vec<f64>,
    pub grad_u_new: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub evals: usize,
    pub status: StepStatus,
}

impl StepResult {
    pub fn s_dot_u(&self) -> f64 {
        vecops::dot(&self.s, &self.u)
    }
}

/// `u(α) = K(x+αp)s + ∇û(x+αp) - ∇û(x)` for the problem's own split.
pub fn structured_u<'a>(
    problem: &'a dyn StructuredProblem,
    grad_u0: &'a [f64],
) -> impl FnMut(&[f64], &[f64], &[f64]) -> Vec<f64> + 'a {
    move |x_t, s, grad_u_t| {
        let mut u = problem.known_hessian(x_t).apply(s);
        for i in 0..u.len() {
            u[i] += grad_u_t[i] - grad_u0[i];
        }
        u
    }
}

struct Trial {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    grad_u: Vec<f64>,
    dg: f64,
}

/// Searches along `p` from `x` for a step satisfying
/// `f(x+αp) <= f0 + c1 α pᵀg0` and `|pᵀg(x+αp)| <= c2 |pᵀg0|`, and, when
/// required, `sᵀu(α) > 0` with `u` from `u_of(x_t, s, ∇û(x_t))`.
///
/// When a Wolfe point fails the structured condition the curvature
/// tolerance is tightened tenfold and the search goes on; points closer to
/// a line minimizer satisfy it on the convex test problems.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe_structured(
    problem: &dyn StructuredProblem,
    x: &[f64],
    p: &[f64],
    f0: f64,
    g0: &[f64],
    u_of: &mut dyn FnMut(&[f64], &[f64], &[f64]) -> Vec<f64>,
    cfg: &WolfeConfig,
) -> StepResult {
    let ginit = vecops::dot(g0, p);
    let eval = |alpha: f64| -> Trial {
        let mut xt = x.to_vec();
        vecops::axpy(alpha, p, &mut xt);
        let ev = problem.evaluate(&xt);
        let g = ev.grad();
        let dg = vecops::dot(&g, p);
        Trial {
            x: xt,
            f: ev.f,
            g,
            grad_u: ev.grad_u,
            dg,
        }
    };
    let finish = |alpha: f64, t: Trial, evals: usize, status: StepStatus, u_of: &mut dyn FnMut(&[f64], &[f64], &[f64]) -> Vec<f64>| {
        let s = vecops::scale(alpha, p);
        let u = u_of(&t.x, &s, &t.grad_u);
        StepResult {
            alpha,
            x_new: t.x,
            f_new: t.f,
            g_new: t.g,
            grad_u_new: t.grad_u,
            s,
            u,
            evals,
            status,
        }
    };
    if !(ginit < 0.0) {
        let n = x.len();
        return StepResult {
            alpha: 0.0,
            x_new: x.to_vec(),
            f_new: f0,
            g_new: g0.to_vec(),
            grad_u_new: vec![0.0; n],
            s: vec![0.0; n],
            u: vec![0.0; n],
            evals: 0,
            status: StepStatus::NoDescent,
        };
    }

    let mut gtol = cfg.c2;
    let gtest = cfg.c1 * ginit;
    let mut search = Dcsrch::new(f0, ginit, cfg);
    let mut stp = cfg.alpha_init.clamp(cfg.alpha_min, cfg.alpha_max);
    let mut evals = 0;
    let mut last: Option<(f64, Trial)> = None;
    while evals < cfg.max_evals {
        let t = eval(stp);
        evals += 1;
        if !t.f.is_finite() || !t.dg.is_finite() {
            // overflow at a long trial step: never go this far again
            search.alpha_max = search.alpha_max.min(stp);
            stp = search.stx + 0.5 * (stp - search.stx);
            continue;
        }
        let ftest = f0 + stp * gtest;
        if t.f <= ftest && t.dg.abs() <= gtol * (-ginit) {
            if !cfg.require_structured_curvature {
                return finish(stp, t, evals, StepStatus::Converged, u_of);
            }
            let s = vecops::scale(stp, p);
            let u = u_of(&t.x, &s, &t.grad_u);
            if vecops::dot(&s, &u) > 0.0 {
                return StepResult {
                    alpha: stp,
                    x_new: t.x,
                    f_new: t.f,
                    g_new: t.g,
                    grad_u_new: t.grad_u,
                    s,
                    u,
                    evals,
                    status: StepStatus::Converged,
                };
            }
            gtol *= 0.1;
        }
        if search.warning(stp, t.f, t.dg, ftest) {
            return finish(stp, t, evals, StepStatus::Stalled, u_of);
        }
        let next = search.next(stp, t.f, t.dg, ftest);
        last = Some((stp, t));
        stp = next;
    }
    match last {
        Some((alpha, t)) => finish(alpha, t, evals, StepStatus::MaxEvals, u_of),
        None => {
            let n = x.len();
            StepResult {
                alpha: 0.0,
                x_new: x.to_vec(),
                f_new: f0,
                g_new: g0.to_vec(),
                grad_u_new: problem.grad_u(x),
                s: vec![0.0; n],
                u: vec![0.0; n],
                evals,
                status: StepStatus::MaxEvals,
            }
        }
    }
}

/// State of the MINPACK-2 `dcsrch` iteration.
struct Dcsrch {
    brackt: bool,
    stage: u8,
    gtest: f64,
    width: f64,
    width1: f64,
    stx: f64,
    fx: f64,
    gx: f64,
    sty: f64,
    fy: f64,
    gy: f64,
    stmin: f64,
    stmax: f64,
    alpha_min: f64,
    alpha_max: f64,
    xtol: f64,
}

const XTRAPL: f64 = 1.1;
const XTRAPU: f64 = 4.0;
const P5: f64 = 0.5;
const P66: f64 = 0.66;

impl Dcsrch {
    fn new(finit: f64, ginit: f64, cfg: &WolfeConfig) -> Self {
        let stp = cfg.alpha_init.clamp(cfg.alpha_min, cfg.alpha_max);
        let width = cfg.alpha_max - cfg.alpha_min;
        Self {
            brackt: false,
            stage: 1,
            gtest: cfg.c1 * ginit,
            width,
            width1: width / P5,
            stx: 0.0,
            fx: finit,
            gx: ginit,
            sty: 0.0,
            fy: finit,
            gy: ginit,
            stmin: 0.0,
            stmax: stp + XTRAPU * stp,
            alpha_min: cfg.alpha_min,
            alpha_max: cfg.alpha_max,
            xtol: cfg.xtol,
        }
    }

    fn warning(&self, stp: f64, f: f64, g: f64, ftest: f64) -> bool {
        (self.brackt && (stp <= self.stmin || stp >= self.stmax))
            || (self.brackt && self.stmax - self.stmin <= self.xtol * self.stmax)
            || (stp == self.alpha_max && f <= ftest && g <= self.gtest)
            || (stp == self.alpha_min && (f > ftest || g >= self.gtest))
    }

    fn next(&mut self, stp: f64, f: f64, g: f64, ftest: f64) -> f64 {
        if self.stage == 1 && f <= ftest && g >= 0.0 {
            self.stage = 2;
        }
        let mut stp = stp;
        if self.stage == 1 && f <= self.fx && f > ftest {
            // modified function ψ(α) = φ(α) - φ(0) - gtest·α
            let gt = self.gtest;
            let mut fxm = self.fx - self.stx * gt;
            let mut fym = self.fy - self.sty * gt;
            let mut gxm = self.gx - gt;
            let mut gym = self.gy - gt;
            let fm = f - stp * gt;
            let gm = g - gt;
            dcstep(
                &mut self.stx,
                &mut fxm,
                &mut gxm,
                &mut self.sty,
                &mut fym,
                &mut gym,
                &mut stp,
                fm,
                gm,
                &mut self.brackt,
                self.stmin,
                self.stmax,
            );
            self.fx = fxm + self.stx * gt;
            self.fy = fym + self.sty * gt;
            self.gx = gxm + gt;
            self.gy = gym + gt;
        } else {
            dcstep(
                &mut self.stx,
                &mut self.fx,
                &mut self.gx,
                &mut self.sty,
                &mut self.fy,
                &mut self.gy,
                &mut stp,
                f,
                g,
                &mut self.brackt,
                self.stmin,
                self.stmax,
            );
        }
        if self.brackt {
            if (self.sty - self.stx).abs() >= P66 * self.width1 {
                stp = self.stx + P5 * (self.sty - self.stx);
            }
            self.width1 = self.width;
            self.width = (self.sty - self.stx).abs();
            self.stmin = self.stx.min(self.sty);
            self.stmax = self.stx.max(self.sty);
        } else {
            self.stmin = stp + XTRAPL * (stp - self.stx);
            self.stmax = stp + XTRAPU * (stp - self.stx);
        }
        stp = stp.max(self.alpha_min).min(self.alpha_max);
        if self.brackt && (stp <= self.stmin || stp >= self.stmax || self.stmax - self.stmin <= self.xtol * self.stmax) {
            stp = self.stx;
        }
        stp
    }
}

/// Safeguarded cubic/quadratic step of Moré and Thuente.
#[allow(clippy::too_many_arguments)]
fn dcstep(
    stx: &mut f64,
    fx: &mut f64,
    dx: &mut f64,
    sty: &mut f64,
    fy: &mut f64,
    dy: &mut f64,
    stp: &mut f64,
    fp: f64,
    dp: f64,
    brackt: &mut bool,
    stpmin: f64,
    stpmax: f64,
) {
    let sgnd = dp * (*dx / dx.abs());
    let stpf;
    if fp > *fx {
        let theta = 3.0 * (*fx - fp) / (*stp - *stx) + *dx + dp;
        let s = theta.abs().max(dx.abs()).max(dp.abs());
        let mut gamma = s * ((theta / s).powi(2) - (*dx / s) * (dp / s)).sqrt();
        if *stp < *stx {
            gamma = -gamma;
        }
        let p = (gamma - *dx) + theta;
        let q = ((gamma - *dx) + gamma) + dp;
        let r = p / q;
        let stpc = *stx + r * (*stp - *stx);
        let stpq = *stx + ((*dx / ((*fx - fp) / (*stp - *stx) + *dx)) / 2.0) * (*stp - *stx);
        stpf = if (stpc - *stx).abs() < (stpq - *stx).abs() {
            stpc
        } else {
            stpc + (stpq - stpc) / 2.0
        };
        *brackt = true;
    } else if sgnd < 0.0 {
        let theta = 3.0 * (*fx - fp) / (*stp - *stx) + *dx + dp;
        let s = theta.abs().max(dx.abs()).max(dp.abs());
        let mut gamma = s * ((theta / s).powi(2) - (*dx / s) * (dp / s)).sqrt();
        if *stp > *stx {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = ((gamma - dp) + gamma) + *dx;
        let r = p / q;
        let stpc = *stp + r * (*stx - *stp);
        let stpq = *stp + (dp / (dp - *dx)) * (*stx - *stp);
        stpf = if (stpc - *stp).abs() > (stpq - *stp).abs() { stpc } else { stpq };
        *brackt = true;
    } else if dp.abs() < dx.abs() {
        let theta = 3.0 * (*fx - fp) / (*stp - *stx) + *dx + dp;
        let s = theta.abs().max(dx.abs()).max(dp.abs());
        let mut gamma = s * ((theta / s).powi(2) - (*dx / s) * (dp / s)).max(0.0).sqrt();
        if *stp > *stx {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = (gamma + (*dx - dp)) + gamma;
        let r = p / q;
        let stpc = if r < 0.0 && gamma != 0.0 {
            *stp + r * (*stx - *stp)
        } else if *stp > *stx {
            stpmax
        } else {
            stpmin
        };
        let stpq = *stp + (dp / (dp - *dx)) * (*stx - *stp);
        if *brackt {
            let mut f = if (stpc - *stp).abs() < (stpq - *stp).abs() { stpc } else { stpq };
            if *stp > *stx {
                f = f.min(*stp + P66 * (*sty - *stp));
            } else {
                f = f.max(*stp + P66 * (*sty - *stp));
            }
            stpf = f;
        } else {
            let f = if (stpc - *stp).abs() > (stpq - *stp).abs() { stpc } else { stpq };
            stpf = f.min(stpmax).max(stpmin);
        }
    } else if *brackt {
        let theta = 3.0 * (fp - *fy) / (*sty - *stp) + *dy + dp;
        let s = theta.abs().max(dy.abs()).max(dp.abs());
        let mut gamma = s * ((theta / s).powi(2) - (*dy / s) * (dp / s)).sqrt();
        if *stp > *sty {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = ((gamma - dp) + gamma) + *dy;
        let r = p / q;
        stpf = *stp + r * (*sty - *stp);
    } else if *stp > *stx {
        stpf = stpmax;
    } else {
        stpf = stpmin;
    }

    if fp > *fx {
        *sty = *stp;
        *fy = fp;
        *dy = dp;
    } else {
        if sgnd < 0.0 {
            *sty = *stx;
            *fy = *fx;
            *dy = *dx;
        }
        *stx = *stp;
        *fx = fp;
        *dx = dp;
    }
    *stp = stpf;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::StructuredQuartic;

    fn run(p: &StructuredQuartic, x: &[f64], dir: &[f64], cfg: &WolfeConfig) -> StepResult {
        let ev = p.evaluate(x);
        let g0 = ev.grad();
        let mut u_of = structured_u(p, &ev.grad_u);
        strong_wolfe_structured(p, x, dir, ev.f, &g0, &mut u_of, cfg)
    }

    #[test]
    fn half_square_accepts_unit_step() {
        let p = StructuredQuartic::from_coefficients(vec![0.0], vec![0.0], vec![1.0]);
        let r = run(&p, &[1.0], &[-1.0], &WolfeConfig::default());
        assert_eq!(r.status, StepStatus::Converged);
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.evals, 1);
        assert!((r.s_dot_u() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ascent_is_rejected() {
        let p = StructuredQuartic::from_coefficients(vec![0.0], vec![0.0], vec![1.0]);
        let r = run(&p, &[1.0], &[1.0], &WolfeConfig::default());
        assert_eq!(r.status, StepStatus::NoDescent);
        assert_eq!(r.evals, 0);
    }

    #[test]
    fn quarter_quartic_satisfies_both_conditions() {
        let p = StructuredQuartic::from_coefficients(vec![3f64.sqrt()], vec![0.0], vec![0.0]);
        let cfg = WolfeConfig::default();
        let r = run(&p, &[1.0], &[-1.0], &cfg);
        assert_eq!(r.status, StepStatus::Converged);
        let f = |x: f64| 0.25 * x.powi(4);
        let a = r.alpha;
        assert!(f(1.0 - a) <= f(1.0) + cfg.c1 * a * (-1.0));
        assert!((-(1.0 - a).powi(3)).abs() <= cfg.c2 * 1.0);
    }

    #[test]
    fn long_initial_step_is_bracketed() {
        let p = StructuredQuartic::from_coefficients(vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 4.0]);
        let cfg = WolfeConfig {
            alpha_init: 50.0,
            c2: 0.1,
            ..WolfeConfig::default()
        };
        let r = run(&p, &[1.0, 1.0], &[-1.0, -4.0], &cfg);
        assert_eq!(r.status, StepStatus::Converged);
        assert!(r.evals <= cfg.max_evals);
    }
}

//! Limited-memory structured BFGS drivers (minus and plus variants).

use std::sync::Arc;
use std::time::Instant;

use crate::error::QnError;
use crate::history::{HistoryError, HistoryMode, QnHistory};
use crate::line_search::{strong_wolfe_structured, structured_u, StepStatus, WolfeConfig};
use crate::minus::{search_direction_general, search_direction_scalar, OperatorInit};
use crate::plus::{DeltaMode, PlusState};
use crate::problems::{shifted_is_positive_definite, KnownHessianOp, StructuredProblem, DENSE_CAP};
use crate::vecops;

/// Values of `σ` at or below this are replaced by the previous one.
pub const SIGMA_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Minus,
    Plus,
}

/// Rule for the scalar `σ` of the initial matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitStrategy {
    /// `uᵀu / sᵀu`
    Init1,
    /// `ûᵀû / sᵀû`
    Init2,
    /// `sᵀu / sᵀs`
    Init3,
    /// `sᵀû / sᵀs`
    Init4,
    Constant(f64),
}

impl InitStrategy {
    pub fn name(&self) -> String {
        match self {
            InitStrategy::Init1 => "init1".into(),
            InitStrategy::Init2 => "init2".into(),
            InitStrategy::Init3 => "init3".into(),
            InitStrategy::Init4 => "init4".into(),
            InitStrategy::Constant(s) => format!("const{s}"),
        }
    }
}

/// How the minus variant builds its initial matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinusInitMode {
    /// `B₀ = σI`
    Scalar,
    /// `B₀ = K(x₀) + σ̄I`; `incremental` keeps `H₀U` across iterations and
    /// only pays off with a constant `σ̄`.
    Operator { incremental: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    pub memory: usize,
    /// Stop when `‖g‖∞ <= epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    pub init_strategy: InitStrategy,
    pub sigma0: f64,
    pub minus_init_mode: MinusInitMode,
    pub wolfe: WolfeConfig,
    pub delta_mode: DeltaMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Minus,
            memory: 8,
            epsilon: 1e-6,
            max_iters: 10_000,
            init_strategy: InitStrategy::Init1,
            sigma0: 1.0,
            minus_init_mode: MinusInitMode::Scalar,
            wolfe: WolfeConfig::default(),
            delta_mode: DeltaMode::PowerOfTen,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.memory < 1 {
            return Err("memory must be >= 1".into());
        }
        if !(self.epsilon > 0.0) {
            return Err("epsilon must be > 0".into());
        }
        if !(self.sigma0 > 0.0) {
            return Err("sigma0 must be > 0".into());
        }
        if let InitStrategy::Constant(s) = self.init_strategy {
            if !(s > 0.0) {
                return Err("constant sigma must be > 0".into());
            }
        }
        self.wolfe.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    LineSearchFailure,
    RegularizationFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max-iters",
            RunStatus::LineSearchFailure => "line-search-failure",
            RunStatus::RegularizationFailure => "regularization-failure",
        }
    }
}

/// One row of the trace. Iterate 0 has `alpha`, `delta` and `s_dot_u`
/// set to NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub f: f64,
    pub gnorm_inf: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub delta: f64,
    pub s_dot_u: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub iterations: usize,
    pub f_evals: usize,
    pub g_evals: usize,
    pub final_f: f64,
    pub final_gnorm_inf: f64,
    /// Seconds spent inside [`minimize`].
    pub wall_time: f64,
    pub trace: Vec<IterRecord>,
    pub x: Vec<f64>,
    /// Pairs dropped by the curvature test of the history.
    pub rejected_pairs: usize,
    /// Iterations that fell back to a steepest-descent-like step.
    pub fallbacks: usize,
}

impl RunReport {
    /// Mean of `σₖ` over the trace.
    pub fn mean_sigma(&self) -> f64 {
        self.trace.iter().map(|r| r.sigma).sum::<f64>() / self.trace.len() as f64
    }
}

/// Next `σ` from the latest pair; keeps `prev` when the formula is not
/// finite or not above [`SIGMA_MIN`].
pub fn sigma_next(strategy: InitStrategy, s: &[f64], u: &[f64], u_hat: &[f64], prev: f64) -> f64 {
    let v = match strategy {
        InitStrategy::Init1 => vecops::dot(u, u) / vecops::dot(s, u),
        InitStrategy::Init2 => vecops::dot(u_hat, u_hat) / vecops::dot(s, u_hat),
        InitStrategy::Init3 => vecops::dot(s, u) / vecops::dot(s, s),
        InitStrategy::Init4 => vecops::dot(s, u_hat) / vecops::dot(s, s),
        InitStrategy::Constant(c) => c,
    };
    if v.is_finite() && v > SIGMA_MIN {
        v
    } else {
        prev
    }
}

/// First `10ⁱ`, `i = 0..=12`, for which `K + 10ⁱI` is positive definite.
pub fn first_pd_power(k: &dyn KnownHessianOp) -> Option<f64> {
    (0..=12).map(|i| 10f64.powi(i)).find(|&s| {
        match shifted_is_positive_definite(k, s, DENSE_CAP) {
            Some(pd) => pd,
            None => k.solve_shifted(s, &vec![1.0; k.dim()]).is_ok(),
        }
    })
}

enum Direction {
    Minus,
    MinusOperator(OperatorInit),
    Plus,
}

/// Runs the structured quasi-Newton method from `x0`.
pub fn minimize(problem: &dyn StructuredProblem, x0: &[f64], cfg: &SolverConfig) -> RunReport {
    let start = Instant::now();
    let n = problem.dim();
    assert_eq!(x0.len(), n);
    let mode = match cfg.variant {
        Variant::Minus => HistoryMode::Minus,
        Variant::Plus => HistoryMode::Plus,
    };
    let mut hist = QnHistory::new(n, cfg.memory, mode);
    let mut x = x0.to_vec();
    let ev = problem.evaluate(&x);
    let mut f = ev.f;
    let mut g = ev.grad();
    let mut grad_u = ev.grad_u;
    let mut f_evals = 1;
    let mut sigma = match cfg.init_strategy {
        InitStrategy::Constant(c) => c,
        _ => cfg.sigma0,
    };
    let mut k_now: Arc<dyn KnownHessianOp> = problem.known_hessian(&x);
    let constant_k = problem.constant_known_hessian() || k_now.is_constant();

    let mut dir = match (cfg.variant, cfg.minus_init_mode) {
        (Variant::Plus, _) => Direction::Plus,
        (Variant::Minus, MinusInitMode::Scalar) => Direction::Minus,
        (Variant::Minus, MinusInitMode::Operator { incremental }) => {
            let sigma_bar = match cfg.init_strategy {
                InitStrategy::Constant(c) => Some(c),
                _ => first_pd_power(k_now.as_ref()),
            };
            match sigma_bar.map(|s| OperatorInit::new(k_now.clone(), s, incremental)) {
                Some(Ok(op)) => {
                    sigma = op.sigma_bar();
                    Direction::MinusOperator(op)
                }
                _ => Direction::Minus,
            }
        }
    };

    let mut trace = vec![IterRecord {
        k: 0,
        f,
        gnorm_inf: vecops::norm_inf(&g),
        alpha: f64::NAN,
        sigma,
        delta: f64::NAN,
        s_dot_u: f64::NAN,
    }];
    let mut rejected = 0;
    let mut fallbacks = 0;
    let mut status = RunStatus::MaxIters;
    let mut iterations = 0;

    loop {
        if vecops::norm_inf(&g) <= cfg.epsilon {
            status = RunStatus::Converged;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        let mut attempt = 0;
        let (step, delta) = loop {
            let (p, delta, fell_back) = direction(&mut dir, &hist, sigma, &k_now, &g, cfg.delta_mode);
            let mut u_of = structured_u(problem, &grad_u);
            let step = strong_wolfe_structured(problem, &x, &p, f, &g, &mut u_of, &cfg.wolfe);
            f_evals += step.evals;
            if fell_back {
                fallbacks += 1;
            }
            if step.status == StepStatus::Converged {
                break (Some(step), delta);
            }
            if attempt == 0 && !hist.is_empty() {
                // restart from an empty memory before giving up
                hist.clear();
                attempt += 1;
                continue;
            }
            status = if fell_back {
                RunStatus::RegularizationFailure
            } else {
                RunStatus::LineSearchFailure
            };
            break (None, delta);
        };
        let Some(step) = step else { break };
        iterations += 1;

        let k_next = if constant_k { k_now.clone() } else { problem.known_hessian(&step.x_new) };
        let u_hat = vecops::sub(&step.grad_u_new, &grad_u);
        let push = match cfg.variant {
            Variant::Minus => hist.push_pair(&step.s, &step.u, None),
            Variant::Plus => {
                let v = k_next.apply(&step.s);
                hist.push_pair(&step.s, &step.u, Some(&v))
            }
        };
        match push {
            Ok(()) => {}
            Err(HistoryError::CurvatureReject { .. }) => rejected += 1,
            Err(e) => panic!("history update: {e}"),
        }
        let candidate = sigma_next(cfg.init_strategy, &step.s, &step.u, &u_hat, sigma);
        if let Direction::MinusOperator(op) = &mut dir {
            if candidate != sigma
                && shifted_is_positive_definite(op.k0().as_ref(), candidate, DENSE_CAP) != Some(false)
            {
                op.set_sigma_bar(candidate);
                sigma = candidate;
            }
        } else {
            sigma = candidate;
        }

        let s_dot_u = step.s_dot_u();
        x = step.x_new;
        f = step.f_new;
        g = step.g_new;
        grad_u = step.grad_u_new;
        k_now = k_next;
        trace.push(IterRecord {
            k: iterations,
            f,
            gnorm_inf: vecops::norm_inf(&g),
            alpha: step.alpha,
            sigma,
            delta,
            s_dot_u,
        });
    }

    RunReport {
        status,
        iterations,
        f_evals,
        g_evals: f_evals,
        final_f: f,
        final_gnorm_inf: vecops::norm_inf(&g),
        wall_time: start.elapsed().as_secs_f64(),
        trace,
        x,
        rejected_pairs: rejected,
        fallbacks,
    }
}

/// Search direction, the shift used (plus variant) and whether a fallback
/// step replaced the quasi-Newton direction.
fn direction(
    dir: &mut Direction,
    hist: &QnHistory,
    sigma: f64,
    k_now: &Arc<dyn KnownHessianOp>,
    g: &[f64],
    delta_mode: DeltaMode,
) -> (Vec<f64>, f64, bool) {
    let descent = |p: &[f64]| p.iter().all(|v| v.is_finite()) && vecops::dot(p, g) < 0.0;
    let steepest = || vecops::scale(-1.0 / sigma, g);
    match dir {
        Direction::Minus => match search_direction_scalar(hist, sigma, g) {
            Ok(p) if descent(&p) => (p, 0.0, false),
            _ => (steepest(), 0.0, true),
        },
        Direction::MinusOperator(op) => match search_direction_general(hist, op, g) {
            Ok(p) if descent(&p) => (p, 0.0, false),
            _ => (steepest(), 0.0, true),
        },
        Direction::Plus => {
            let res: Result<(Vec<f64>, f64), QnError> = (|| {
                let mut st = PlusState::new(hist, sigma, k_now.clone())?;
                let delta = st.ensure_positive_definite(delta_mode)?;
                Ok((st.solve_plus(g)?, delta))
            })();
            match res {
                Ok((p, delta)) if descent(&p) => (p, delta, false),
                Ok((_, delta)) => (steepest(), delta, true),
                Err(_) => (steepest(), f64::NAN, true),
            }
        }
    }
}

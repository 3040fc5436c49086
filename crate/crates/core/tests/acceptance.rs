//! Acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use sqn_core::bench::{performance_profile, Metric, SummaryRow};
use sqn_core::bench::ProfileTable;
use sqn_core::history::{HistoryMode, QnHistory};
use sqn_core::line_search::{strong_wolfe_structured, structured_u, StepStatus, WolfeConfig};
use sqn_core::minus::{search_direction_scalar, MinusInit, MinusState, OperatorInit};
use sqn_core::oracles::full_memory_plus_iterates;
use sqn_core::plus::{DeltaMode, PlusState};
use sqn_core::problems::{
    fd_gradient_check, make_logistic, make_poisson_control, make_structured_quadratic, make_structured_quartic, parse_libsvm_file,
    Diagonal, KnownHessianOp, Laplacian2d, StructuredProblem,
};
use sqn_core::solver::{minimize, InitStrategy, MinusInitMode, RunReport, RunStatus, SolverConfig, Variant};
use sqn_core::vecops;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const INITS: [InitStrategy; 4] = [InitStrategy::Init1, InitStrategy::Init2, InitStrategy::Init3, InitStrategy::Init4];

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Minus => "minus",
        Variant::Plus => "plus",
    }
}

fn row(problem: &str, solver: String, seed: Option<u64>, r: &RunReport) -> SummaryRow {
    SummaryRow {
        problem: problem.to_string(),
        solver,
        seed,
        status: r.status.as_str().to_string(),
        iters: r.iterations,
        f_evals: r.f_evals,
        time: r.wall_time,
    }
}

fn c1_minus_equivalence() -> Outcome {
    let start = Instant::now();
    let worst = (0..200u64)
        .map(|seed| {
            let (t, b_rec) = minus_trajectory(1000 + seed);
            rel_fro(&compact_minus_b(&t), &b_rec)
        })
        .fold(0.0, f64::max);
    let el = start.elapsed();
    outcome(
        worst <= 1e-9 && el < Duration::from_secs(10),
        format!("200 trajectories, max rel Frobenius error {worst:.2e} (tol 1e-9), {:.2}s", el.as_secs_f64()),
    )
}

fn c2_plus_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut indefinite_runs = 0;
    for seed in 0..200u64 {
        let indefinite = seed % 2 == 0;
        let (t, a_rec) = plus_trajectory(2000 + seed, indefinite);
        if indefinite && t.ks.iter().any(|k| !sqn_core::dense::is_positive_definite(k)) {
            indefinite_runs += 1;
        }
        worst = worst.max(rel_fro(&compact_plus_a(&t), &a_rec));
    }
    let el = start.elapsed();
    outcome(
        worst <= 1e-9 && indefinite_runs > 0 && el < Duration::from_secs(10),
        format!(
            "200 trajectories ({indefinite_runs} with indefinite K), max rel Frobenius error {worst:.2e} (tol 1e-9), {:.2}s",
            el.as_secs_f64()
        ),
    )
}

fn c3_inverse_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (t, _) = minus_trajectory(3000 + seed);
        let h = minus_history(&t, 8);
        let mut r = rng(seed);
        let mut init = if seed % 2 == 0 {
            MinusInit::Scalar { sigma: t.sigma }
        } else {
            let d: Vec<f64> = (0..t.n).map(|_| r.random_range(0.1..5.0)).collect();
            MinusInit::Operator(OperatorInit::new(Arc::new(Diagonal::new(d, true)), t.sigma, seed % 4 == 1).unwrap())
        };
        let mut st = MinusState::new(&h, &mut init);
        let x = gaussian(t.n, &mut r);
        let back = st.apply_h(&st.apply_b(&x).unwrap()).unwrap();
        worst = worst.max(vecops::norm2(&vecops::sub(&back, &x)) / vecops::norm2(&x));
    }
    outcome(worst <= 1e-8, format!("100 states, max relative error of H(Bx) - x {worst:.2e} (tol 1e-8)"))
}

/// Plus history consistent with `K`: `v = K s`, `u = C s`.
fn plus_history_for(k: &dyn KnownHessianOp, pairs: usize, m: usize, seed: u64) -> QnHistory {
    let n = k.dim();
    let mut r = rng(seed);
    let mut h = QnHistory::new(n, m, HistoryMode::Plus);
    for _ in 0..pairs {
        let s = gaussian(n, &mut r);
        let u = near_identity(n, &mut r).matvec(&s);
        let v = k.apply(&s);
        h.push_pair(&s, &u, Some(&v)).unwrap();
    }
    h
}

fn c4_smw_residual() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut deltas = 0;
    for seed in 0..100u64 {
        let mut r = rng(4000 + seed);
        let k: Arc<dyn KnownHessianOp> = if seed % 2 == 0 {
            let n = r.random_range(3..=30);
            Arc::new(Diagonal::new(gaussian(n, &mut r), true))
        } else {
            Arc::new(Laplacian2d::new(r.random_range(2..=6)))
        };
        let pairs = r.random_range(0..=6);
        let h = plus_history_for(k.as_ref(), pairs, 8, seed);
        let sigma = 10f64.powf(r.random_range(-1.0..1.0));
        let Ok(mut st) = PlusState::new(&h, sigma, k.clone()) else {
            failures += 1;
            continue;
        };
        if st.ensure_positive_definite(DeltaMode::PowerOfTen).is_err() {
            failures += 1;
            continue;
        }
        deltas += usize::from(st.delta() > 0.0);
        let g = gaussian(k.dim(), &mut r);
        match st.solve_plus(&g) {
            Ok(p) => {
                let res = vecops::add(&st.apply_full(&p), &g);
                worst = worst.max(vecops::norm_inf(&res) / vecops::norm_inf(&g));
            }
            Err(_) => failures += 1,
        }
    }
    outcome(
        worst <= 1e-8 && failures == 0,
        format!("100 states ({deltas} regularized), max ‖(K+A+δI)p+g‖∞/‖g‖∞ {worst:.2e} (tol 1e-8), {failures} failures"),
    )
}

fn c5_limited_vs_full() -> Outcome {
    let p = make_structured_quadratic(100, 40, 1.0, (0.0, 999.0), 5).unwrap();
    let x0 = p.initial_point();
    let sigma = 1.0;
    let wolfe = WolfeConfig::default();
    let full = match full_memory_plus_iterates(&p, &x0, sigma, 1e-12, 20, &wolfe) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("oracle failed: {e}")),
    };
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (k, xf) in full.iter().enumerate().skip(1) {
        let cfg = SolverConfig {
            variant: Variant::Plus,
            memory: 50,
            epsilon: 1e-12,
            max_iters: k,
            init_strategy: InitStrategy::Constant(sigma),
            sigma0: sigma,
            wolfe: wolfe.clone(),
            ..SolverConfig::default()
        };
        let rep = minimize(&p, &x0, &cfg);
        if rep.iterations != k {
            return outcome(false, format!("limited solver stopped after {} of {k} iterations", rep.iterations));
        }
        let scale = vecops::norm_inf(xf).max(1.0);
        worst = worst.max(vecops::norm_inf(&vecops::sub(&rep.x, xf)) / scale);
        compared += 1;
    }
    outcome(
        worst <= 1e-8 && compared == 20,
        format!("{compared} iterations compared, max ‖x_lim - x_full‖∞/max(1,‖x_full‖∞) {worst:.2e} (tol 1e-8)"),
    )
}

fn experiment_one(seed: u64, n: usize, phi: f64) -> sqn_core::problems::StructuredQuadratic {
    let d = if phi == 1.0 { (0.0, 999.0) } else { (-999.0, 0.0) };
    make_structured_quadratic(n, n / 10, phi, d, seed).unwrap()
}

fn c6_experiment_one(rows: &mut Vec<SummaryRow>) -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    let mut bad = Vec::new();
    for n in (100..=700).step_by(100) {
        for phi in [1.0, 1000.0] {
            let p = experiment_one(1, n, phi);
            let x0 = p.initial_point();
            let label = p.metadata().label();
            for variant in [Variant::Minus, Variant::Plus] {
                for init in INITS {
                    let cfg = SolverConfig {
                        variant,
                        memory: 8,
                        epsilon: 5e-6,
                        max_iters: 10_000,
                        init_strategy: init,
                        ..SolverConfig::default()
                    };
                    let rep = minimize(&p, &x0, &cfg);
                    runs += 1;
                    if rep.status != RunStatus::Converged {
                        bad.push(format!("n={n} phi={phi} {}-{}: {}", variant_name(variant), init.name(), rep.status.as_str()));
                    }
                    rows.push(row(&label, format!("{}-{}", variant_name(variant), init.name()), Some(1), &rep));
                }
            }
        }
    }
    let el = start.elapsed();
    outcome(
        bad.is_empty() && el < Duration::from_secs(300),
        format!("{}/{runs} converged, {:.1}s{}", runs - bad.len(), el.as_secs_f64(), if bad.is_empty() { String::new() } else { format!("; failed: {}", bad.join(", ")) }),
    )
}

fn c7_sigma_property() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for variant in [Variant::Minus, Variant::Plus] {
        let mut mean = [0.0f64; 4];
        let mut count = 0;
        for seed in 1..=5u64 {
            for n in [100, 300, 500] {
                let p = experiment_one(seed, n, 1.0);
                let x0 = p.initial_point();
                for (i, init) in INITS.iter().enumerate() {
                    let cfg = SolverConfig {
                        variant,
                        epsilon: 5e-6,
                        init_strategy: *init,
                        ..SolverConfig::default()
                    };
                    mean[i] += minimize(&p, &x0, &cfg).mean_sigma();
                }
                count += 1;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let ok = mean[0].min(mean[1]) >= mean[2].max(mean[3]);
        pass &= ok;
        lines.push(format!(
            "{}: mean sigma init1 {:.1} init2 {:.1} init3 {:.2} init4 {:.2}",
            variant_name(variant),
            mean[0],
            mean[1],
            mean[2],
            mean[3]
        ));
    }
    outcome(pass, format!("5 seeds x n in {{100,300,500}}, phi=1; {}", lines.join("; ")))
}

fn c8_quartic(rows: &mut Vec<SummaryRow>) -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    let mut bad = Vec::new();
    for j in 1..=7 {
        let p = make_structured_quartic(100 * j, 1);
        let x0 = p.initial_point();
        let label = p.metadata().label();
        for init in INITS {
            let cfg = SolverConfig {
                variant: Variant::Plus,
                memory: 8,
                epsilon: 9.5e-5,
                init_strategy: init,
                ..SolverConfig::default()
            };
            let rep = minimize(&p, &x0, &cfg);
            runs += 1;
            if rep.status != RunStatus::Converged {
                bad.push(format!("n={} {}: {}", 100 * j, init.name(), rep.status.as_str()));
            }
            rows.push(row(&label, format!("plus-{}", init.name()), Some(1), &rep));
        }
    }
    let el = start.elapsed();
    outcome(
        bad.is_empty() && el < Duration::from_secs(120),
        format!("{}/{runs} converged, {:.1}s{}", runs - bad.len(), el.as_secs_f64(), if bad.is_empty() { String::new() } else { format!("; failed: {}", bad.join(", ")) }),
    )
}

fn c9_poisson() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for j in 2..=5 {
        let p = make_poisson_control(j);
        let x0 = p.initial_point();
        let mut r = rng(j as u64);
        let mut grad_err = fd_gradient_check(&p, &x0, None);
        for _ in 0..4 {
            let x: Vec<f64> = x0.iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
            grad_err = grad_err.max(fd_gradient_check(&p, &x, None));
        }
        if grad_err > 1e-5 {
            pass = false;
            parts.push(format!("j={j}: gradient check {grad_err:.1e}"));
            continue;
        }
        for (name, mode, init) in [
            ("operator-init1", MinusInitMode::Operator { incremental: false }, InitStrategy::Init1),
            ("operator-incremental-const", MinusInitMode::Operator { incremental: true }, InitStrategy::Constant(1.0)),
        ] {
            let cfg = SolverConfig {
                variant: Variant::Minus,
                epsilon: 1e-6,
                max_iters: 10_000,
                init_strategy: init,
                minus_init_mode: mode,
                ..SolverConfig::default()
            };
            let rep = minimize(&p, &x0, &cfg);
            let ok = rep.status == RunStatus::Converged;
            pass &= ok;
            parts.push(format!("j={j} n={} {name}: {} in {} iters", p.dim(), rep.status.as_str(), rep.iterations));
        }
    }
    outcome(pass, format!("gradient checks <= 1e-5; {}", parts.join("; ")))
}

fn c10_scaling() -> Outcome {
    let m = 8;
    let sizes = [1_000usize, 10_000, 100_000];
    let mut times = Vec::new();
    for &n in &sizes {
        let mut r = rng(n as u64);
        let mut h = QnHistory::new(n, m, HistoryMode::Minus);
        for _ in 0..m {
            let s = gaussian(n, &mut r);
            let u: Vec<f64> = s.iter().map(|v| v * r.random_range(0.5..2.0)).collect();
            h.push_pair(&s, &u, None).unwrap();
        }
        let g = gaussian(n, &mut r);
        let reps = (2_000_000 / n).max(10);
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let t0 = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(search_direction_scalar(&h, 1.3, std::hint::black_box(&g)).unwrap());
            }
            best = best.min(t0.elapsed().as_secs_f64() / reps as f64);
        }
        times.push(best);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, times.iter().sum::<f64>() / 3.0);
    let sxy: f64 = xs.iter().zip(&times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&times).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let ss_tot: f64 = times.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    outcome(
        r2 >= 0.95,
        format!(
            "m=8, times {:.2e}/{:.2e}/{:.2e}s for n=1e3/1e4/1e5, linear fit R² {r2:.4} (need >= 0.95)",
            times[0], times[1], times[2]
        ),
    )
}

fn c11_line_search() -> Outcome {
    let data = parse_libsvm_file(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small.libsvm")).unwrap();
    let mut problems: Vec<Box<dyn StructuredProblem>> = Vec::new();
    for seed in 0..5u64 {
        problems.push(Box::new(make_structured_quartic(10 + 7 * seed as usize, seed)));
        problems.push(Box::new(make_structured_quadratic(30 + 10 * seed as usize, 3, 1.0, (0.0, 999.0), seed).unwrap()));
        problems.push(Box::new(make_structured_quadratic(20 + 5 * seed as usize, 2, 1000.0, (-999.0, 0.0), seed).unwrap()));
        problems.push(Box::new(make_logistic(data.clone(), 10f64.powi(-(seed as i32) - 1)).unwrap()));
    }
    let cfg = WolfeConfig::default();
    let mut converged = 0;
    let mut violations = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        let mut r = rng(i as u64);
        let x: Vec<f64> = p.initial_point().iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
        let ev = p.evaluate(&x);
        let g = ev.grad();
        // perturbed steepest descent, scaled so the unit step is far from exact
        let scale = 10f64.powf(r.random_range(-3.0..1.0));
        let dir: Vec<f64> = g.iter().map(|gi| -scale * gi * r.random_range(0.2..1.8)).collect();
        let step = {
            let mut u_of = structured_u(p.as_ref(), &ev.grad_u);
            strong_wolfe_structured(p.as_ref(), &x, &dir, ev.f, &g, &mut u_of, &cfg)
        };
        if step.status != StepStatus::Converged {
            continue;
        }
        converged += 1;
        // independent re-evaluation
        let x_new: Vec<f64> = x.iter().zip(&dir).map(|(xi, pi)| xi + step.alpha * pi).collect();
        let e_new = p.evaluate(&x_new);
        let g_new = e_new.grad();
        let d0 = vecops::dot(&dir, &g);
        let armijo = e_new.f <= ev.f + cfg.c1 * step.alpha * d0;
        let curvature = vecops::dot(&dir, &g_new).abs() <= cfg.c2 * d0.abs();
        let s = vecops::sub(&x_new, &x);
        let k_next = p.known_hessian(&x_new);
        let u = vecops::add(&k_next.apply(&s), &vecops::sub(&e_new.grad_u, &ev.grad_u));
        let structured = vecops::dot(&s, &u) > 0.0;
        if !(armijo && curvature && structured) {
            violations.push(format!("{} armijo={armijo} curvature={curvature} sᵀu>0={structured}", p.metadata().label()));
        }
    }
    outcome(
        violations.is_empty() && converged > 0,
        format!(
            "{converged}/{} searches converged, {} violations{}",
            problems.len(),
            violations.len(),
            if violations.is_empty() { String::new() } else { format!(": {}", violations.join("; ")) }
        ),
    )
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("s{i}")).collect()
}

fn c12_profiles(generated: &[Vec<SummaryRow>]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let ex1 = ProfileTable::from_matrix(Metric::Time, names(2), vec!["p".into()], vec![vec![2.0, 1.0]], 50).unwrap();
    let ok1 = ex1.pi[0] == [2.0, 0.5] && ex1.rho_at(1, 0.5) == 1.0 && ex1.rho_at(0, 1.0) == 0.0 && ex1.rho_at(0, 2.0) == 1.0;
    notes.push(format!("example 1 {}", if ok1 { "ok" } else { "wrong" }));

    let ex2 = ProfileTable::from_matrix(Metric::Time, names(3), names(4), vec![vec![1.5; 3]; 4], 50).unwrap();
    let ok2 = ex2.pi.iter().flatten().all(|&p| p == 1.0) && (0..3).all(|s| ex2.rho_at(s, 1.0) == 1.0);
    notes.push(format!("example 2 {}", if ok2 { "ok" } else { "wrong" }));

    let t3 = (0..4).map(|p| vec![1.0 + p as f64, 2.0, f64::INFINITY]).collect();
    let ex3 = ProfileTable::from_matrix(Metric::Iterations, names(3), names(4), t3, 50).unwrap();
    let ok3 = ex3.rho[2].iter().all(|&r| r == 0.0);
    notes.push(format!("example 3 {}", if ok3 { "ok" } else { "wrong" }));
    pass &= ok1 && ok2 && ok3;

    let mut tables: Vec<ProfileTable> = vec![ex1, ex2, ex3];
    let mut r = rng(12);
    for _ in 0..50 {
        let ns = r.random_range(2..6);
        let np = r.random_range(1..20);
        let t = (0..np)
            .map(|_| (0..ns).map(|_| if r.random_bool(0.15) { f64::INFINITY } else { r.random_range(1..50) as f64 }).collect())
            .collect();
        tables.push(ProfileTable::from_matrix(Metric::Iterations, names(ns), names(np), t, r.random_range(2..100)).unwrap());
    }
    for rows in generated {
        for metric in [Metric::Iterations, Metric::FEvals, Metric::Time] {
            match performance_profile(rows, metric, 100) {
                Ok(t) => tables.push(t),
                Err(e) => {
                    pass = false;
                    notes.push(format!("profile failed: {e}"));
                }
            }
        }
    }
    let broken: Vec<String> = tables.iter().filter_map(|t| t.check_invariants().err()).collect();
    pass &= broken.is_empty();
    notes.push(format!("{} tables checked for rho monotonicity, {} broken", tables.len(), broken.len()));
    outcome(pass, notes.join(", "))
}

fn main() {
    let mut exp_rows = Vec::new();
    let mut quartic_rows = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |i: usize, name: &'static str, o: Outcome| {
        println!("{} criterion {i:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((i, name, o));
    };
    report(1, "minus compact = recursive", c1_minus_equivalence());
    report(2, "plus compact = recursive", c2_plus_equivalence());
    report(3, "minus inverse after forward = identity", c3_inverse_identity());
    report(4, "plus SMW solve residual", c4_smw_residual());
    report(5, "limited memory = full memory while k < m", c5_limited_vs_full());
    report(6, "structured quadratic suite converges", c6_experiment_one(&mut exp_rows));
    report(7, "init1/init2 mean sigma >= init3/init4", c7_sigma_property());
    report(8, "quartic suite converges (plus)", c8_quartic(&mut quartic_rows));
    report(9, "poisson control converges (minus, operator init)", c9_poisson());
    report(10, "scalar search direction is linear in n", c10_scaling());
    report(11, "line search contract", c11_line_search());
    report(12, "performance profiles", c12_profiles(&[exp_rows, quartic_rows]));
    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

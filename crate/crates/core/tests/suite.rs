use std::path::Path;

use sqn_core::bench::{read_summary, run_jobs, run_suite, ProblemSpec, SuiteConfig};

const CONFIG: &str = r#"
seeds = [1, 2]

[[problems]]
generator = "quadratic"
n = 40
r = 4
phi = 1.0
d_range = [0.0, 999.0]

[[problems]]
generator = "quartic"
n = 30

[[solvers]]
name = "minus-init1"
variant = "minus"
init = "init1"

[[solvers]]
name = "plus-init3"
variant = "plus"
init = "init3"

[profile]
metrics = ["iterations", "f-evals"]
tau_points = 8
"#;

fn config() -> SuiteConfig {
    SuiteConfig::from_toml_str(CONFIG, Path::new(".")).unwrap()
}

fn strip_time(rows: Vec<sqn_core::bench::SummaryRow>) -> Vec<(String, String, Option<u64>, String, usize, usize)> {
    rows.into_iter()
        .map(|r| (r.problem, r.solver, r.seed, r.status, r.iters, r.f_evals))
        .collect()
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = config();
    let one: Vec<_> = run_jobs(&cfg, Some(1)).into_iter().map(|o| o.row).collect();
    let four: Vec<_> = run_jobs(&cfg, Some(4)).into_iter().map(|o| o.row).collect();
    assert_eq!(one.len(), 8);
    assert_eq!(strip_time(one), strip_time(four));
}

#[test]
fn failing_instance_is_isolated() {
    let mut cfg = config();
    cfg.problems.insert(
        0,
        ProblemSpec::Quadratic {
            n: 5,
            r: 9,
            phi: 1.0,
            d_range: (0.0, 1.0),
            seeds: Some(vec![1]),
        },
    );
    let out = run_jobs(&cfg, Some(2));
    assert_eq!(out.len(), 10);
    assert!(out[..2].iter().all(|o| o.row.status == "failed" && o.error.is_some()));
    assert!(out[2..].iter().all(|o| o.row.status == "converged"), "{:?}", out.iter().map(|o| &o.row).collect::<Vec<_>>());
}

#[test]
fn suite_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_suite(&config(), dir.path(), Some(2)).unwrap();
    assert_eq!(res.outcomes.len(), 8);
    for f in ["summary.csv", "summary_avg.csv", "profile_iterations.csv", "profile_f-evals.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let traces = std::fs::read_dir(dir.path().join("traces")).unwrap().count();
    assert_eq!(traces, 8);
    let rows = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    let header = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(header.starts_with("problem,solver,seed,status,iters,f_evals,time"));
    let prof = std::fs::read_to_string(dir.path().join("profile_iterations.csv")).unwrap();
    assert!(prof.starts_with("series,tau,rho\n"));
    assert!(prof.contains("tau=1,1,0"));
}

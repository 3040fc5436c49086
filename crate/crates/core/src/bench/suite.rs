//! Suite runner: every (problem, seed) instance against every solver.

use std::fs;
use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::SuiteConfig;
use super::profile::{performance_profile, ProfileError};
use crate::problems::StructuredProblem;
use crate::solver::{minimize, IterRecord, RunReport};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SQN_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub solver: String,
    pub seed: Option<u64>,
    pub status: String,
    pub iters: usize,
    pub f_evals: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageRow {
    pub problem: String,
    pub solver: String,
    pub runs: usize,
    pub converged: usize,
    pub mean_iters: f64,
    pub mean_f_evals: f64,
    pub mean_time: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: SummaryRow,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

struct Instance {
    label: String,
    seed: Option<u64>,
    problem: Result<Arc<dyn StructuredProblem>, String>,
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], workers: Option<usize>, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    let run = || items.par_iter().map(&f).collect();
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], _workers: Option<usize>, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

fn build_instances(cfg: &SuiteConfig, workers: Option<usize>) -> Vec<Instance> {
    let specs: Vec<_> = cfg
        .problems
        .iter()
        .flat_map(|p| p.seeds(&cfg.seeds).into_iter().map(move |s| (p, s)))
        .collect();
    par_map(&specs, workers, |(spec, seed)| {
        let built = catch_unwind(AssertUnwindSafe(|| spec.build(*seed, &cfg.base_dir)));
        match built {
            Ok(Ok(p)) => Instance {
                label: p.metadata().label(),
                seed: *seed,
                problem: Ok(p),
            },
            Ok(Err(e)) => Instance {
                label: format!("{spec:?}"),
                seed: *seed,
                problem: Err(e.to_string()),
            },
            Err(e) => Instance {
                label: format!("{spec:?}"),
                seed: *seed,
                problem: Err(panic_message(e)),
            },
        }
    })
}

/// Runs all jobs; a failing or panicking run is recorded with status
/// `failed` and never stops the suite. Rows come back in
/// (problem, seed, solver) order regardless of scheduling.
pub fn run_jobs(cfg: &SuiteConfig, workers: Option<usize>) -> Vec<RunOutcome> {
    let instances = build_instances(cfg, workers);
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cfg.solvers.len()).map(move |s| (i, s)))
        .collect();
    par_map(&jobs, workers, |&(i, s)| {
        let inst = &instances[i];
        let spec = &cfg.solvers[s];
        let mut row = SummaryRow {
            problem: inst.label.clone(),
            solver: spec.name.clone(),
            seed: inst.seed,
            status: "failed".into(),
            iters: 0,
            f_evals: 0,
            time: f64::NAN,
        };
        let problem = match &inst.problem {
            Ok(p) => p.clone(),
            Err(e) => {
                return RunOutcome {
                    row,
                    report: None,
                    error: Some(e.clone()),
                }
            }
        };
        let solver_cfg = spec.to_config();
        let run = catch_unwind(AssertUnwindSafe(|| {
            let x0 = problem.initial_point();
            minimize(problem.as_ref(), &x0, &solver_cfg)
        }));
        match run {
            Ok(report) => {
                row.status = report.status.as_str().into();
                row.iters = report.iterations;
                row.f_evals = report.f_evals;
                row.time = report.wall_time;
                RunOutcome {
                    row,
                    report: Some(report),
                    error: None,
                }
            }
            Err(e) => RunOutcome {
                row,
                report: None,
                error: Some(panic_message(e)),
            },
        }
    })
}

/// Mean over seeds for each (problem, solver).
pub fn average_rows(rows: &[SummaryRow]) -> Vec<AverageRow> {
    let mut out: Vec<AverageRow> = Vec::new();
    for r in rows {
        let idx = match out.iter().position(|a| a.problem == r.problem && a.solver == r.solver) {
            Some(i) => i,
            None => {
                out.push(AverageRow {
                    problem: r.problem.clone(),
                    solver: r.solver.clone(),
                    runs: 0,
                    converged: 0,
                    mean_iters: 0.0,
                    mean_f_evals: 0.0,
                    mean_time: 0.0,
                });
                out.len() - 1
            }
        };
        let a = &mut out[idx];
        a.runs += 1;
        a.converged += usize::from(r.status == "converged");
        a.mean_iters += r.iters as f64;
        a.mean_f_evals += r.f_evals as f64;
        a.mean_time += r.time;
    }
    for a in &mut out {
        let k = a.runs as f64;
        a.mean_iters /= k;
        a.mean_f_evals /= k;
        a.mean_time /= k;
    }
    out
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

pub fn write_trace(path: &Path, trace: &[IterRecord]) -> Result<(), SuiteError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["k", "f", "gnorm_inf", "alpha", "sigma", "delta", "s_dot_u"])?;
    for r in trace {
        w.write_record(&[
            r.k.to_string(),
            format!("{:.17e}", r.f),
            format!("{:.17e}", r.gnorm_inf),
            format!("{:.17e}", r.alpha),
            format!("{:.17e}", r.sigma),
            format!("{:.17e}", r.delta),
            format!("{:.17e}", r.s_dot_u),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), SuiteError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, ProfileError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, r) in rdr.deserialize().enumerate() {
        rows.push(r.map_err(|e: csv::Error| ProfileError::BadRow {
            row: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub dir: PathBuf,
    pub outcomes: Vec<RunOutcome>,
}

/// Runs the suite and writes `summary.csv`, `summary_avg.csv`,
/// `traces/*.csv` and, with two or more solvers, `profile_<metric>.csv`.
pub fn run_suite(cfg: &SuiteConfig, out_dir: &Path, workers: Option<usize>) -> Result<SuiteOutput, SuiteError> {
    let outcomes = run_jobs(cfg, workers);
    let traces = out_dir.join("traces");
    fs::create_dir_all(&traces).map_err(io_err(&traces))?;
    for o in &outcomes {
        if let Some(report) = &o.report {
            let seed = o.row.seed.map(|s| format!("__s{s}")).unwrap_or_default();
            let name = format!("{}__{}{seed}.csv", file_stem(&o.row.problem), file_stem(&o.row.solver));
            write_trace(&traces.join(name), &report.trace)?;
        }
    }
    let rows: Vec<SummaryRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_summary(&out_dir.join("summary.csv"), &rows)?;
    let avg_path = out_dir.join("summary_avg.csv");
    let file = fs::File::create(&avg_path).map_err(io_err(&avg_path))?;
    let mut w = csv::Writer::from_writer(file);
    for a in average_rows(&rows) {
        w.serialize(a)?;
    }
    w.flush().map_err(io_err(&avg_path))?;
    if cfg.solvers.len() >= 2 {
        for metric in &cfg.profile.metrics {
            let table = performance_profile(&rows, *metric, cfg.profile.tau_points)?;
            let path = out_dir.join(format!("profile_{}.csv", metric.as_str()));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            table.write_plotdata(file)?;
        }
    }
    Ok(SuiteOutput {
        dir: out_dir.to_path_buf(),
        outcomes,
    })
}

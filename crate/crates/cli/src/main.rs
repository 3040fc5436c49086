use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use sqn_core::bench::{self, parse_inline_problem, Metric, SuiteConfig};
use sqn_core::problems::fd_gradient_check;

/// Benchmark harness for the limited-memory structured BFGS solvers.
#[derive(Parser)]
#[command(name = "sqn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a suite; writes summary.csv, summary_avg.csv, traces/ and profiles.
    Run {
        config: PathBuf,
        /// Output directory [default: results/<config stem>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile plot data from a summary CSV.
    Profile {
        summary: PathBuf,
        #[arg(long, default_value = "iterations")]
        metric: Metric,
        #[arg(long, default_value_t = 100)]
        tau_points: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Central-difference gradient check of one generated problem, e.g.
    /// `quadratic:n=100,r=10,phi=1,seed=3`, `quartic:n=10`, `poisson:j=2`,
    /// `logistic:path=data.libsvm,lambda=1e-3`.
    Gradcheck {
        problem: String,
        /// Number of points checked (the start point plus random ones).
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, out } => run(&config, out),
        Cmd::Profile {
            summary,
            metric,
            tau_points,
            out,
        } => profile(&summary, metric, tau_points, out),
        Cmd::Gradcheck { problem, points, tol } => gradcheck(&problem, points, tol),
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg = match SuiteConfig::from_file(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = out.unwrap_or_else(|| {
        let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "suite".into());
        PathBuf::from("results").join(stem)
    });
    match bench::run_suite(&cfg, &out, bench::workers_from_env()) {
        Ok(res) => {
            let failed: Vec<_> = res.outcomes.iter().filter(|o| o.row.status != "converged").collect();
            println!(
                "{} runs, {} converged, results in {}",
                res.outcomes.len(),
                res.outcomes.len() - failed.len(),
                res.dir.display()
            );
            for f in failed {
                let why = f.error.as_deref().unwrap_or("");
                println!("  {} / {} seed={:?}: {} {why}", f.row.problem, f.row.solver, f.row.seed, f.row.status);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn profile(summary: &Path, metric: Metric, tau_points: usize, out: Option<PathBuf>) -> ExitCode {
    let table = bench::read_summary(summary).and_then(|rows| bench::performance_profile(&rows, metric, tau_points));
    let table = match table {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let written = match out {
        Some(path) => fs::File::create(&path)
            .map_err(|e| e.to_string())
            .and_then(|f| table.write_plotdata(f).map_err(|e| e.to_string())),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table
                .write_plotdata(&mut lock)
                .map_err(|e| e.to_string())
                .and_then(|_| lock.flush().map_err(|e| e.to_string()))
        }
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn gradcheck(text: &str, points: usize, tol: f64) -> ExitCode {
    let (spec, seed) = match parse_inline_problem(text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let problem = match spec.build(seed, Path::new(".")) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let x0 = problem.initial_point();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.unwrap_or(0) ^ 0x5eed);
    let mut worst = 0.0_f64;
    for k in 0..points.max(1) {
        let x: Vec<f64> = if k == 0 {
            x0.clone()
        } else {
            x0.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect()
        };
        let err = fd_gradient_check(problem.as_ref(), &x, None);
        println!("point {k}: relative error {err:.3e}");
        worst = worst.max(err);
    }
    let ok = worst <= tol;
    println!("{}: max {worst:.3e} (tol {tol:.1e}) {}", problem.metadata().label(), if ok { "ok" } else { "FAILED" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Extended performance profiles.
//!
//! For problem `p` and solver `s`, `π = t[p][s] / min_{i≠s} t[p][i]`, so a
//! solver that beats every other one gets `π < 1`. Failed runs have
//! `t = ∞`, hence `π = ∞`, and never count in `ρ_s(τ) = #{p : π ≤ τ} / n_p`.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use super::config::Metric;
use super::suite::SummaryRow;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("a performance profile needs at least 2 solvers, got {0}")]
    TooFewSolvers(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("summary row {row}: {msg}")]
    BadRow { row: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub metric: Metric,
    pub solvers: Vec<String>,
    pub problems: Vec<String>,
    /// `t[p][s]`, `∞` for failures and missing runs.
    pub t: Vec<Vec<f64>>,
    /// `π[p][s]`
    pub pi: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    /// `rho[s][i] = ρ_s(tau[i])`
    pub rho: Vec<Vec<f64>>,
}

fn ratio(t: f64, best_other: f64) -> f64 {
    if !t.is_finite() {
        f64::INFINITY
    } else if t == best_other {
        1.0
    } else {
        // best_other = ∞ gives 0: the only solver to succeed
        t / best_other
    }
}

impl ProfileTable {
    /// Builds the table from metric values `t[p][s]` (non-finite = failure).
    pub fn from_matrix(
        metric: Metric,
        solvers: Vec<String>,
        problems: Vec<String>,
        t: Vec<Vec<f64>>,
        tau_points: usize,
    ) -> Result<Self, ProfileError> {
        let ns = solvers.len();
        if ns < 2 {
            return Err(ProfileError::TooFewSolvers(ns));
        }
        let t: Vec<Vec<f64>> = t
            .into_iter()
            .map(|row| row.into_iter().map(|v| if v.is_finite() { v } else { f64::INFINITY }).collect())
            .collect();
        let pi: Vec<Vec<f64>> = t
            .iter()
            .map(|row| {
                (0..ns)
                    .map(|s| {
                        let best = (0..ns).filter(|&i| i != s).map(|i| row[i]).fold(f64::INFINITY, f64::min);
                        ratio(row[s], best)
                    })
                    .collect()
            })
            .collect();
        let tau = tau_grid(&pi, tau_points.max(2));
        let mut table = Self {
            metric,
            solvers,
            problems,
            t,
            pi,
            tau,
            rho: Vec::new(),
        };
        table.rho = (0..ns)
            .map(|s| table.tau.iter().map(|&tau| table.rho_at(s, tau)).collect())
            .collect();
        Ok(table)
    }

    /// `ρ_s(τ)`; 0 for an empty problem set.
    pub fn rho_at(&self, s: usize, tau: f64) -> f64 {
        let np = self.problems.len();
        if np == 0 {
            return 0.0;
        }
        self.pi.iter().filter(|row| row[s] <= tau).count() as f64 / np as f64
    }

    /// Fraction of problems solver `s` solved.
    pub fn solved_fraction(&self, s: usize) -> f64 {
        let np = self.problems.len();
        if np == 0 {
            return 0.0;
        }
        self.t.iter().filter(|row| row[s].is_finite()).count() as f64 / np as f64
    }

    /// Checks that every `ρ_s` is nondecreasing and ends at the solved
    /// fraction.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (s, series) in self.rho.iter().enumerate() {
            if series.windows(2).any(|w| w[1] < w[0]) {
                return Err(format!("rho for {} decreases", self.solvers[s]));
            }
            let last = *series.last().unwrap_or(&0.0);
            if (last - self.solved_fraction(s)).abs() > 1e-12 {
                return Err(format!(
                    "rho for {} ends at {last}, solved fraction is {}",
                    self.solvers[s],
                    self.solved_fraction(s)
                ));
            }
        }
        Ok(())
    }

    /// Long-format CSV `series,tau,rho`: one series per solver, then the
    /// `tau=1` reference marker as two rows from 0 to 1.
    pub fn write_plotdata(&self, w: impl Write) -> Result<(), ProfileError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["series", "tau", "rho"])?;
        if self.problems.is_empty() {
            out.flush().map_err(csv::Error::from)?;
            return Ok(());
        }
        for (s, name) in self.solvers.iter().enumerate() {
            for (tau, rho) in self.tau.iter().zip(&self.rho[s]) {
                out.write_record([name.clone(), fmt(*tau), fmt(*rho)])?;
            }
        }
        out.write_record(["tau=1", "1", "0"])?;
        out.write_record(["tau=1", "1", "1"])?;
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

/// Log-spaced grid from the smallest to the largest finite positive `π`,
/// always containing 1 and every attained `π` value so `ρ` is exact at its
/// jumps.
fn tau_grid(pi: &[Vec<f64>], points: usize) -> Vec<f64> {
    let finite: Vec<f64> = pi.iter().flatten().copied().filter(|v| v.is_finite() && *v > 0.0).collect();
    let lo = finite.iter().copied().fold(1.0, f64::min);
    let hi = finite.iter().copied().fold(1.0, f64::max);
    let mut grid = Vec::with_capacity(points + finite.len() + 1);
    if hi > lo {
        let (a, b) = (lo.ln(), hi.ln());
        for i in 0..points {
            grid.push((a + (b - a) * i as f64 / (points - 1) as f64).exp());
        }
        grid[0] = lo;
        grid[points - 1] = hi;
    }
    grid.push(1.0);
    grid.extend(finite);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    grid.dedup();
    grid
}

/// Profile over summary rows; a problem instance is `(problem, seed)`.
/// Runs whose status is not `converged` count as failures.
pub fn performance_profile(rows: &[SummaryRow], metric: Metric, tau_points: usize) -> Result<ProfileTable, ProfileError> {
    let mut solvers: Vec<String> = Vec::new();
    for r in rows {
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver.clone());
        }
    }
    let mut by_problem: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = match r.seed {
            Some(seed) => format!("{}#{seed}", r.problem),
            None => r.problem.clone(),
        };
        let entry = by_problem.entry(key).or_insert_with(|| vec![f64::INFINITY; solvers.len()]);
        let s = solvers.iter().position(|n| *n == r.solver).expect("collected above");
        entry[s] = if r.status == "converged" {
            match metric {
                Metric::Iterations => r.iters as f64,
                Metric::Time => r.time,
                Metric::FEvals => r.f_evals as f64,
            }
        } else {
            f64::INFINITY
        };
    }
    let (problems, t): (Vec<String>, Vec<Vec<f64>>) = by_problem.into_iter().unzip();
    ProfileTable::from_matrix(metric, solvers, problems, t, tau_points)
}

//! Benchmark harness: suite configuration, parallel runner, CSV output and
//! performance profiles.

pub mod config;
pub mod profile;
pub mod suite;

pub use config::{parse_inline_problem, ConfigError, Metric, ProblemSpec, SolverSpec, SuiteConfig};
pub use profile::{performance_profile, ProfileError, ProfileTable};
pub use suite::{read_summary, run_jobs, run_suite, workers_from_env, SummaryRow, SuiteError, SuiteOutput};

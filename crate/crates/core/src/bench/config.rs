//! Declarative suite configuration (TOML).
//!
//! ```toml
//! seeds = [1, 2, 3, 4, 5]
//!
//! [[problems]]
//! generator = "quadratic"
//! n = 100
//! r = 10
//! phi = 1.0
//! d_range = [0.0, 999.0]
//!
//! [[problems]]
//! generator = "logistic"
//! path = "data/a9a.libsvm"
//! lambda = 1e-3
//!
//! [[solvers]]
//! name = "minus-init1"
//! variant = "minus"
//! init = "init1"
//! ```
//!
//! Relative data paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::line_search::WolfeConfig;
use crate::plus::DeltaMode;
use crate::problems::{
    make_logistic, make_poisson_control, make_structured_quadratic, make_structured_quartic, parse_libsvm_file,
    ProblemError, StructuredProblem,
};
use crate::solver::{InitStrategy, MinusInitMode, SolverConfig, Variant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config field `{path}`: {msg}")]
    Field { path: String, msg: String },
    #[error("data file not found: {0}")]
    MissingData(String),
}

fn field(path: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Seeds for generators that take one, unless a problem overrides them.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub problems: Vec<ProblemSpec>,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "generator", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        n: usize,
        r: usize,
        phi: f64,
        d_range: (f64, f64),
        seeds: Option<Vec<u64>>,
    },
    Quartic {
        n: usize,
        seeds: Option<Vec<u64>>,
    },
    Poisson {
        j: usize,
    },
    Logistic {
        path: PathBuf,
        lambda: f64,
    },
}

impl ProblemSpec {
    pub fn seeds<'a>(&'a self, default: &'a [u64]) -> Vec<Option<u64>> {
        match self {
            ProblemSpec::Quadratic { seeds, .. } | ProblemSpec::Quartic { seeds, .. } => {
                seeds.as_deref().unwrap_or(default).iter().map(|s| Some(*s)).collect()
            }
            ProblemSpec::Poisson { .. } | ProblemSpec::Logistic { .. } => vec![None],
        }
    }

    /// Builds the problem; `base` resolves relative data paths.
    pub fn build(&self, seed: Option<u64>, base: &Path) -> Result<Arc<dyn StructuredProblem>, ProblemError> {
        Ok(match self {
            ProblemSpec::Quadratic { n, r, phi, d_range, .. } => {
                Arc::new(make_structured_quadratic(*n, *r, *phi, *d_range, seed.unwrap_or(0))?)
            }
            ProblemSpec::Quartic { n, .. } => Arc::new(make_structured_quartic(*n, seed.unwrap_or(0))),
            ProblemSpec::Poisson { j } => Arc::new(make_poisson_control(*j)),
            ProblemSpec::Logistic { path, lambda } => {
                let data = parse_libsvm_file(&base.join(path))?;
                let mut p = make_logistic(data, *lambda)?;
                p.set_dataset(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
                Arc::new(p)
            }
        })
    }
}

/// Parses `generator:key=value,...`, e.g. `quadratic:n=100,r=10,phi=1,seed=3`
/// or `logistic:path=data/a.libsvm,lambda=1e-3`. Returns the spec and the
/// seed (default 1 for seeded generators).
pub fn parse_inline_problem(text: &str) -> Result<(ProblemSpec, Option<u64>), ConfigError> {
    let (gen, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut kv = std::collections::BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| field(part.trim(), "expected key=value"))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let take = |kv: &mut std::collections::BTreeMap<String, String>, k: &str| -> Result<String, ConfigError> {
        kv.remove(k).ok_or_else(|| field(k, format!("missing for generator `{gen}`")))
    };
    fn num<T: std::str::FromStr>(k: &str, v: String) -> Result<T, ConfigError> {
        v.parse().map_err(|_| field(k, format!("cannot parse `{v}`")))
    }
    let seed = match kv.remove("seed") {
        Some(v) => Some(num::<u64>("seed", v)?),
        None => None,
    };
    let spec = match gen.trim() {
        "quadratic" => {
            let n: usize = num("n", take(&mut kv, "n")?)?;
            let r = match kv.remove("r") {
                Some(v) => num("r", v)?,
                None => (n / 10).max(1),
            };
            let phi = match kv.remove("phi") {
                Some(v) => num("phi", v)?,
                None => 1.0,
            };
            let lo = match kv.remove("dmin") {
                Some(v) => num("dmin", v)?,
                None => 0.0,
            };
            let hi = match kv.remove("dmax") {
                Some(v) => num("dmax", v)?,
                None => 999.0,
            };
            ProblemSpec::Quadratic {
                n,
                r,
                phi,
                d_range: (lo, hi),
                seeds: None,
            }
        }
        "quartic" => ProblemSpec::Quartic {
            n: num("n", take(&mut kv, "n")?)?,
            seeds: None,
        },
        "poisson" => ProblemSpec::Poisson {
            j: num("j", take(&mut kv, "j")?)?,
        },
        "logistic" => ProblemSpec::Logistic {
            path: PathBuf::from(take(&mut kv, "path")?),
            lambda: match kv.remove("lambda") {
                Some(v) => num("lambda", v)?,
                None => 1e-3,
            },
        },
        other => return Err(field("generator", format!("unknown generator `{other}`"))),
    };
    if let Some(k) = kv.keys().next() {
        return Err(field(k.as_str(), "unknown parameter"));
    }
    let seed = match spec {
        ProblemSpec::Quadratic { .. } | ProblemSpec::Quartic { .. } => Some(seed.unwrap_or(1)),
        _ => None,
    };
    Ok((spec, seed))
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitName {
    Init1,
    Init2,
    Init3,
    Init4,
    Constant,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MinusInitName {
    #[default]
    Scalar,
    Operator,
    OperatorIncremental,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum DeltaName {
    #[default]
    Power,
    Cheap,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub name: String,
    pub variant: VariantName,
    #[serde(default = "default_memory")]
    pub memory: usize,
    pub init: InitName,
    /// `σ̄` for `init = "constant"`, otherwise `σ₀`.
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub minus_init: MinusInitName,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub delta: DeltaName,
    #[serde(default = "default_cheap_epsilon")]
    pub cheap_epsilon: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub max_evals: Option<usize>,
}

fn default_memory() -> usize {
    8
}
fn one() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    10_000
}
fn default_cheap_epsilon() -> f64 {
    1e-8
}

impl SolverSpec {
    pub fn to_config(&self) -> SolverConfig {
        let (init_strategy, sigma0) = match self.init {
            InitName::Init1 => (InitStrategy::Init1, self.sigma),
            InitName::Init2 => (InitStrategy::Init2, self.sigma),
            InitName::Init3 => (InitStrategy::Init3, self.sigma),
            InitName::Init4 => (InitStrategy::Init4, self.sigma),
            InitName::Constant => (InitStrategy::Constant(self.sigma), self.sigma),
        };
        let mut wolfe = WolfeConfig::default();
        if let Some(c1) = self.c1 {
            wolfe.c1 = c1;
        }
        if let Some(c2) = self.c2 {
            wolfe.c2 = c2;
        }
        if let Some(m) = self.max_evals {
            wolfe.max_evals = m;
        }
        SolverConfig {
            variant: match self.variant {
                VariantName::Minus => Variant::Minus,
                VariantName::Plus => Variant::Plus,
            },
            memory: self.memory,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            init_strategy,
            sigma0,
            minus_init_mode: match self.minus_init {
                MinusInitName::Scalar => MinusInitMode::Scalar,
                MinusInitName::Operator => MinusInitMode::Operator { incremental: false },
                MinusInitName::OperatorIncremental => MinusInitMode::Operator { incremental: true },
            },
            wolfe,
            delta_mode: match self.delta {
                DeltaName::Power => DeltaMode::PowerOfTen,
                DeltaName::Cheap => DeltaMode::Cheap {
                    epsilon: self.cheap_epsilon,
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Iterations,
    Time,
    FEvals,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Iterations => "iterations",
            Metric::Time => "time",
            Metric::FEvals => "f-evals",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "iterations" | "iters" => Ok(Metric::Iterations),
            "time" => Ok(Metric::Time),
            "f-evals" | "f_evals" => Ok(Metric::FEvals),
            _ => Err(format!("unknown metric `{s}` (iterations|time|f-evals)")),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_tau_points")]
    pub tau_points: usize,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            metrics: default_metrics(),
            tau_points: default_tau_points(),
        }
    }
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Iterations, Metric::Time]
}

fn default_tau_points() -> usize {
    100
}

impl SuiteConfig {
    /// Parses `text`; paths in the returned config are relative to `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| field("<root>", e.to_string()))?;
        let mut cfg: SuiteConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field(path, e.into_inner().message().trim().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.problems.is_empty() {
            return Err(field("problems", "at least one problem is required"));
        }
        if self.solvers.is_empty() {
            return Err(field("solvers", "at least one solver is required"));
        }
        for (i, p) in self.problems.iter().enumerate() {
            let at = |f: &str| format!("problems[{i}].{f}");
            match p {
                ProblemSpec::Quadratic { n, r, phi, d_range, .. } => {
                    if *r < 1 || r > n {
                        return Err(field(at("r"), format!("need 1 <= r <= n = {n}")));
                    }
                    if !(*phi > 0.0) {
                        return Err(field(at("phi"), "must be > 0"));
                    }
                    if !(d_range.0 <= d_range.1) {
                        return Err(field(at("d_range"), "lower bound exceeds upper bound"));
                    }
                }
                ProblemSpec::Quartic { n, .. } => {
                    if *n < 1 {
                        return Err(field(at("n"), "must be >= 1"));
                    }
                }
                ProblemSpec::Poisson { j } => {
                    if *j < 1 {
                        return Err(field(at("j"), "must be >= 1"));
                    }
                }
                ProblemSpec::Logistic { path, lambda } => {
                    if !(*lambda > 0.0) {
                        return Err(field(at("lambda"), "must be > 0"));
                    }
                    let full = self.base_dir.join(path);
                    if !full.is_file() {
                        return Err(ConfigError::MissingData(full.display().to_string()));
                    }
                }
            }
        }
        let mut names = std::collections::HashSet::new();
        for (i, s) in self.solvers.iter().enumerate() {
            if !names.insert(s.name.as_str()) {
                return Err(field(format!("solvers[{i}].name"), format!("duplicate solver `{}`", s.name)));
            }
            s.to_config()
                .validate()
                .map_err(|m| field(format!("solvers[{i}]"), m))?;
        }
        if self.profile.tau_points < 2 {
            return Err(field("profile.tau_points", "must be >= 2"));
        }
        Ok(())
    }
}

//! Flat key-value experiment configs with `key=value` overrides.

use std::fmt;

use serde::{Deserialize, Serialize};
use ttkrylov_core::solver::{GmresConfig, RoundingPolicy, StoppingCriterion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Poisson,
    Convdiff,
    ParamConvdiff,
    HeatParam,
    MultiRhsPoisson,
    MultiRhsConvdiff,
    EigenRhs,
    PrecSweep,
    RelaxedCompare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Poisson => "poisson",
            Experiment::Convdiff => "convdiff",
            Experiment::ParamConvdiff => "param-convdiff",
            Experiment::HeatParam => "heat-param",
            Experiment::MultiRhsPoisson => "multi-rhs-poisson",
            Experiment::MultiRhsConvdiff => "multi-rhs-convdiff",
            Experiment::EigenRhs => "eigen-rhs",
            Experiment::PrecSweep => "prec-sweep",
            Experiment::RelaxedCompare => "relaxed-compare",
        }
    }

    /// Experiments solving an all-in-one system with `p` slices.
    pub fn is_all_in_one(self) -> bool {
        matches!(self, Experiment::ParamConvdiff | Experiment::HeatParam | Experiment::MultiRhsPoisson | Experiment::MultiRhsConvdiff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Constant,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "eta_Ab")]
    EtaAb,
    #[serde(rename = "eta_b")]
    EtaB,
    #[serde(rename = "eta_tilde_b")]
    EtaTildeB,
}

fn d3() -> usize {
    3
}
fn m100() -> usize {
    100
}
fn e5() -> f64 {
    1e-5
}
fn tau_default() -> f64 {
    1e-2
}
fn samples() -> usize {
    10
}
fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn ten() -> usize {
    10
}
fn yes() -> bool {
    true
}
fn sweep_qs() -> Vec<usize> {
    vec![2, 8, 16, 32, 64]
}
fn sweep_taus() -> Vec<f64> {
    vec![1e-2, 1e-8]
}
fn csv() -> Format {
    Format::Csv
}
fn constant() -> Policy {
    Policy::Constant
}
fn eta_ab() -> Criterion {
    Criterion::EtaAb
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    #[serde(default = "d3")]
    pub d: usize,
    /// Parameter or right-hand-side count of all-in-one experiments.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default = "m100")]
    pub m: usize,
    #[serde(default = "e5")]
    pub epsilon: f64,
    #[serde(default = "e5")]
    pub delta: f64,
    #[serde(default = "m100")]
    pub maxit: usize,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default = "tau_default")]
    pub tau: f64,
    #[serde(default)]
    pub precondition: bool,
    #[serde(default)]
    pub seed: u64,
    /// Path prefix of every emitted file; empty means `<experiment>_`.
    #[serde(default)]
    pub output: String,
    #[serde(default = "csv")]
    pub format: Format,
    #[serde(default = "constant")]
    pub rounding_policy: Policy,
    #[serde(default = "eta_ab")]
    pub stopping_criterion: Criterion,
    #[serde(default = "samples")]
    pub norm_samples: usize,
    #[serde(default = "one")]
    pub assemble_every: usize,
    /// Rank of the random perturbation in multi-rhs experiments.
    #[serde(default = "two")]
    pub rank_cap: usize,
    /// Eigenvectors summed in the slow eigen-rhs system.
    #[serde(default = "ten")]
    pub j: usize,
    #[serde(default = "sweep_qs")]
    pub qs: Vec<usize>,
    #[serde(default = "sweep_taus")]
    pub taus: Vec<f64>,
    /// Per-slice bound report for all-in-one experiments.
    #[serde(default = "yes")]
    pub bounds: bool,
    /// Write the final solution densely (subject to the dense budget).
    #[serde(default)]
    pub dense_export: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses one override value as a TOML literal, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl ExperimentConfig {
    /// Parses a config document, applies `key=value` overrides, validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::new("", e.message().to_string()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::new("", format!("override `{o}` is not key=value")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::new("", format!("override `{o}` has an empty key")));
            }
            table.insert(k.to_string(), override_value(v.trim()));
        }
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        // round-trip through text so serde errors carry the offending key
        let text = toml::to_string(&table).map_err(|e| ConfigError::new("", e.to_string()))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().to_string();
            let named = msg.starts_with("missing field") || msg.starts_with("unknown field");
            let field = if named { backticked(&msg) } else { e.span().and_then(|s| key_of_line(&text, s.start)) };
            let field = field.unwrap_or_default();
            ConfigError::new(&field, msg)
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let name = self.experiment.name();
        if self.n < 2 {
            return Err(ConfigError::new("n", "grid size must be at least 2"));
        }
        if self.d != 3 {
            return Err(ConfigError::new("d", format!("{name} is built for d = 3, got {}", self.d)));
        }
        if !(self.epsilon > 0.0) {
            return Err(ConfigError::new("epsilon", "must be positive"));
        }
        if !(self.delta >= 0.0) {
            return Err(ConfigError::new("delta", "must be non-negative"));
        }
        if self.m == 0 {
            return Err(ConfigError::new("m", "must be at least 1"));
        }
        if self.maxit < self.m {
            return Err(ConfigError::new("maxit", format!("must be at least m = {}", self.m)));
        }
        if self.norm_samples == 0 {
            return Err(ConfigError::new("norm_samples", "must be at least 1"));
        }
        if self.assemble_every == 0 {
            return Err(ConfigError::new("assemble_every", "must be at least 1"));
        }
        if self.experiment.is_all_in_one() {
            match self.p {
                None => return Err(ConfigError::new("p", format!("required for {name}"))),
                Some(0) => return Err(ConfigError::new("p", "must be at least 1")),
                _ => {}
            }
        }
        if matches!(self.experiment, Experiment::MultiRhsPoisson | Experiment::MultiRhsConvdiff) && self.rank_cap == 0 {
            return Err(ConfigError::new("rank_cap", "must be at least 1"));
        }
        if self.experiment == Experiment::EigenRhs && self.j == 0 {
            return Err(ConfigError::new("j", "must be at least 1"));
        }
        if self.precondition || self.experiment == Experiment::RelaxedCompare {
            match self.q {
                None => return Err(ConfigError::new("q", format!("required when {name} is preconditioned"))),
                Some(0) => return Err(ConfigError::new("q", "must be at least 1")),
                _ => {}
            }
            if !(self.tau >= 0.0) {
                return Err(ConfigError::new("tau", "must be non-negative"));
            }
        }
        if self.experiment == Experiment::PrecSweep {
            if self.qs.is_empty() || self.qs.contains(&0) {
                return Err(ConfigError::new("qs", "needs positive entries"));
            }
            if self.taus.is_empty() || self.taus.iter().any(|t| !(*t >= 0.0)) {
                return Err(ConfigError::new("taus", "needs non-negative entries"));
            }
        }
        Ok(())
    }

    /// Warnings that do not stop the run.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.delta > self.epsilon && self.experiment != Experiment::PrecSweep {
            w.push(format!(
                "delta = {:e} exceeds epsilon = {:e}: the rounding accuracy should not be larger than the target accuracy",
                self.delta, self.epsilon
            ));
        }
        w
    }

    pub fn gmres(&self) -> GmresConfig {
        let mut g = GmresConfig::new(self.m, self.epsilon, self.delta, self.maxit);
        g.rounding_policy = match self.rounding_policy {
            Policy::Constant => RoundingPolicy::Constant,
            Policy::Relaxed => RoundingPolicy::Relaxed,
        };
        g.stopping_criterion = match self.stopping_criterion {
            Criterion::EtaAb => StoppingCriterion::EtaAb,
            Criterion::EtaB => StoppingCriterion::EtaB,
            Criterion::EtaTildeB => StoppingCriterion::EtaTildeB,
        };
        g.norm_samples = self.norm_samples;
        g.seed = self.seed;
        g.assemble_every = self.assemble_every;
        g
    }

    pub fn prefix(&self) -> String {
        if self.output.is_empty() {
            format!("{}_", self.experiment.name())
        } else {
            self.output.clone()
        }
    }
}

/// Key of the `key = value` line containing byte `pos`.
fn key_of_line(text: &str, pos: usize) -> Option<String> {
    let start = text.get(..pos)?.rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let key = line.split_once('=')?.0.trim();
    (!key.is_empty()).then(|| key.to_string())
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

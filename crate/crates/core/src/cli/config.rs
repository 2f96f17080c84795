//! JSON run configuration: loading, unknown-key hints and range checks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::energy::{DomainMode, Family};
use crate::error::{Error, Result};
use crate::experiments::{FitModel, SweepKind, TransitionConfig};
use crate::kernel::ScalingVariant;
use crate::potential::Potential;
use crate::solver::{ProfileKind, SolverOptions};
use crate::tension::{Schedule, TensionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Tension,
    SweepEps,
    SweepS,
    Profile,
    Check,
    Export,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tension => "tension",
            Command::SweepEps => "sweep-eps",
            Command::SweepS => "sweep-s",
            Command::Profile => "profile",
            Command::Check => "check",
            Command::Export => "export",
        }
    }
}

/// A potential given by name (`"quartic"`, `"truncated-quadratic"`) or in
/// full tagged form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Named(String),
    Full(Potential),
}

impl PotentialSpec {
    pub fn resolve(&self) -> Result<Potential> {
        match self {
            PotentialSpec::Full(p) => Ok(p.clone()),
            PotentialSpec::Named(n) => match n.as_str() {
                "quartic" | "quartic-double-well" => Ok(Potential::quartic()),
                "truncated-quadratic" | "truncated_quadratic" => Ok(Potential::truncated_quadratic()),
                other => Err(field_error("potential", format!("unknown potential {other:?}"))),
            },
        }
    }
}

/// A single number or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Tension kind for `tension`, sweep kind for `sweep-s`.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub eps: Option<OneOrMany>,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub s_list: Option<Vec<f64>>,
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    #[serde(default)]
    pub domain_mode: DomainMode,
    #[serde(default)]
    pub scaling: Option<ScalingVariant>,
    #[serde(default)]
    pub start: Option<ProfileKind>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub transitions: TransitionConfig,
    #[serde(default)]
    pub fit_model: FitModel,
    #[serde(default)]
    pub fit_tail: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub cache: bool,
    /// 0 lets the thread pool pick.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
    /// Result JSON read by `export`.
    #[serde(default)]
    pub input: Option<PathBuf>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

/// Keys accepted at the top level of a config.
pub const KEYS: &[&str] = &[
    "command",
    "kind",
    "k",
    "s",
    "delta",
    "potential",
    "family",
    "eps",
    "cells",
    "s_list",
    "interval",
    "domain_mode",
    "scaling",
    "start",
    "schedule",
    "solver",
    "transitions",
    "fit_model",
    "fit_tail",
    "output_dir",
    "cache_dir",
    "cache",
    "threads",
    "seed",
    "input",
];

fn field_error(field: &str, message: String) -> Error {
    Error::Config(format!("field `{field}`: {message}"))
}

fn unknown_key(key: &str) -> Error {
    let best = KEYS
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), *k))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, k)) => Error::Config(format!("unknown key `{key}`; did you mean `{k}`?")),
        None => Error::Config(format!("unknown key `{key}`")),
    }
}

fn parse_error(err: serde_json::Error) -> Error {
    Error::Config(format!(
        "parse error at line {}, column {}: {err}",
        err.line(),
        err.column()
    ))
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Parses config text; see [`load_config`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(parse_error)?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> Result<RunConfig> {
    let Value::Object(map) = &value else {
        return Err(Error::Config("config must be a JSON object".into()));
    };
    if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(unknown_key(key));
    }
    let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            kind: None,
            k: None,
            s: None,
            delta: None,
            potential: None,
            family: None,
            eps: None,
            cells: None,
            s_list: None,
            interval: None,
            domain_mode: DomainMode::default(),
            scaling: None,
            start: None,
            schedule: Schedule::default(),
            solver: SolverOptions::default(),
            transitions: TransitionConfig::default(),
            fit_model: FitModel::default(),
            fit_tail: None,
            output_dir: default_output(),
            cache_dir: None,
            cache: true,
            threads: 0,
            seed: 0,
            input: None,
        }
    }

    pub fn tension_kind(&self) -> Result<TensionKind> {
        self.kind
            .as_deref()
            .ok_or_else(|| field_error("kind", "required".into()))?
            .parse()
            .map_err(|e: Error| field_error("kind", e.to_string()))
    }

    pub fn sweep_kind(&self) -> Result<SweepKind> {
        let kind: SweepKind = self
            .kind
            .as_deref()
            .ok_or_else(|| field_error("kind", "required".into()))?
            .parse()
            .map_err(|e: Error| field_error("kind", e.to_string()))?;
        if kind == SweepKind::Eps {
            return Err(field_error("kind", "use the sweep-eps command for ε-sweeps".into()));
        }
        Ok(kind)
    }

    pub fn potential(&self) -> Result<Option<Potential>> {
        self.potential.as_ref().map(|p| p.resolve()).transpose()
    }

    /// Range checks that name the offending field.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.s {
            if !(0.0..1.0).contains(&s) {
                return Err(field_error("s", format!("must lie in [0, 1), got {s}")));
            }
        }
        if let Some(k) = self.k {
            if k > 8 {
                return Err(field_error("k", format!("orders above 8 are not supported, got {k}")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(field_error("delta", format!("must be positive, got {d}")));
            }
        }
        if let Some(eps) = &self.eps {
            let eps = eps.to_vec();
            if eps.is_empty() {
                return Err(field_error("eps", "must not be empty".into()));
            }
            if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                return Err(field_error("eps", format!("values must lie in (0, 1], got {e}")));
            }
            if !eps.windows(2).all(|w| w[1] < w[0]) {
                return Err(field_error("eps", "must be strictly decreasing".into()));
            }
        }
        if let Some(list) = &self.s_list {
            if let Some(s) = list.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
                return Err(field_error("s_list", format!("values must lie in (0, 1), got {s}")));
            }
        }
        if let Some(n) = self.cells {
            if n < 8 {
                return Err(field_error("cells", format!("need at least 8 cells, got {n}")));
            }
        }
        if let Some([a, b]) = self.interval {
            if !(a < b && a.is_finite() && b.is_finite()) {
                return Err(field_error("interval", format!("need a < b, got [{a}, {b}]")));
            }
        }
        if let Some(t) = self.fit_tail {
            if t < 3 {
                return Err(field_error("fit_tail", format!("need at least 3 rows, got {t}")));
            }
        }
        TransitionConfig::new(self.transitions.eta, self.transitions.r)
            .map_err(|e| field_error("transitions", e.to_string()))?;
        self.solver.validate().map_err(|e| field_error("solver", e.to_string()))?;
        self.potential()?;
        match self.command {
            Command::Tension | Command::Profile if self.kind.is_none() && self.family.is_none() => {
                Err(field_error("kind", "required".into()))
            }
            Command::Tension => self.tension_kind().map(|_| ()),
            Command::SweepS => self.sweep_kind().map(|_| ()),
            Command::Export if self.input.is_none() => Err(field_error("input", "required".into())),
            _ => Ok(()),
        }
    }
}

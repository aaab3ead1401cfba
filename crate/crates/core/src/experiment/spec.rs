//! Experiment description read from flat dotted TOML.
//!
//! ```toml
//! scenario = "fig-lambda"
//! seeds = [0, 1, 2]
//! system.num_devices = 8
//! agent.kind = "bd3qn"
//! sweep.variable = "lambda"
//! sweep.values = [0.2, 0.4, 0.6, 0.8]
//! ```
//!
//! Every key must exist in the default spec; all unknown keys are reported
//! together.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::agents::{AgentHyper, AgentKind, FLAT_ACTION_LIMIT};
use crate::allocator::AllocatorKind;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::joint::AOConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentSection {
    pub kind: AgentKind,
    pub allocator: AllocatorKind,
    #[serde(flatten)]
    pub hyper: AgentHyper,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self { kind: AgentKind::Bd3qn, allocator: AllocatorKind::Convex, hyper: AgentHyper::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub episodes: usize,
    pub eval_episodes: usize,
    /// Trailing window of the smoothed reward column.
    pub smoothing_window: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { episodes: 2000, eval_episodes: 20, smoothing_window: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "N", alias = "n")]
    Devices,
    #[serde(rename = "M", alias = "m")]
    Stations,
    #[serde(rename = "bandwidth")]
    Bandwidth,
    #[serde(rename = "compute")]
    Compute,
    #[serde(rename = "batch_size")]
    BatchSize,
    #[serde(rename = "learning_rate")]
    LearningRate,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::Devices => "N",
            Self::Stations => "M",
            Self::Bandwidth => "bandwidth",
            Self::Compute => "compute",
            Self::BatchSize => "batch_size",
            Self::LearningRate => "learning_rate",
        }
    }

    /// Applies one sweep value. `compute` pins every station's capacity.
    pub fn apply(self, value: f64, system: &mut SystemConfig, hyper: &mut AgentHyper) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("sweep value {v} of {} must be a positive integer", self.as_str())))
            }
        };
        match self {
            Self::Lambda => system.arrival_rate = value,
            Self::Devices => system.num_devices = count(value)?,
            Self::Stations => system.num_bs = count(value)?,
            Self::Bandwidth => system.bandwidth_cap = value,
            Self::Compute => system.compute_cap = [value, value],
            Self::BatchSize => hyper.batch_size = count(value)?,
            Self::LearningRate => hyper.learning_rate = value,
        }
        Ok(())
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub variable: Option<SweepVar>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareSection {
    pub agents: Vec<AgentKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub system: SystemConfig,
    pub agent: AgentSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub compare: CompareSection,
    pub ao: AOConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            seeds: vec![0],
            system: SystemConfig::default(),
            agent: AgentSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            compare: CompareSection::default(),
            ao: AOConfig::default(),
        }
    }
}

/// Keys that are absent from the serialized default because they are optional.
const OPTIONAL_KEYS: [&str; 2] = ["system.aoi_cap", "sweep.variable"];

fn flatten_into(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten_into(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

pub fn flatten(table: &Table) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    flatten_into("", table, &mut out);
    out
}

fn known_keys() -> BTreeSet<String> {
    let default = Table::try_from(ExperimentSpec::default()).expect("default spec serializes");
    let mut keys: BTreeSet<String> = flatten(&default).into_iter().map(|(k, _)| k).collect();
    keys.extend(OPTIONAL_KEYS.iter().map(|k| k.to_string()));
    keys
}

/// Parses the value half of `key=value`: any TOML literal, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn insert_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty key in '{key}'")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("'{p}' in '{key}' is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentSpec {
    /// Builds a spec from TOML text plus `key=value` overrides (applied last).
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            insert_dotted(&mut table, k.trim(), parse_value(v))?;
        }
        let known = known_keys();
        let unknown: Vec<String> = flatten(&table).into_iter().map(|(k, _)| k).filter(|k| !known.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let spec: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Agents taking part in sweeps and comparisons.
    pub fn agents(&self) -> Vec<AgentKind> {
        if self.compare.agents.is_empty() {
            vec![self.agent.kind]
        } else {
            self.compare.agents.clone()
        }
    }

    /// Sweep points as `(value, system, hyper)`; a single unlabelled point
    /// when no sweep is configured.
    pub fn points(&self) -> Result<Vec<(Option<f64>, SystemConfig, AgentHyper)>> {
        match self.sweep.variable {
            None => Ok(vec![(None, self.system.clone(), self.agent.hyper.clone())]),
            Some(var) => self
                .sweep
                .values
                .iter()
                .map(|&v| {
                    let (mut s, mut h) = (self.system.clone(), self.agent.hyper.clone());
                    var.apply(v, &mut s, &mut h)?;
                    Ok((Some(v), s, h))
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.scenario.is_empty() || self.scenario.contains(['/', '\\']) {
            return Err(Error::Config(format!("scenario name '{}' must be a plain file name", self.scenario)));
        }
        if self.train.episodes == 0 || self.train.eval_episodes == 0 || self.train.smoothing_window == 0 {
            return Err(Error::Config("train.episodes, train.eval_episodes and train.smoothing_window must be >= 1".into()));
        }
        if self.sweep.variable.is_some() && self.sweep.values.is_empty() {
            return Err(Error::Config("sweep.values is empty".into()));
        }
        self.ao.validate()?;
        for (_, system, hyper) in self.points()? {
            system.validate()?;
            hyper.validate()?;
            for kind in self.agents() {
                if kind.is_flat() && system.flat_action_count() > FLAT_ACTION_LIMIT {
                    return Err(Error::ActionSpace { size: system.flat_action_count(), limit: FLAT_ACTION_LIMIT });
                }
            }
        }
        Ok(())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Value::String(s.into())
            .try_into()
            .map_err(|_| Error::Config(format!("unknown sweep variable '{s}'")))
    }
}

//! Experiment configuration.
//!
//! Unknown fields are rejected everywhere. Experiment-specific settings live
//! under `params` and are parsed by the experiment itself.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use predrep::grid::GridWorld;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// JSON Schema for config files.
pub const SCHEMA: &str = include_str!("../schema/experiment.schema.json");

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Validates a config document against [`SCHEMA`].
pub fn check_schema(doc: &serde_json::Value) -> Result<()> {
    let errors: Vec<String> = validator()
        .iter_errors(doc)
        .map(|e| {
            let at = e.instance_path().to_string();
            format!("{}: {e}", if at.is_empty() { "/" } else { &at })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::config(format!("schema: {}", errors.join("; "))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "MB")]
    Mb,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "SF-GPI")]
    SfGpi,
    #[serde(rename = "TCM-SR")]
    TcmSr,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Mf => "MF",
            AgentKind::Mb => "MB",
            AgentKind::Sr => "SR",
            AgentKind::SfGpi => "SF-GPI",
            AgentKind::TcmSr => "TCM-SR",
        }
    }
}

/// Policy whose occupancies an SR agent learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrTarget {
    /// The agent's own epsilon-greedy policy (expected SARSA).
    Behaviour,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    ValueIteration,
    /// Uniform-cost search on the most likely successor of each action.
    Search,
    /// A* with a Manhattan heuristic; needs grid coordinates.
    SearchManhattan,
}

/// Hyperparameters; fields left out take the agent's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Step size of the learned transition and reward model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr_target: Option<SrTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<Planner>,
    /// Replayed transitions per real step (SR agent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<usize>,
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: Option<f64>, lo_open: bool| -> Result<()> {
            if let Some(x) = v {
                let ok = x.is_finite() && x <= 1.0 && if lo_open { x > 0.0 } else { x >= 0.0 };
                if !ok {
                    return Err(HarnessError::config(format!("agent parameter {name}={x} out of range")));
                }
            }
            Ok(())
        };
        unit("eta", self.eta, true)?;
        unit("epsilon", self.epsilon, false)?;
        unit("lambda", self.lambda, false)?;
        unit("omega", self.omega, false)?;
        unit("model_rate", self.model_rate, true)?;
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(HarnessError::config(format!("agent gamma={g} must lie in [0,1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(rename = "type")]
    pub kind: AgentKind,
    #[serde(default)]
    pub params: AgentParams,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        Self { kind, params: AgentParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// Gridworld text: `#` wall, `.` open, `S` start, `G` goal.
    Grid { text: String },
    Open { width: usize, height: usize },
    /// A grid read from a text file, relative to the config file.
    GridFile { path: PathBuf },
}

impl EnvironmentSpec {
    pub fn grid(&self) -> Result<GridWorld> {
        match self {
            EnvironmentSpec::Grid { text } => Ok(GridWorld::parse(text)?),
            EnvironmentSpec::Open { width, height } => {
                if *width == 0 || *height == 0 {
                    return Err(HarnessError::config("open grid needs positive width and height"));
                }
                Ok(GridWorld::open(*width, *height))
            }
            EnvironmentSpec::GridFile { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
                Ok(GridWorld::parse(&text)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentSpec>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, seeds: Vec<u64>) -> Self {
        Self { experiment: experiment.into(), seeds, environment: None, agents: Vec::new(), params: serde_json::Value::Null, out: None }
    }

    /// Parses a config document, checking it against the schema first.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        check_schema(&doc)?;
        serde_json::from_value(doc).map_err(|e| HarnessError::config(e.to_string()))
    }

    /// Reads a config file; relative grid-file paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(EnvironmentSpec::GridFile { path: p }) = &mut cfg.environment {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that do not depend on the experiment.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds must be non-empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(HarnessError::config("seeds must be distinct"));
        }
        for a in &self.agents {
            a.params.validate()?;
        }
        if let Some(env) = &self.environment {
            env.grid()?;
        }
        Ok(())
    }

    /// Experiment parameters, falling back to defaults for a missing block.
    pub fn params<P: serde::de::DeserializeOwned + Default>(&self) -> Result<P> {
        if self.params.is_null() {
            return Ok(P::default());
        }
        serde_json::from_value(self.params.clone()).map_err(|e| HarnessError::config(format!("params: {e}")))
    }
}

/// Parses `1,2,5..8` into `[1, 2, 5, 6, 7]`.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let lo: u64 = a.trim().parse().map_err(|_| HarnessError::config(format!("bad seed range '{part}'")))?;
            let hi: u64 = b.trim().parse().map_err(|_| HarnessError::config(format!("bad seed range '{part}'")))?;
            if hi <= lo {
                return Err(HarnessError::config(format!("empty seed range '{part}'")));
            }
            out.extend(lo..hi);
        } else {
            out.push(part.parse().map_err(|_| HarnessError::config(format!("bad seed '{part}'")))?);
        }
    }
    if out.is_empty() {
        return Err(HarnessError::config("empty seed list"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("1, 2,5..8").unwrap(), vec![1, 2, 5, 6, 7]);
        assert!(parse_seed_list("").is_err());
        assert!(parse_seed_list("3..3").is_err());
        assert!(parse_seed_list("x").is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"experiment":"sr","seeds":[1],"colour":2}"#).is_err());
        let bad_agent = r#"{"experiment":"sr","seeds":[1],"agents":[{"type":"SR","params":{"etta":0.1}}]}"#;
        assert!(ExperimentConfig::from_json(bad_agent).is_err());
        let ok = r#"{"experiment":"sr","seeds":[1],"agents":[{"type":"SF-GPI"}]}"#;
        assert_eq!(ExperimentConfig::from_json(ok).unwrap().agents[0].kind, AgentKind::SfGpi);
    }

    #[test]
    fn schema_catches_what_serde_cannot() {
        assert!(ExperimentConfig::from_json(r#"{"experiment":"sr","seeds":[1,1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"nope","seeds":[1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"sr","seeds":[1],"params":{"random_mdps":0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"replay","seeds":[1],"params":{"candidates":[]}}"#).is_ok());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new("sr", vec![]);
        assert!(c.validate().is_err());
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
        c.seeds = vec![1];
        c.agents.push(AgentSpec { kind: AgentKind::Mf, params: AgentParams { eta: Some(1.5), ..Default::default() } });
        assert!(c.validate().is_err());
    }
}

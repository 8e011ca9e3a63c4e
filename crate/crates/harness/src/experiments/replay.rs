//! Prioritized replay on a linear track that restarts after the goal.

use nalgebra::DMatrix;
use predrep::neuro::{all_pairs, replay_simulate, restart_track, ReplayCandidate, ReplayConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::AgentRegistry;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{num, Check, ExperimentReport, SeedRecord, Table};

use super::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayParams {
    pub length: usize,
    pub gamma: f64,
    pub goal_reward: f64,
    pub agent_state: usize,
    /// Defaults to three backups per track state.
    pub max_backups: Option<usize>,
    pub threshold: f64,
    pub min_gain: f64,
    pub epsilon: f64,
    /// `[state, action]` pairs allowed to be replayed; all pairs when absent.
    pub candidates: Option<Vec<[usize; 2]>>,
}

impl Default for ReplayParams {
    fn default() -> Self {
        Self {
            length: 8,
            gamma: 0.9,
            goal_reward: 1.0,
            agent_state: 0,
            max_backups: None,
            threshold: 1e-6,
            min_gain: 0.0,
            epsilon: 0.0,
            candidates: None,
        }
    }
}

pub fn replay_sequence(p: &ReplayParams) -> Result<Vec<ReplayCandidate>> {
    let mdp = restart_track(p.length, p.gamma, p.goal_reward)?;
    let pairs: Vec<(usize, usize)> = match &p.candidates {
        Some(c) => c.iter().map(|&[s, a]| (s, a)).collect(),
        None => all_pairs(&mdp),
    };
    let cfg = ReplayConfig {
        threshold: p.threshold,
        max_backups: p.max_backups.unwrap_or(3 * p.length),
        min_gain: p.min_gain,
        epsilon: p.epsilon,
    };
    Ok(replay_simulate(&mdp, &DMatrix::zeros(p.length, 2), p.agent_state, &pairs, &cfg)?.sequence)
}

pub struct ReplayDemo;

impl Experiment for ReplayDemo {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn summary(&self) -> &'static str {
        "need-times-gain replay ordering on a restarting track"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("replay", vec![0]);
        c.params = serde_json::to_value(ReplayParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        if !cfg.agents.is_empty() {
            return Err(HarnessError::config("replay takes no agents"));
        }
        let p: ReplayParams = cfg.params()?;
        if p.length < 2 {
            return Err(HarnessError::config("track length must be at least 2"));
        }
        if p.agent_state >= p.length {
            return Err(HarnessError::config("agent_state outside the track"));
        }
        if !(0.0..1.0).contains(&p.gamma) || !(0.0..=1.0).contains(&p.epsilon) {
            return Err(HarnessError::config("gamma must lie in [0,1) and epsilon in [0,1]"));
        }
        if let Some(c) = &p.candidates {
            if c.iter().any(|&[s, a]| s >= p.length || a >= 2) {
                return Err(HarnessError::config("candidate pair outside the track"));
            }
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig, _: &AgentRegistry) -> Result<ExperimentReport> {
        let p: ReplayParams = cfg.params()?;
        let seq = replay_sequence(&p)?;
        let mut report = ExperimentReport::new(cfg);
        for &seed in &cfg.seeds {
            report.records.push(SeedRecord { seed, metrics: json!({ "backups": seq.len() }) });
        }
        let mut table = Table::new("sequence", &["step", "state", "action", "need", "gain", "evb"])
            .comment("length", p.length)
            .comment("gamma", p.gamma);
        for (i, c) in seq.iter().enumerate() {
            table.push(vec![i.into(), c.state.into(), c.action.into(), num(c.need), num(c.gain), num(c.evb)]);
        }
        if p.candidates.is_none() && p.agent_state == 0 && p.epsilon == 0.0 {
            let states: Vec<usize> = seq.iter().map(|c| c.state).collect();
            let expected: Vec<usize> = (0..p.length - 1).rev().collect();
            let ok = states.len() >= expected.len() && states[..expected.len()] == expected[..];
            report.checks.push(Check::new("reverse_chain_from_goal", ok, format!("{states:?}")));
        }
        report.aggregate = json!({ "backups": seq.len(), "states": seq.iter().map(|c| c.state).collect::<Vec<_>>() });
        report.tables.push(table);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_candidate_set_replays_nothing() {
        let p = ReplayParams { candidates: Some(vec![]), ..Default::default() };
        assert!(replay_sequence(&p).unwrap().is_empty());
    }
}

//! Two-step revaluation task.
//!
//! ```text
//!          s0
//!      a0 /  \ a1
//!       s1    s2
//!        |     |
//!       s3    s4
//!    a0/ \a1 a0/ \a1
//!    s5  s7  s6  s8
//! ```
//! After learning from `s0`, the agent is exposed to episodes that start in
//! `s3`/`s4` under a changed reward, transition or reward-at-the-unchosen-branch
//! structure, then its greedy choice at `s0` is read out.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{AgentRegistry, EnvInfo};
use crate::config::{AgentKind, AgentParams, AgentSpec, ExperimentConfig, Planner, SrTarget};
use crate::error::{HarnessError, Result};
use crate::report::{num, Check, ExperimentReport, SeedRecord, Table};
use predrep::rng::{stream, Rng};
use rand::Rng as _;

use super::{per_seed, run_episode, Episodic, Experiment};

pub const N_STATES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Reward,
    Transition,
    Policy,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::Reward => "reward",
            Condition::Transition => "transition",
            Condition::Policy => "policy",
        }
    }

    /// Second-stage state each agent type should prefer afterwards (1 or 2).
    pub fn expected(self, kind: AgentKind) -> Option<usize> {
        match kind {
            AgentKind::Mf => Some(1),
            AgentKind::Mb => Some(2),
            AgentKind::Sr | AgentKind::TcmSr => Some(if self == Condition::Reward { 2 } else { 1 }),
            AgentKind::SfGpi => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevaluationParams {
    pub learn_episodes: usize,
    /// Exposure episodes, alternating between `s3` and `s4`, with uniformly random actions.
    pub reval_episodes: usize,
    pub conditions: Vec<Condition>,
    pub high_reward: f64,
    pub low_reward: f64,
    /// Reward placed on `s8` in the policy condition.
    pub policy_reward: f64,
    /// Fraction of seeds that must show the expected choice.
    pub threshold: f64,
}

impl Default for RevaluationParams {
    fn default() -> Self {
        Self {
            learn_episodes: 200,
            reval_episodes: 40,
            conditions: vec![Condition::Reward, Condition::Transition, Condition::Policy],
            high_reward: 10.0,
            low_reward: 1.0,
            policy_reward: 20.0,
            threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStep {
    pub next: [[usize; 2]; N_STATES],
    pub reward: [f64; N_STATES],
}

impl TwoStep {
    pub fn training(p: &RevaluationParams) -> Self {
        let mut reward = [0.0; N_STATES];
        reward[5] = p.high_reward;
        reward[6] = p.low_reward;
        let mut next = [[0; 2]; N_STATES];
        next[0] = [1, 2];
        next[1] = [3, 3];
        next[2] = [4, 4];
        next[3] = [5, 7];
        next[4] = [6, 8];
        for (t, row) in next.iter_mut().enumerate().skip(5) {
            *row = [t, t];
        }
        Self { next, reward }
    }

    pub fn revalued(p: &RevaluationParams, c: Condition) -> Self {
        let mut w = Self::training(p);
        match c {
            Condition::Reward => {
                w.reward[5] = p.low_reward;
                w.reward[6] = p.high_reward;
            }
            Condition::Transition => {
                w.next[3][0] = 6;
                w.next[4][0] = 5;
            }
            Condition::Policy => w.reward[8] = p.policy_reward,
        }
        w
    }
}

impl Episodic for TwoStep {
    fn step(&self, s: usize, a: usize, _rng: &mut Rng) -> (usize, f64, bool) {
        let s2 = self.next[s][a];
        (s2, self.reward[s2], s2 >= 5)
    }
}

pub fn default_agents() -> Vec<AgentSpec> {
    let base = AgentParams { eta: Some(0.3), gamma: Some(0.9), epsilon: Some(0.2), model_rate: Some(0.3), ..Default::default() };
    vec![
        AgentSpec { kind: AgentKind::Mf, params: AgentParams { lambda: Some(0.0), model_rate: None, ..base.clone() } },
        AgentSpec { kind: AgentKind::Mb, params: AgentParams { eta: None, planner: Some(Planner::ValueIteration), ..base.clone() } },
        AgentSpec { kind: AgentKind::Sr, params: AgentParams { sr_target: Some(SrTarget::Behaviour), ..base } },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub condition: Condition,
    pub agent: AgentKind,
    /// 1 or 2: the second-stage state the greedy action at `s0` leads to.
    pub choice: usize,
    pub q: Vec<f64>,
}

pub fn run_seed(seed: u64, p: &RevaluationParams, agents: &[AgentSpec], registry: &AgentRegistry) -> Result<Vec<Outcome>> {
    let info = EnvInfo { n_states: N_STATES, n_actions: 2, seed, ..Default::default() };
    let train = TwoStep::training(p);
    let mut out = Vec::new();
    for (ci, &c) in p.conditions.iter().enumerate() {
        let world = TwoStep::revalued(p, c);
        for (ai, spec) in agents.iter().enumerate() {
            let mut rng = stream(seed, (ci * agents.len() + ai) as u64);
            let mut agent = registry.build(spec, &info)?;
            for _ in 0..p.learn_episodes {
                run_episode(agent.as_mut(), &train, 0, 10, &mut rng);
            }
            for k in 0..p.reval_episodes {
                agent.begin_episode();
                let mut s = if k % 2 == 0 { 3 } else { 4 };
                loop {
                    // exposure ignores the agent's preferences
                    let a = rng.random_range(0..2);
                    let (s2, r, done) = world.step(s, a, &mut rng);
                    agent.observe(&crate::agents::Experience { s, a, r, s2, done });
                    if done {
                        break;
                    }
                    s = s2;
                }
            }
            let q = agent.q_values(0);
            out.push(Outcome { condition: c, agent: spec.kind, choice: world.next[0][agent.greedy(0)], q });
        }
    }
    Ok(out)
}

pub struct Revaluation;

impl Experiment for Revaluation {
    fn name(&self) -> &'static str {
        "revaluation"
    }

    fn summary(&self) -> &'static str {
        "reward, transition and policy revaluation on a two-step task"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("revaluation", (0..100).collect());
        c.agents = default_agents();
        c.params = serde_json::to_value(RevaluationParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let p: RevaluationParams = cfg.params()?;
        if p.conditions.is_empty() {
            return Err(HarnessError::config("revaluation needs at least one condition"));
        }
        if !(0.0..=1.0).contains(&p.threshold) {
            return Err(HarnessError::config("threshold must lie in [0,1]"));
        }
        if cfg.environment.is_some() {
            return Err(HarnessError::config("revaluation uses its own two-step task; remove 'environment'"));
        }
        if cfg.agents.iter().any(|a| a.kind == AgentKind::SfGpi) {
            return Err(HarnessError::config("SF-GPI needs a feature library and cannot run revaluation"));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig, registry: &AgentRegistry) -> Result<ExperimentReport> {
        let p: RevaluationParams = cfg.params()?;
        let agents = if cfg.agents.is_empty() { default_agents() } else { cfg.agents.clone() };
        let results = per_seed(&cfg.seeds, |seed| run_seed(seed, &p, &agents, registry))?;
        let mut report = ExperimentReport::new(cfg);
        for (seed, outcomes) in &results {
            report.records.push(SeedRecord { seed: *seed, metrics: serde_json::to_value(outcomes)? });
        }
        let mut table = Table::new("choices", &["condition", "agent", "n_seeds", "frac_s2", "expected", "frac_expected"])
            .comment("learn_episodes", p.learn_episodes)
            .comment("reval_episodes", p.reval_episodes);
        let mut aggregate = serde_json::Map::new();
        for &c in &p.conditions {
            let mut per_agent = serde_json::Map::new();
            for spec in &agents {
                let choices: Vec<usize> = results
                    .iter()
                    .flat_map(|(_, o)| o.iter().filter(|x| x.condition == c && x.agent == spec.kind).map(|x| x.choice))
                    .collect();
                let n = choices.len() as f64;
                let frac2 = choices.iter().filter(|&&x| x == 2).count() as f64 / n;
                let expected = c.expected(spec.kind);
                let frac_expected = expected.map(|e| choices.iter().filter(|&&x| x == e).count() as f64 / n);
                per_agent.insert(spec.kind.label().into(), json!({ "frac_s2": frac2, "n": choices.len() }));
                table.push(vec![
                    c.label().into(),
                    spec.kind.label().into(),
                    choices.len().into(),
                    num(frac2),
                    expected.map_or(Value::Null, |e| format!("s{e}").into()),
                    frac_expected.map_or(Value::Null, num),
                ]);
                if let (Some(e), Some(f)) = (expected, frac_expected) {
                    report.checks.push(Check::new(
                        &format!("{}_{}_chooses_s{e}", c.label(), spec.kind.label()),
                        f >= p.threshold,
                        format!("{:.1}% of {} seeds (need {:.0}%)", 100.0 * f, choices.len(), 100.0 * p.threshold),
                    ));
                }
            }
            aggregate.insert(c.label().into(), Value::Object(per_agent));
        }
        report.aggregate = Value::Object(aggregate);
        report.tables.push(table);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revalued_worlds_differ_only_where_intended() {
        let p = RevaluationParams::default();
        let t = TwoStep::training(&p);
        let r = TwoStep::revalued(&p, Condition::Reward);
        assert_eq!(t.next, r.next);
        assert_eq!((r.reward[5], r.reward[6]), (1.0, 10.0));
        let tr = TwoStep::revalued(&p, Condition::Transition);
        assert_eq!(tr.reward, t.reward);
        assert_eq!((tr.next[3][0], tr.next[4][0]), (6, 5));
        let po = TwoStep::revalued(&p, Condition::Policy);
        assert_eq!(po.reward[8], 20.0);
        assert_eq!(po.reward[5], 10.0);
    }
}

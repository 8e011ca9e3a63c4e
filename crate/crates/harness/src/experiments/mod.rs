//! Experiments behind one trait, looked up by name.

use std::collections::BTreeMap;

use predrep::rng::Rng;
use rayon::prelude::*;

use crate::agents::{Agent, AgentRegistry, Experience};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::ExperimentReport;

pub mod basics;
pub mod multitask;
pub mod navigation;
pub mod neuro_maps;
pub mod replay;
pub mod revaluation;

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn default_config(&self) -> ExperimentConfig;

    /// Experiment-specific validation; generic checks run before this.
    fn validate(&self, cfg: &ExperimentConfig) -> Result<()>;

    fn run(&self, cfg: &ExperimentConfig, agents: &AgentRegistry) -> Result<ExperimentReport>;
}

pub struct ExperimentRegistry {
    experiments: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self { experiments: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(basics::SrIdentities));
        r.register(Box::new(basics::SfTransfer));
        r.register(Box::new(basics::Exploration));
        r.register(Box::new(neuro_maps::NeuroMaps));
        r.register(Box::new(revaluation::Revaluation));
        r.register(Box::new(multitask::Multitask));
        r.register(Box::new(navigation::Navigation));
        r.register(Box::new(replay::ReplayDemo));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.experiments.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.experiments
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| HarnessError::config(format!("unknown experiment '{name}' (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.experiments.keys().copied().collect()
    }

    /// Validates and runs `cfg`.
    pub fn run(&self, cfg: &ExperimentConfig, agents: &AgentRegistry) -> Result<ExperimentReport> {
        let e = self.get(&cfg.experiment)?;
        cfg.validate()?;
        e.validate(cfg)?;
        e.run(cfg, agents)
    }
}

/// Runs `f` for every seed in parallel; results come back sorted by seed.
pub fn per_seed<T, F>(seeds: &[u64], f: F) -> Result<Vec<(u64, T)>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let mut out: Vec<(u64, T)> = seeds.par_iter().map(|&s| f(s).map(|t| (s, t))).collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

/// Episodic environment stepped by the shared episode loop.
pub trait Episodic {
    /// `(next state, reward on arrival, episode over)`.
    fn step(&self, s: usize, a: usize, rng: &mut Rng) -> (usize, f64, bool);
}

/// Runs one learning episode; returns the number of steps taken.
pub fn run_episode(agent: &mut dyn Agent, env: &dyn Episodic, start: usize, max_steps: usize, rng: &mut Rng) -> usize {
    agent.begin_episode();
    let mut s = start;
    for t in 0..max_steps {
        let a = agent.act(s, rng);
        let (s2, r, done) = env.step(s, a, rng);
        agent.observe(&Experience { s, a, r, s2, done });
        if done {
            return t + 1;
        }
        s = s2;
    }
    max_steps
}

/// Parses the experiment's `params` block, rejecting unknown fields.
pub fn params<P: serde::de::DeserializeOwned + Default>(cfg: &ExperimentConfig) -> Result<P> {
    cfg.params()
}

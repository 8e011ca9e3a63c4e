//! Closed-form checks behind the `sr`, `sf` and `explore` subcommands.

use nalgebra::DMatrix;
use predrep::explore::{
    discover_eigenoptions, episodic_walk_with_options, landmark_explore, random_walk_to_target, visit_entropy, EigenoptionConfig,
    LandmarkExploreConfig,
};
use predrep::grid::{GridRewards, GridWorld};
use predrep::mdp::{policy_evaluation_exact, policy_transition_matrix, value_iteration};
use predrep::rng::stream;
use predrep::sf::{gpi_policy, q_from_sf, sf_closed_form, FeatureMap, TaskVector};
use predrep::sr::{sr_closed_form, value_from_sr};
use predrep::{worlds, Mdp, Policy};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::AgentRegistry;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{num, Check, ExperimentReport, SeedRecord, Table};
use crate::stats::median;

use super::{per_seed, Experiment};

fn no_agents(cfg: &ExperimentConfig, name: &str) -> Result<()> {
    if cfg.agents.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::config(format!("{name} takes no agents")))
    }
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrParams {
    /// Random MDPs checked per seed.
    pub random_mdps: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Discount for the gridworld maps.
    pub grid_gamma: f64,
    pub tolerance: f64,
}

impl Default for SrParams {
    fn default() -> Self {
        Self { random_mdps: 50, max_states: 10, max_actions: 4, gamma_min: 0.5, gamma_max: 0.95, grid_gamma: 0.99, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SrIdentityStats {
    pub max_residual: f64,
    pub max_row_sum_error: f64,
    pub max_value_error: f64,
}

pub fn sr_identities(seed: u64, p: &SrParams) -> Result<SrIdentityStats> {
    let mut r = stream(seed, 0);
    let mut out = SrIdentityStats { max_residual: 0.0, max_row_sum_error: 0.0, max_value_error: 0.0 };
    for _ in 0..p.random_mdps {
        let n = r.random_range(1..=p.max_states);
        let a = r.random_range(1..=p.max_actions);
        let gamma = r.random_range(p.gamma_min..=p.gamma_max);
        let mdp = worlds::random_mdp(&mut r, n, a, gamma)?;
        let pi = worlds::random_policy(&mut r, n, a);
        let sr = sr_closed_form(&mdp, &pi)?;
        let tp = policy_transition_matrix(&mdp, &pi)?;
        out.max_residual = out.max_residual.max(sr.bellman_residual(&tp));
        out.max_row_sum_error = out.max_row_sum_error.max(sr.row_sum_error());
        let v = value_from_sr(&sr, mdp.reward())?;
        let exact = policy_evaluation_exact(&mdp, &pi)?;
        out.max_value_error = out.max_value_error.max((v - exact).amax());
    }
    Ok(out)
}

pub struct SrIdentities;

impl SrIdentities {
    fn grid(cfg: &ExperimentConfig) -> Result<GridWorld> {
        match &cfg.environment {
            Some(env) => env.grid(),
            None => Ok(GridWorld::parse(worlds::HALLWAY_MAZE)?),
        }
    }
}

impl Experiment for SrIdentities {
    fn name(&self) -> &'static str {
        "sr"
    }

    fn summary(&self) -> &'static str {
        "closed-form SR identities and gridworld SR maps"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("sr", vec![0]);
        c.params = serde_json::to_value(SrParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        no_agents(cfg, "sr")?;
        let p: SrParams = cfg.params()?;
        if p.max_states == 0 || p.max_actions == 0 {
            return Err(HarnessError::config("max_states and max_actions must be positive"));
        }
        if !(0.0 <= p.gamma_min && p.gamma_min <= p.gamma_max && p.gamma_max < 1.0) || !(0.0..1.0).contains(&p.grid_gamma) {
            return Err(HarnessError::config("discounts must satisfy 0 <= gamma_min <= gamma_max < 1"));
        }
        Self::grid(cfg).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, _: &AgentRegistry) -> Result<ExperimentReport> {
        let p: SrParams = cfg.params()?;
        let results = per_seed(&cfg.seeds, |seed| sr_identities(seed, &p))?;
        let mut report = ExperimentReport::new(cfg);
        for (seed, s) in &results {
            report.records.push(SeedRecord { seed: *seed, metrics: serde_json::to_value(s)? });
        }
        let res = max_of(results.iter().map(|(_, s)| s.max_residual));
        let rows = max_of(results.iter().map(|(_, s)| s.max_row_sum_error));
        let val = max_of(results.iter().map(|(_, s)| s.max_value_error));
        report.checks.push(Check::new("bellman_residual", res <= p.tolerance, format!("max {res:.2e}")));
        report.checks.push(Check::new("row_sums", rows <= 1e-8, format!("max error {rows:.2e}")));
        report.checks.push(Check::new("value_equals_m_times_r", val <= p.tolerance, format!("max error {val:.2e}")));

        let g = Self::grid(cfg)?;
        let mdp = g.to_mdp(&GridRewards::hallway(p.grid_gamma))?;
        let uniform = sr_closed_form(&mdp, &Policy::uniform(mdp.n_states(), 4))?;
        let (_, best) = value_iteration(&mdp, 1e-12)?;
        let optimal = sr_closed_form(&mdp, &best)?;
        let mut aggregate = json!({ "max_residual": res, "max_row_sum_error": rows, "max_value_error": val });
        if cfg.environment.is_none() {
            let (a, nb, off) = (worlds::HALLWAY_AGENT, worlds::HALLWAY_NEIGHBOUR, worlds::HALLWAY_OFF_PATH);
            let m_nb = uniform.m[(a, nb)];
            let m_off = optimal.m[(a, off)];
            report.checks.push(Check::new("uniform_neighbour_occupancy", (m_nb - 5.97).abs() <= 0.15 * 5.97, format!("{m_nb:.3}")));
            report.checks.push(Check::new("optimal_off_path_occupancy_zero", m_off == 0.0, format!("{m_off}")));
            aggregate["hallway"] = json!({ "uniform_m_agent_neighbour": m_nb, "optimal_m_agent_off_path": m_off, "optimal_m_agent_neighbour": optimal.m[(a, nb)] });
        }
        let start = g.starts().first().copied().unwrap_or(0);
        for (name, sr) in [("uniform", &uniform), ("optimal", &optimal)] {
            let row = sr.m.row(start).transpose();
            report.tables.push(
                Table::grid(&format!("sr_{name}_from_start"), &g.layout(&row)).comment("gamma", p.grid_gamma).comment("start", start),
            );
        }
        report.aggregate = aggregate;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SfParams {
    /// GPI instances per seed.
    pub instances: usize,
    pub max_states: usize,
    pub n_actions: usize,
    pub n_features: usize,
    pub library_size: usize,
    pub gamma: f64,
    pub tolerance: f64,
}

impl Default for SfParams {
    fn default() -> Self {
        Self { instances: 50, max_states: 8, n_actions: 3, n_features: 3, library_size: 3, gamma: 0.9, tolerance: 1e-8 }
    }
}

fn optimal_policy(mdp: &Mdp, f: &FeatureMap, w: &TaskVector) -> Result<Policy> {
    let task = mdp.with_reward(f.reward(w)?)?;
    Ok(value_iteration(&task, 1e-12)?.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct GpiStats {
    /// Smallest `Q_gpi - max_i Q_i` over all instances, states and actions.
    pub min_margin: f64,
    /// Mean over instances of `V*(s) - V_gpi(s)` averaged over states.
    pub mean_gap_to_optimal: f64,
}

pub fn gpi_instances(seed: u64, p: &SfParams) -> Result<GpiStats> {
    let mut r = stream(seed, 0);
    let mut min_margin = f64::INFINITY;
    let mut gaps = Vec::new();
    for _ in 0..p.instances {
        let n = r.random_range(2..=p.max_states.max(2));
        let mdp = worlds::random_mdp(&mut r, n, p.n_actions, p.gamma)?;
        let f = FeatureMap::new(DMatrix::from_fn(n, p.n_features, |_, _| r.random_range(0.0..1.0)))?;
        let train: Vec<TaskVector> = (0..p.library_size)
            .map(|_| TaskVector::new((0..p.n_features).map(|_| r.random_range(-1.0..1.0)).collect()))
            .collect::<predrep::Result<_>>()?;
        let mut w = vec![0.0; p.n_features];
        for t in &train {
            let c: f64 = r.random_range(-1.0..1.0);
            for j in 0..p.n_features {
                w[j] += c * t.w[j];
            }
        }
        let w_new = TaskVector::new(w)?;
        let mut library = Vec::with_capacity(train.len());
        for t in &train {
            library.push(sf_closed_form(&mdp, &optimal_policy(&mdp, &f, t)?, &f)?);
        }
        let (gpi, _) = gpi_policy(&library, &w_new)?;
        let q_gpi = q_from_sf(&sf_closed_form(&mdp, &gpi, &f)?, &w_new)?;
        for sf in &library {
            let q = q_from_sf(sf, &w_new)?;
            min_margin = min_margin.min((&q_gpi - q).min());
        }
        let task = mdp.with_reward(f.reward(&w_new)?)?;
        let (v_star, _) = value_iteration(&task, 1e-12)?;
        let v_gpi = policy_evaluation_exact(&task, &gpi)?;
        gaps.push((v_star - v_gpi).mean());
    }
    Ok(GpiStats { min_margin, mean_gap_to_optimal: gaps.iter().sum::<f64>() / gaps.len().max(1) as f64 })
}

pub struct SfTransfer;

impl Experiment for SfTransfer {
    fn name(&self) -> &'static str {
        "sf"
    }

    fn summary(&self) -> &'static str {
        "GPI over successor-feature libraries on random MDPs"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("sf", vec![0]);
        c.params = serde_json::to_value(SfParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        no_agents(cfg, "sf")?;
        let p: SfParams = cfg.params()?;
        if p.n_actions == 0 || p.n_features == 0 || p.library_size == 0 || p.instances == 0 {
            return Err(HarnessError::config("sf sizes must be positive"));
        }
        if !(0.0..1.0).contains(&p.gamma) {
            return Err(HarnessError::config("gamma must lie in [0,1)"));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig, _: &AgentRegistry) -> Result<ExperimentReport> {
        let p: SfParams = cfg.params()?;
        let results = per_seed(&cfg.seeds, |seed| gpi_instances(seed, &p))?;
        let mut report = ExperimentReport::new(cfg);
        let mut table = Table::new("gpi", &["seed", "min_margin", "mean_gap_to_optimal"]).comment("instances", p.instances);
        for (seed, s) in &results {
            report.records.push(SeedRecord { seed: *seed, metrics: serde_json::to_value(s)? });
            table.push(vec![(*seed).into(), num(s.min_margin), num(s.mean_gap_to_optimal)]);
        }
        let margin = results.iter().map(|(_, s)| s.min_margin).fold(f64::INFINITY, f64::min);
        report.checks.push(Check::new("gpi_dominates_library", margin >= -p.tolerance, format!("min margin {margin:.2e}")));
        report.aggregate = json!({ "min_margin": margin, "instances": p.instances * cfg.seeds.len() });
        report.tables.push(table);
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreParams {
    pub rounds: usize,
    pub samples_per_round: usize,
    pub walk_steps: usize,
    pub episode_len: usize,
    pub room_size: usize,
    pub landmark_max_steps: usize,
}

impl Default for ExploreParams {
    fn default() -> Self {
        Self { rounds: 8, samples_per_round: 1000, walk_steps: 10_000, episode_len: 50, room_size: 6, landmark_max_steps: 5000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreStats {
    pub entropy_with_options: f64,
    pub entropy_without_options: f64,
    pub options: usize,
    pub landmark_steps: Option<usize>,
    pub random_walk_steps: Option<usize>,
    pub landmarks: usize,
}

pub fn explore_seed(seed: u64, four_rooms: &(GridWorld, Mdp), p: &ExploreParams) -> Result<ExploreStats> {
    let (g, m) = four_rooms;
    let start = g.starts().first().copied().unwrap_or(0);
    let cfg = EigenoptionConfig { n_rounds: p.rounds, samples_per_round: p.samples_per_round, start, ..Default::default() };
    let run = discover_eigenoptions(m, &cfg, &mut stream(seed, 0))?;
    let with = episodic_walk_with_options(m, &run.options, start, p.walk_steps, p.episode_len, cfg.option_cap, &mut stream(seed, 1));
    let without = episodic_walk_with_options(m, &[], start, p.walk_steps, p.episode_len, cfg.option_cap, &mut stream(seed, 2));

    let rooms = worlds::two_rooms(p.room_size)?;
    let rm = rooms.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 })?;
    let sf = sf_closed_form(&rm, &Policy::uniform(rm.n_states(), 4), &FeatureMap::one_hot(rm.n_states()))?;
    let door_col = p.room_size / 2;
    let targets: Vec<bool> = (0..rm.n_states()).map(|s| rooms.coords(s).1 > door_col).collect();
    let rstart = rooms.state_at(0, 0).ok_or_else(|| HarnessError::config("room corner is a wall"))?;
    let lcfg = LandmarkExploreConfig { max_steps: p.landmark_max_steps, ..Default::default() };
    let lm = landmark_explore(&rm, &sf, rstart, &targets, &lcfg, &mut stream(seed, 3));
    let rw = random_walk_to_target(&rm, rstart, &targets, p.landmark_max_steps, &mut stream(seed, 4));
    Ok(ExploreStats {
        entropy_with_options: visit_entropy(&with, m.n_states()),
        entropy_without_options: visit_entropy(&without, m.n_states()),
        options: run.options.len(),
        landmark_steps: lm.steps_to_target,
        random_walk_steps: rw,
        landmarks: lm.landmarks,
    })
}

pub struct Exploration;

impl Experiment for Exploration {
    fn name(&self) -> &'static str {
        "explore"
    }

    fn summary(&self) -> &'static str {
        "eigenoption discovery and landmark exploration"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("explore", (0..100).collect());
        c.params = serde_json::to_value(ExploreParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        no_agents(cfg, "explore")?;
        let p: ExploreParams = cfg.params()?;
        if p.rounds == 0 || p.samples_per_round == 0 || p.walk_steps == 0 || p.episode_len == 0 {
            return Err(HarnessError::config("explore sizes must be positive"));
        }
        if p.room_size < 4 {
            return Err(HarnessError::config("room_size must be at least 4"));
        }
        if let Some(env) = &cfg.environment {
            env.grid()?;
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig, _: &AgentRegistry) -> Result<ExperimentReport> {
        let p: ExploreParams = cfg.params()?;
        let g = match &cfg.environment {
            Some(env) => env.grid()?,
            None => GridWorld::parse(worlds::FOUR_ROOMS)?,
        };
        let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 })?;
        let world = (g, m);
        let results = per_seed(&cfg.seeds, |seed| explore_seed(seed, &world, &p))?;
        let mut report = ExperimentReport::new(cfg);
        let mut table = Table::new("explore", &["seed", "entropy_with", "entropy_without", "landmark_steps", "random_walk_steps"]);
        let cap = |x: Option<usize>| x.unwrap_or(p.landmark_max_steps + 1) as f64;
        for (seed, s) in &results {
            report.records.push(SeedRecord { seed: *seed, metrics: serde_json::to_value(s)? });
            table.push(vec![
                (*seed).into(),
                num(s.entropy_with_options),
                num(s.entropy_without_options),
                s.landmark_steps.map_or(Value::Null, Value::from),
                s.random_walk_steps.map_or(Value::Null, Value::from),
            ]);
        }
        let raised = results.iter().filter(|(_, s)| s.entropy_with_options >= s.entropy_without_options).count();
        let lm: Vec<f64> = results.iter().map(|(_, s)| cap(s.landmark_steps)).collect();
        let rw: Vec<f64> = results.iter().map(|(_, s)| cap(s.random_walk_steps)).collect();
        report.checks.push(Check::new(
            "options_raise_entropy",
            raised == results.len(),
            format!("{raised}/{} seeds", results.len()),
        ));
        report.checks.push(Check::new(
            "landmarks_beat_random_walk",
            median(&lm) < median(&rw),
            format!("median {} vs {}", median(&lm), median(&rw)),
        ));
        report.aggregate = json!({
            "seeds_with_higher_entropy": raised,
            "median_landmark_steps": median(&lm),
            "median_random_walk_steps": median(&rw),
        });
        report.tables.push(table);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold_on_one_seed() {
        let s = sr_identities(3, &SrParams { random_mdps: 5, ..Default::default() }).unwrap();
        assert!(s.max_residual < 1e-10 && s.max_value_error < 1e-10);
        let g = gpi_instances(3, &SfParams { instances: 5, ..Default::default() }).unwrap();
        assert!(g.min_margin >= -1e-8);
    }
}

//! Detour navigation: agents learn a grid, then a barrier appears on the learned route.

use std::collections::VecDeque;

use predrep::grid::GridWorld;
use predrep::rng::{stream, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{Agent, AgentRegistry, EnvInfo, Experience};
use crate::config::{AgentKind, AgentParams, AgentSpec, ExperimentConfig, Planner, SrTarget};
use crate::error::{HarnessError, Result};
use crate::report::{num, Check, ExperimentReport, SeedRecord, Table};
use crate::stats::{median, wilcoxon_signed_rank};

use super::{per_seed, run_episode, Episodic, Experiment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigationParams {
    /// Used when no environment is given.
    pub width: usize,
    pub height: usize,
    pub train_episodes: usize,
    pub train_max_steps: usize,
    pub barrier_configs: usize,
    pub barrier_length: usize,
    /// Explicit barriers as `[row, col]` cell lists; replaces the generated set.
    pub barriers: Option<Vec<Vec<[usize; 2]>>>,
    /// Train with the barrier in place and test with it removed.
    pub shortcut: bool,
    /// Random-action episodes started from the opened cells before a shortcut test.
    pub exposure_episodes: usize,
    pub exposure_steps: usize,
    pub trials: usize,
    pub trial_max_steps: usize,
    pub goal_reward: f64,
    /// Significance level for the paired AUC comparisons.
    pub alpha: f64,
}

impl Default for NavigationParams {
    fn default() -> Self {
        Self {
            width: 10,
            height: 10,
            train_episodes: 300,
            train_max_steps: 300,
            barrier_configs: 10,
            barrier_length: 6,
            barriers: None,
            shortcut: false,
            exposure_episodes: 20,
            exposure_steps: 4,
            trials: 10,
            trial_max_steps: 1000,
            goal_reward: 1.0,
            alpha: 0.05,
        }
    }
}

/// Grid with a fixed goal; moves into blocked cells leave the agent in place.
/// Without `S`/`G` cells the start is mid-bottom and the goal mid-top.
#[derive(Debug, Clone)]
pub struct Maze {
    pub grid: GridWorld,
    pub start: usize,
    pub goal: usize,
    pub blocked: Vec<bool>,
    pub goal_reward: f64,
}

impl Maze {
    pub fn new(grid: GridWorld, goal_reward: f64) -> Result<Self> {
        let n = grid.n_states();
        let (w, h) = (grid.width(), grid.height());
        let start = grid.starts().first().copied().or_else(|| grid.state_at(h - 1, (w - 1) / 2));
        let goal = grid.goals().first().copied().or_else(|| grid.state_at(0, w / 2));
        match (start, goal) {
            (Some(start), Some(goal)) if start != goal => {
                Ok(Self { grid, start, goal, blocked: vec![false; n], goal_reward })
            }
            _ => Err(HarnessError::config("navigation grid needs distinct start and goal cells")),
        }
    }

    pub fn with_barrier(&self, cells: &[usize]) -> Self {
        let mut m = self.clone();
        for &s in cells {
            m.blocked[s] = true;
        }
        m
    }

    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let n = self.grid.n_states();
        let mut dist = vec![None; n];
        dist[self.goal] = Some(0);
        let mut q = VecDeque::from([self.goal]);
        while let Some(u) = q.pop_front() {
            for v in self.grid.neighbours(u) {
                if dist[v].is_none() && !self.blocked[v] {
                    dist[v] = Some(dist[u].unwrap_or(0) + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }
}

impl Episodic for Maze {
    fn step(&self, s: usize, a: usize, _rng: &mut Rng) -> (usize, f64, bool) {
        let mut s2 = self.grid.move_from(s, a);
        if self.blocked[s2] {
            s2 = s;
        }
        if s2 == self.goal {
            (s2, self.goal_reward, true)
        } else {
            (s2, 0.0, false)
        }
    }
}

/// Barrier `k`: a horizontal wall of `length` cells across the start-goal
/// line, on row `2 + k / 2` (wrapping) and shifted one column left or right
/// depending on the parity of `k`. Start and goal are never walled and the
/// goal always stays reachable.
pub fn barrier(maze: &Maze, k: usize, length: usize) -> Vec<usize> {
    let (w, h) = (maze.grid.width(), maze.grid.height());
    if h < 4 || w < 3 {
        return Vec::new();
    }
    let row = 2 + (k / 2) % (h - 3);
    let length = length.min(w - 1);
    let centre = maze.grid.coords(maze.start).1 as isize;
    let shift: isize = if k.is_multiple_of(2) { -1 } else { 1 };
    let first = (centre - length as isize / 2 + shift).clamp(0, (w - length) as isize) as usize;
    let mut cells: Vec<usize> = (first..first + length)
        .filter_map(|c| maze.grid.state_at(row, c))
        .filter(|&s| s != maze.start && s != maze.goal)
        .collect();
    while !cells.is_empty() && maze.with_barrier(&cells).distances_to_goal()[maze.start].is_none() {
        cells.pop();
    }
    cells
}

/// Barrier cell sets for the run, generated or taken from the params.
pub fn barrier_set(maze: &Maze, p: &NavigationParams) -> Result<Vec<Vec<usize>>> {
    match &p.barriers {
        None => Ok((0..p.barrier_configs).map(|k| barrier(maze, k, p.barrier_length)).collect()),
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(k, cells)| {
                let states = cells
                    .iter()
                    .map(|&[r, c]| {
                        maze.grid
                            .state_at(r, c)
                            .filter(|&s| s != maze.start && s != maze.goal)
                            .ok_or_else(|| HarnessError::config(format!("barrier {k}: cell ({r},{c}) is not an open non-terminal cell")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if maze.with_barrier(&states).distances_to_goal()[maze.start].is_none() {
                    return Err(HarnessError::config(format!("barrier {k} makes the goal unreachable")));
                }
                Ok(states)
            })
            .collect(),
    }
}

pub fn default_agents() -> Vec<AgentSpec> {
    let base = AgentParams { gamma: Some(0.95), epsilon: Some(0.1), ..Default::default() };
    vec![
        AgentSpec { kind: AgentKind::Mf, params: AgentParams { eta: Some(0.1), lambda: Some(0.8), ..base.clone() } },
        AgentSpec { kind: AgentKind::Mb, params: AgentParams { model_rate: Some(1.0), planner: Some(Planner::Search), ..base.clone() } },
        AgentSpec {
            kind: AgentKind::Sr,
            params: AgentParams { eta: Some(0.3), model_rate: Some(1.0), sr_target: Some(SrTarget::Behaviour), replay: Some(10), ..base },
        },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub config: usize,
    pub agent: AgentKind,
    pub steps: Vec<usize>,
}

impl Run {
    pub fn first(&self) -> usize {
        self.steps[0]
    }

    pub fn auc(&self) -> usize {
        self.steps.iter().sum()
    }
}

pub fn run_seed(
    seed: u64,
    maze: &Maze,
    barriers: &[Vec<usize>],
    p: &NavigationParams,
    agents: &[AgentSpec],
    registry: &AgentRegistry,
) -> Result<Vec<Run>> {
    let n = maze.grid.n_states();
    let coords = (0..n).map(|s| maze.grid.coords(s)).collect();
    let info = EnvInfo { n_states: n, n_actions: 4, coords: Some(coords), seed, ..Default::default() };
    let starts: Vec<usize> = (0..n).filter(|&s| s != maze.goal).collect();
    let mut out = Vec::new();
    for (ai, spec) in agents.iter().enumerate() {
        let mut rng = stream(seed, ai as u64);
        let open = registry.build(spec, &info)?;
        let train = |world: &Maze, rng: &mut Rng| {
            let mut agent = open.clone();
            for _ in 0..p.train_episodes {
                let s0 = starts[rng.random_range(0..starts.len())];
                run_episode(agent.as_mut(), world, s0, p.train_max_steps, rng);
            }
            agent
        };
        let trained_open = if p.shortcut { None } else { Some(train(maze, &mut rng)) };
        for (k, cells) in barriers.iter().enumerate() {
            let walled = maze.with_barrier(cells);
            let mut trial_rng = stream(seed, 1000 + (ai * barriers.len() + k) as u64);
            let (mut agent, test): (Box<dyn Agent>, &Maze) = match &trained_open {
                Some(a) => (a.clone(), &walled),
                None => {
                    let mut agent = train(&walled, &mut stream(seed, 500 + (ai * barriers.len() + k) as u64));
                    for e in 0..p.exposure_episodes {
                        agent.begin_episode();
                        let mut s = cells[e % cells.len()];
                        for _ in 0..p.exposure_steps {
                            let a = trial_rng.random_range(0..4);
                            let (s2, r, done) = maze.step(s, a, &mut trial_rng);
                            agent.observe(&Experience { s, a, r, s2, done });
                            if done {
                                break;
                            }
                            s = s2;
                        }
                    }
                    (agent, maze)
                }
            };
            let steps = (0..p.trials)
                .map(|_| run_episode(agent.as_mut(), test, maze.start, p.trial_max_steps, &mut trial_rng))
                .collect();
            out.push(Run { config: k, agent: spec.kind, steps });
        }
    }
    Ok(out)
}

pub struct Navigation;

impl Navigation {
    fn maze(cfg: &ExperimentConfig, p: &NavigationParams) -> Result<Maze> {
        let grid = match &cfg.environment {
            Some(env) => env.grid()?,
            None => GridWorld::open(p.width, p.height),
        };
        Maze::new(grid, p.goal_reward)
    }
}

impl Experiment for Navigation {
    fn name(&self) -> &'static str {
        "navigation"
    }

    fn summary(&self) -> &'static str {
        "detours around new barriers after learning a grid"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("navigation", (0..20).collect());
        c.agents = default_agents();
        c.params = serde_json::to_value(NavigationParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let p: NavigationParams = cfg.params()?;
        if p.trials == 0 || p.barrier_configs == 0 || p.trial_max_steps == 0 {
            return Err(HarnessError::config("trials, barrier_configs and trial_max_steps must be positive"));
        }
        if cfg.agents.iter().any(|a| a.kind == AgentKind::SfGpi) {
            return Err(HarnessError::config("SF-GPI needs a feature library and cannot run navigation"));
        }
        let maze = Self::maze(cfg, &p)?;
        if maze.distances_to_goal()[maze.start].is_none() {
            return Err(HarnessError::config("goal unreachable from start"));
        }
        if p.barriers.as_ref().is_some_and(|b| b.is_empty()) {
            return Err(HarnessError::config("barriers must list at least one configuration"));
        }
        barrier_set(&maze, &p).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, registry: &AgentRegistry) -> Result<ExperimentReport> {
        let p: NavigationParams = cfg.params()?;
        let maze = Self::maze(cfg, &p)?;
        let agents = if cfg.agents.is_empty() { default_agents() } else { cfg.agents.clone() };
        let barriers = barrier_set(&maze, &p)?;
        let results = per_seed(&cfg.seeds, |seed| run_seed(seed, &maze, &barriers, &p, &agents, registry))?;

        let mut report = ExperimentReport::new(cfg);
        let mut runs = Table::new("runs", &["seed", "config", "agent", "first_trial_steps", "auc"])
            .comment("grid", format!("{}x{}", maze.grid.width(), maze.grid.height()))
            .comment("trials", p.trials)
            .comment("mode", if p.shortcut { "shortcut" } else { "detour" });
        for (seed, rs) in &results {
            report.records.push(SeedRecord { seed: *seed, metrics: serde_json::to_value(rs)? });
            for r in rs {
                runs.push(vec![(*seed).into(), r.config.into(), r.agent.label().into(), r.first().into(), r.auc().into()]);
            }
        }

        let of = |kind: AgentKind| -> Vec<&Run> { results.iter().flat_map(|(_, rs)| rs.iter().filter(move |r| r.agent == kind)).collect() };
        let mut curves = Table::new("learning_curves", &["agent", "trial", "median_steps"]);
        let mut aggregate = serde_json::Map::new();
        let mut first_median = std::collections::BTreeMap::new();
        let mut aucs = std::collections::BTreeMap::new();
        for spec in &agents {
            let rs = of(spec.kind);
            let first: Vec<f64> = rs.iter().map(|r| r.first() as f64).collect();
            let auc: Vec<f64> = rs.iter().map(|r| r.auc() as f64).collect();
            for t in 0..p.trials {
                let col: Vec<f64> = rs.iter().map(|r| r.steps[t] as f64).collect();
                curves.push(vec![spec.kind.label().into(), t.into(), num(median(&col))]);
            }
            aggregate.insert(
                spec.kind.label().into(),
                json!({ "median_first_trial_steps": median(&first), "median_auc": median(&auc), "runs": rs.len() }),
            );
            first_median.insert(spec.kind, median(&first));
            aucs.insert(spec.kind, auc);
        }

        let (mb, sr, mf) = (AgentKind::Mb, AgentKind::Sr, AgentKind::Mf);
        if p.shortcut {
            if let (Some(&fb), Some(&fs)) = (first_median.get(&mb), first_median.get(&sr)) {
                report.checks.push(Check::new("shortcut_first_trial_mb_le_sr", fb <= fs, format!("MB {fb}, SR {fs}")));
            }
            aggregate.insert("mode".into(), "shortcut".into());
            report.aggregate = Value::Object(aggregate);
            report.tables.push(runs);
            report.tables.push(curves);
            return Ok(report);
        }
        if let (Some(&fb), Some(&fs), Some(&ff)) = (first_median.get(&mb), first_median.get(&sr), first_median.get(&mf)) {
            report.checks.push(Check::new("first_trial_median_mb_le_sr_le_mf", fb <= fs && fs <= ff, format!("MB {fb}, SR {fs}, MF {ff}")));
        }
        let mut tests = serde_json::Map::new();
        for (lo, hi) in [(mb, sr), (sr, mf)] {
            if let (Some(x), Some(y)) = (aucs.get(&lo), aucs.get(&hi)) {
                let w = wilcoxon_signed_rank(x, y);
                let name = format!("auc_{}_lt_{}", lo.label(), hi.label());
                let ok = median(x) < median(y) && w.p_less < p.alpha;
                report.checks.push(Check::new(
                    &name,
                    ok,
                    format!("median {} vs {}, W+={}, n={}, p={:.3e}", median(x), median(y), w.w_plus, w.n, w.p_less),
                ));
                tests.insert(name, json!({ "w_plus": w.w_plus, "n": w.n, "p": w.p_less }));
            }
        }
        aggregate.insert("wilcoxon".into(), Value::Object(tests));
        report.aggregate = Value::Object(aggregate);
        report.tables.push(runs);
        report.tables.push(curves);
        Ok(report)
    }
}

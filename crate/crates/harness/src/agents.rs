//! Tabular agents behind one trait, and the registry that builds them from specs.

use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::cmp::Reverse;

use nalgebra::{DMatrix, DVector};
use predrep::rng::Rng;
use predrep::sf::{FeatureMap, SfTensor, TaskVector};
use predrep::sr::sr_td_step;
use predrep::tcm::ContextVector;
use rand::Rng as _;

use crate::config::{AgentKind, AgentParams, AgentSpec, Planner, SrTarget};
use crate::error::{HarnessError, Result};

const TIE: f64 = 1e-12;

/// One observed transition; `r` is earned on arriving in `s2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s2: usize,
    pub done: bool,
}

/// What an agent may know about its world before acting in it.
#[derive(Debug, Clone, Default)]
pub struct EnvInfo {
    pub n_states: usize,
    pub n_actions: usize,
    /// `(row, col)` per state, for grid heuristics.
    pub coords: Option<Vec<(usize, usize)>>,
    pub features: Option<FeatureMap>,
    pub library: Vec<SfTensor>,
    pub task: Option<TaskVector>,
    /// Seeds agents that draw random numbers internally (replay).
    pub seed: u64,
}

pub trait Agent: Send + Sync {
    fn kind(&self) -> AgentKind;

    fn q_values(&self, s: usize) -> Vec<f64>;

    fn epsilon(&self) -> f64;

    fn observe(&mut self, e: &Experience);

    fn begin_episode(&mut self) {}

    /// Called with the action about to be taken; `greedy` tells whether it was a greedy pick.
    fn committed(&mut self, _greedy: bool) {}

    fn clone_box(&self) -> Box<dyn Agent>;

    /// Lowest-index argmax of the action values.
    fn greedy(&self, s: usize) -> usize {
        argmax(&self.q_values(s))
    }

    /// Epsilon-greedy with random tie-breaking among the greedy actions.
    fn act(&mut self, s: usize, rng: &mut Rng) -> usize {
        let q = self.q_values(s);
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..q.len()).filter(|&a| q[a] >= best - TIE).collect();
        let a = if self.epsilon() > 0.0 && rng.random::<f64>() < self.epsilon() {
            rng.random_range(0..q.len())
        } else {
            ties[rng.random_range(0..ties.len())]
        };
        self.committed(ties.contains(&a));
        a
    }
}

impl Clone for Box<dyn Agent> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..q.len() {
        if q[a] > q[best] + TIE {
            best = a;
        }
    }
    best
}

/// Epsilon-greedy action distribution with the greedy mass split over ties.
fn eps_greedy_probs(q: &[f64], eps: f64) -> Vec<f64> {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = q.iter().filter(|&&x| x >= best - TIE).count() as f64;
    let n = q.len() as f64;
    q.iter().map(|&x| eps / n + if x >= best - TIE { (1.0 - eps) / k } else { 0.0 }).collect()
}

/// Watkins Q(lambda); `lambda = 0` is one-step Q-learning.
#[derive(Debug, Clone)]
pub struct QLambda {
    q: DMatrix<f64>,
    trace: DMatrix<f64>,
    eta: f64,
    gamma: f64,
    lambda: f64,
    epsilon: f64,
}

impl QLambda {
    pub fn new(n_states: usize, n_actions: usize, eta: f64, gamma: f64, lambda: f64, epsilon: f64) -> Self {
        Self {
            q: DMatrix::zeros(n_states, n_actions),
            trace: DMatrix::zeros(n_states, n_actions),
            eta,
            gamma,
            lambda,
            epsilon,
        }
    }
}

impl Agent for QLambda {
    fn kind(&self) -> AgentKind {
        AgentKind::Mf
    }

    fn q_values(&self, s: usize) -> Vec<f64> {
        self.q.row(s).iter().cloned().collect()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn begin_episode(&mut self) {
        self.trace.fill(0.0);
    }

    fn committed(&mut self, greedy: bool) {
        if !greedy {
            self.trace.fill(0.0);
        }
    }

    fn observe(&mut self, e: &Experience) {
        let next = if e.done { 0.0 } else { self.q.row(e.s2).max() };
        let delta = e.r + self.gamma * next - self.q[(e.s, e.a)];
        if self.lambda == 0.0 {
            self.q[(e.s, e.a)] += self.eta * delta;
            return;
        }
        for b in 0..self.trace.ncols() {
            self.trace[(e.s, b)] = 0.0;
        }
        self.trace[(e.s, e.a)] = 1.0;
        self.q.zip_apply(&self.trace, |q, z| *q += self.eta * delta * z);
        self.trace *= self.gamma * self.lambda;
        if e.done {
            self.trace.fill(0.0);
        }
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

/// Recency-weighted transition and reward model shared by the model-based agents.
#[derive(Debug, Clone)]
pub struct LearnedModel {
    n_states: usize,
    n_actions: usize,
    rate: f64,
    /// Row `(s * n_actions + a)` is the estimated next-state distribution.
    pub t: DMatrix<f64>,
    pub seen: Vec<bool>,
    pub r: DVector<f64>,
    pub r_seen: Vec<bool>,
    pub terminal: Vec<bool>,
    succ: Vec<Option<usize>>,
}

impl LearnedModel {
    pub fn new(n_states: usize, n_actions: usize, rate: f64) -> Self {
        Self {
            n_states,
            n_actions,
            rate,
            t: DMatrix::zeros(n_states * n_actions, n_states),
            seen: vec![false; n_states * n_actions],
            r: DVector::zeros(n_states),
            r_seen: vec![false; n_states],
            terminal: vec![false; n_states],
            succ: vec![None; n_states * n_actions],
        }
    }

    pub fn update(&mut self, e: &Experience) {
        let row = e.s * self.n_actions + e.a;
        if self.seen[row] {
            let keep = 1.0 - self.rate;
            for j in 0..self.n_states {
                self.t[(row, j)] *= keep;
            }
            self.t[(row, e.s2)] += self.rate;
        } else {
            self.t[(row, e.s2)] = 1.0;
            self.seen[row] = true;
        }
        let mut best = 0;
        for j in 1..self.n_states {
            if self.t[(row, j)] > self.t[(row, best)] {
                best = j;
            }
        }
        self.succ[row] = Some(best);
        if self.r_seen[e.s2] {
            self.r[e.s2] += self.rate * (e.r - self.r[e.s2]);
        } else {
            self.r[e.s2] = e.r;
            self.r_seen[e.s2] = true;
        }
        if e.done {
            self.terminal[e.s2] = true;
        }
    }

    /// Most likely successor of a seen pair.
    pub fn successor(&self, s: usize, a: usize) -> Option<usize> {
        self.succ[s * self.n_actions + a]
    }

    /// `sum_s' T(s, a, s') (R(s') + gamma V(s'))` with `V = 0` beyond terminals; unseen pairs score 0.
    pub fn backup(&self, s: usize, a: usize, gamma: f64, v: &DVector<f64>) -> f64 {
        let row = s * self.n_actions + a;
        if !self.seen[row] {
            return 0.0;
        }
        (0..self.n_states)
            .filter(|&j| self.t[(row, j)] > 0.0)
            .map(|j| self.t[(row, j)] * (self.r[j] + if self.terminal[j] { 0.0 } else { gamma * v[j] }))
            .sum()
    }

    pub fn value_iteration(&self, gamma: f64, tol: f64) -> DMatrix<f64> {
        let (n, na) = (self.n_states, self.n_actions);
        let mut v = DVector::zeros(n);
        let mut q = DMatrix::zeros(n, na);
        for _ in 0..100_000 {
            for s in 0..n {
                for a in 0..na {
                    q[(s, a)] = self.backup(s, a, gamma, &v);
                }
            }
            let v2 = DVector::from_fn(n, |s, _| q.row(s).max());
            let change = (&v2 - &v).amax();
            v = v2;
            if change < tol {
                break;
            }
        }
        q
    }

    fn goals(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.terminal[s] && self.r[s] > 0.0).collect()
    }

    /// Steps to the nearest known rewarding terminal along most likely successors.
    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.n_states];
        for s in 0..self.n_states {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.n_actions {
                if let Some(s2) = self.successor(s, a) {
                    preds[s2].push(s);
                }
            }
        }
        let mut dist = vec![None; self.n_states];
        let mut queue = VecDeque::new();
        for g in self.goals() {
            dist[g] = Some(0);
            queue.push_back(g);
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &p in &preds[u] {
                if dist[p].is_none() {
                    dist[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// A* from `from` to the nearest goal with a Manhattan heuristic.
    pub fn astar(&self, from: usize, coords: &[(usize, usize)]) -> Option<usize> {
        let goals = self.goals();
        if goals.is_empty() {
            return None;
        }
        let h = |s: usize| -> usize {
            goals
                .iter()
                .map(|&g| coords[s].0.abs_diff(coords[g].0) + coords[s].1.abs_diff(coords[g].1))
                .min()
                .unwrap_or(0)
        };
        let mut best = vec![usize::MAX; self.n_states];
        let mut open = BinaryHeap::new();
        best[from] = 0;
        open.push(Reverse((h(from), from)));
        while let Some(Reverse((f, u))) = open.pop() {
            let g = best[u];
            if f > g + h(u) {
                continue;
            }
            if self.terminal[u] && self.r[u] > 0.0 {
                return Some(g);
            }
            if self.terminal[u] {
                continue;
            }
            for a in 0..self.n_actions {
                if let Some(v) = self.successor(u, a) {
                    if g + 1 < best[v] {
                        best[v] = g + 1;
                        open.push(Reverse((g + 1 + h(v), v)));
                    }
                }
            }
        }
        None
    }
}

/// Learns `T` and `R`, then plans: value iteration, or shortest paths to the goal.
#[derive(Debug, Clone)]
pub struct ModelBased {
    model: LearnedModel,
    gamma: f64,
    epsilon: f64,
    planner: Planner,
    coords: Option<Vec<(usize, usize)>>,
    q: DMatrix<f64>,
}

impl ModelBased {
    pub fn new(info: &EnvInfo, gamma: f64, epsilon: f64, model_rate: f64, planner: Planner) -> Result<Self> {
        if planner == Planner::SearchManhattan && info.coords.is_none() {
            return Err(HarnessError::config("Manhattan search needs a grid environment"));
        }
        Ok(Self {
            model: LearnedModel::new(info.n_states, info.n_actions, model_rate),
            gamma,
            epsilon,
            planner,
            coords: info.coords.clone(),
            q: DMatrix::zeros(info.n_states, info.n_actions),
        })
    }

    pub fn model(&self) -> &LearnedModel {
        &self.model
    }

    fn search_q(&self, s: usize) -> Vec<f64> {
        let na = self.model.n_actions;
        let unknown = -((self.model.n_states + 2) as f64);
        let score = |d: Option<usize>| d.map_or(unknown, |d| -(1.0 + d as f64));
        match (self.planner, &self.coords) {
            (Planner::SearchManhattan, Some(coords)) => (0..na)
                .map(|a| score(self.model.successor(s, a).and_then(|s2| self.model.astar(s2, coords))))
                .collect(),
            _ => {
                let dist = self.model.distances_to_goal();
                (0..na).map(|a| score(self.model.successor(s, a).and_then(|s2| dist[s2]))).collect()
            }
        }
    }
}

impl Agent for ModelBased {
    fn kind(&self) -> AgentKind {
        AgentKind::Mb
    }

    fn q_values(&self, s: usize) -> Vec<f64> {
        match self.planner {
            Planner::ValueIteration => self.q.row(s).iter().cloned().collect(),
            Planner::Search | Planner::SearchManhattan => self.search_q(s),
        }
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn observe(&mut self, e: &Experience) {
        self.model.update(e);
        if self.planner == Planner::ValueIteration {
            self.q = self.model.value_iteration(self.gamma, 1e-10);
        }
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

/// Action-level SR `H(s, a, s')` learned by TD, combined with a learned reward vector.
///
/// With `replay > 0`, every real step is followed by that many TD updates on
/// transitions drawn uniformly from memory (the last outcome of each seen pair).
#[derive(Debug, Clone)]
pub struct SrAgent {
    h: DMatrix<f64>,
    r: DVector<f64>,
    n_actions: usize,
    eta: f64,
    gamma: f64,
    epsilon: f64,
    reward_rate: f64,
    target: SrTarget,
    replay: usize,
    memory: Vec<Option<(usize, bool)>>,
    seen: Vec<usize>,
    rng: Rng,
}

impl SrAgent {
    pub fn new(n_states: usize, n_actions: usize, eta: f64, gamma: f64, epsilon: f64, reward_rate: f64, target: SrTarget) -> Self {
        Self {
            h: DMatrix::zeros(n_states * n_actions, n_states),
            r: DVector::zeros(n_states),
            n_actions,
            eta,
            gamma,
            epsilon,
            reward_rate,
            target,
            replay: 0,
            memory: vec![None; n_states * n_actions],
            seen: Vec::new(),
            rng: predrep::rng::seeded(0),
        }
    }

    pub fn with_replay(mut self, steps: usize, seed: u64) -> Self {
        self.replay = steps;
        self.rng = predrep::rng::stream(seed, 0x5eed);
        self
    }

    fn td_update(&mut self, s: usize, a: usize, s2: usize, done: bool) {
        let n = self.r.len();
        let na = self.n_actions;
        let mut target = DVector::zeros(n);
        target[s2] = 1.0;
        if !done {
            let probs = match self.target {
                SrTarget::Uniform => vec![1.0 / na as f64; na],
                SrTarget::Behaviour => eps_greedy_probs(&self.q_values(s2), self.epsilon),
            };
            for (b, p) in probs.iter().enumerate() {
                if *p > 0.0 {
                    target += self.h.row(s2 * na + b).transpose() * (self.gamma * p);
                }
            }
        }
        let row = s * na + a;
        for j in 0..n {
            self.h[(row, j)] += self.eta * (target[j] - self.h[(row, j)]);
        }
    }

    pub fn occupancy(&self, s: usize, a: usize) -> DVector<f64> {
        self.h.row(s * self.n_actions + a).transpose()
    }

    pub fn reward(&self) -> &DVector<f64> {
        &self.r
    }
}

impl Agent for SrAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Sr
    }

    fn q_values(&self, s: usize) -> Vec<f64> {
        (0..self.n_actions).map(|a| self.h.row(s * self.n_actions + a).transpose().dot(&self.r)).collect()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn observe(&mut self, e: &Experience) {
        self.r[e.s2] += self.reward_rate * (e.r - self.r[e.s2]);
        self.td_update(e.s, e.a, e.s2, e.done);
        if self.replay == 0 {
            return;
        }
        let row = e.s * self.n_actions + e.a;
        if self.memory[row].is_none() {
            self.seen.push(row);
        }
        self.memory[row] = Some((e.s2, e.done));
        for _ in 0..self.replay {
            let row = self.seen[self.rng.random_range(0..self.seen.len())];
            if let Some((s2, done)) = self.memory[row] {
                self.td_update(row / self.n_actions, row % self.n_actions, s2, done);
            }
        }
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

/// State SR learned with the drifting-context trace, plus a one-step model for action values.
#[derive(Debug, Clone)]
pub struct TcmSrAgent {
    m: DMatrix<f64>,
    context: ContextVector,
    model: LearnedModel,
    eta: f64,
    gamma: f64,
    epsilon: f64,
}

impl TcmSrAgent {
    pub fn new(n_states: usize, n_actions: usize, eta: f64, gamma: f64, epsilon: f64, omega: f64, model_rate: f64) -> Result<Self> {
        Ok(Self {
            m: DMatrix::zeros(n_states, n_states),
            context: ContextVector::new(n_states, omega)?,
            model: LearnedModel::new(n_states, n_actions, model_rate),
            eta,
            gamma,
            epsilon,
        })
    }

    pub fn sr(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl Agent for TcmSrAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::TcmSr
    }

    fn q_values(&self, s: usize) -> Vec<f64> {
        let v = &self.m * &self.model.r;
        (0..self.model.n_actions).map(|a| self.model.backup(s, a, self.gamma, &v)).collect()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn begin_episode(&mut self) {
        self.context.reset();
    }

    fn observe(&mut self, e: &Experience) {
        self.model.update(e);
        sr_td_step(&mut self.m, e.s, e.s2, self.eta, self.gamma, &mut self.context).expect("shapes fixed at construction");
        if e.done {
            self.context.reset();
        }
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

/// GPI over a fixed SF library; the task vector is refined by LMS on observed rewards.
#[derive(Debug, Clone)]
pub struct SfGpiAgent {
    library: Vec<SfTensor>,
    features: Option<FeatureMap>,
    w: DVector<f64>,
    eta: f64,
    epsilon: f64,
}

impl SfGpiAgent {
    pub fn new(library: Vec<SfTensor>, features: Option<FeatureMap>, w: DVector<f64>, eta: f64, epsilon: f64) -> Result<Self> {
        let first = library.first().ok_or_else(|| HarnessError::config("SF-GPI agent needs a non-empty library"))?;
        if first.n_features() != w.len() {
            return Err(HarnessError::config("task vector length differs from the library features"));
        }
        Ok(Self { library, features, w, eta, epsilon })
    }

    /// Library index whose value wins at `(s, greedy action)`.
    pub fn winner(&self, s: usize) -> usize {
        let a = self.greedy(s);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, sf) in self.library.iter().enumerate() {
            let q = sf.psi[a].row(s).transpose().dot(&self.w);
            if q > best.1 + TIE {
                best = (i, q);
            }
        }
        best.0
    }
}

impl Agent for SfGpiAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::SfGpi
    }

    fn q_values(&self, s: usize) -> Vec<f64> {
        let na = self.library[0].n_actions();
        (0..na)
            .map(|a| {
                self.library
                    .iter()
                    .map(|sf| sf.psi[a].row(s).transpose().dot(&self.w))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn observe(&mut self, e: &Experience) {
        if let Some(f) = &self.features {
            let phi = f.row(e.s2);
            let err = e.r - phi.dot(&self.w);
            self.w += phi * (self.eta * err);
        }
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

pub type AgentBuilder = fn(&AgentParams, &EnvInfo) -> Result<Box<dyn Agent>>;

/// Maps agent kinds to constructors. Experiments only see `Box<dyn Agent>`.
pub struct AgentRegistry {
    builders: BTreeMap<AgentKind, AgentBuilder>,
}

impl AgentRegistry {
    pub fn empty() -> Self {
        Self { builders: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(AgentKind::Mf, build_mf);
        r.register(AgentKind::Mb, build_mb);
        r.register(AgentKind::Sr, build_sr);
        r.register(AgentKind::TcmSr, build_tcm_sr);
        r.register(AgentKind::SfGpi, build_sf_gpi);
        r
    }

    pub fn register(&mut self, kind: AgentKind, builder: AgentBuilder) {
        self.builders.insert(kind, builder);
    }

    pub fn kinds(&self) -> Vec<AgentKind> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, spec: &AgentSpec, info: &EnvInfo) -> Result<Box<dyn Agent>> {
        spec.params.validate()?;
        let builder = self
            .builders
            .get(&spec.kind)
            .ok_or_else(|| HarnessError::config(format!("no agent registered for {}", spec.kind.label())))?;
        builder(&spec.params, info)
    }
}

fn build_mf(p: &AgentParams, info: &EnvInfo) -> Result<Box<dyn Agent>> {
    Ok(Box::new(QLambda::new(
        info.n_states,
        info.n_actions,
        p.eta.unwrap_or(0.1),
        p.gamma.unwrap_or(0.95),
        p.lambda.unwrap_or(0.0),
        p.epsilon.unwrap_or(0.1),
    )))
}

fn build_mb(p: &AgentParams, info: &EnvInfo) -> Result<Box<dyn Agent>> {
    Ok(Box::new(ModelBased::new(
        info,
        p.gamma.unwrap_or(0.95),
        p.epsilon.unwrap_or(0.1),
        p.model_rate.unwrap_or(1.0),
        p.planner.unwrap_or(Planner::ValueIteration),
    )?))
}

fn build_sr(p: &AgentParams, info: &EnvInfo) -> Result<Box<dyn Agent>> {
    Ok(Box::new(SrAgent::new(
        info.n_states,
        info.n_actions,
        p.eta.unwrap_or(0.1),
        p.gamma.unwrap_or(0.95),
        p.epsilon.unwrap_or(0.1),
        p.model_rate.unwrap_or(1.0),
        p.sr_target.unwrap_or(SrTarget::Behaviour),
    )
    .with_replay(p.replay.unwrap_or(0), info.seed)))
}

fn build_tcm_sr(p: &AgentParams, info: &EnvInfo) -> Result<Box<dyn Agent>> {
    Ok(Box::new(TcmSrAgent::new(
        info.n_states,
        info.n_actions,
        p.eta.unwrap_or(0.1),
        p.gamma.unwrap_or(0.95),
        p.epsilon.unwrap_or(0.1),
        p.omega.unwrap_or(1.0),
        p.model_rate.unwrap_or(1.0),
    )?))
}

fn build_sf_gpi(p: &AgentParams, info: &EnvInfo) -> Result<Box<dyn Agent>> {
    let w = match &info.task {
        Some(t) => t.w.clone(),
        None => DVector::zeros(info.library.first().map_or(0, |sf| sf.n_features())),
    };
    Ok(Box::new(SfGpiAgent::new(info.library.clone(), info.features.clone(), w, p.eta.unwrap_or(0.1), p.epsilon.unwrap_or(0.0))?))
}

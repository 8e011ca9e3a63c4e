//! Exploration with predictive representations: eigenoptions, the L1 count
//! bonus, posterior sampling through SFs and landmark maps built from
//! successor-feature similarity.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{value_iteration_with, LearningRate, Mdp, Policy, TIE_TOL};
use crate::rng::{categorical, Rng};
use crate::sf::{FeatureMap, SfTensor};
use crate::sr::{SrInit, SrTdLearner};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

/// Top-`k` eigenpairs of `(M + M^T) / 2`, largest eigenvalue first.
///
/// Each vector is flipped so that its first entry with magnitude above 1e-12 is positive.
pub fn eigen_decompose_sr(m: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape("SR must be square".into()));
    }
    if k > m.nrows() {
        return Err(Error::InvalidArgument(format!("k={k} exceeds {} states", m.nrows())));
    }
    if !linalg::all_finite(m) {
        return Err(Error::NonFinite("SR"));
    }
    let (values, vectors) = linalg::sorted_symmetric_eigen(&linalg::symmetrize(m));
    let vectors = vectors
        .into_iter()
        .take(k)
        .map(|mut v| {
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v.neg_mut();
                }
            }
            v
        })
        .collect();
    Ok(EigenPairs { values: values.into_iter().take(k).collect(), vectors })
}

/// `e^T (phi(s') - phi(s))`
pub fn eigenoption_reward(e: &DVector<f64>, features: &FeatureMap, s: usize, s_next: usize) -> f64 {
    let phi = features.matrix();
    (0..e.len()).map(|k| e[k] * (phi[(s_next, k)] - phi[(s, k)])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionDef {
    pub initiation: Vec<bool>,
    #[serde(serialize_with = "ser_policy")]
    pub policy: Policy,
    pub termination: Vec<bool>,
    pub source_index: usize,
    pub eigenvector: Vec<f64>,
}

fn ser_policy<S: serde::Serializer>(p: &Policy, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..p.n_states()).map(|i| p.probs().row(i).iter().cloned().collect()).collect();
    rows.serialize(s)
}

/// Option that climbs the potential `e^T phi(s)`.
///
/// The intrinsic MDP with reward `e(s') - e(s)` is solved by value iteration.
/// The option terminates wherever its best intrinsic action value is not
/// positive, and in terminal states of the environment.
pub fn option_from_eigenvector(mdp: &Mdp, e: &DVector<f64>, features: &FeatureMap, source_index: usize) -> Result<OptionDef> {
    if features.n_states() != mdp.n_states() || e.len() != features.n_features() {
        return Err(Error::Shape("eigenvector, features and MDP disagree".into()));
    }
    let potential = features.matrix() * e;
    let (_, q, _) = value_iteration_with(mdp, 1e-10, 100_000, |s, _, s2| potential[s2] - potential[s]);
    let n = mdp.n_states();
    let termination: Vec<bool> = (0..n)
        .map(|s| mdp.is_terminal(s) || q.row(s).max() <= 1e-9 * (1.0 + potential.amax()))
        .collect();
    let initiation = termination.iter().map(|t| !t).collect();
    Ok(OptionDef {
        initiation,
        policy: Policy::greedy(&q, TIE_TOL),
        termination,
        source_index,
        eigenvector: e.iter().cloned().collect(),
    })
}

/// Behaviour that picks uniformly among primitive actions and available options.
///
/// Returns the visited states (excluding the start), at most `steps` of them.
/// Options run until they terminate or `option_cap` steps elapse.
pub fn random_walk_with_options(
    mdp: &Mdp,
    options: &[OptionDef],
    start: usize,
    steps: usize,
    option_cap: usize,
    rng: &mut Rng,
) -> Vec<usize> {
    let n_a = mdp.n_actions();
    let mut out = Vec::with_capacity(steps);
    let mut s = start;
    while out.len() < steps {
        let avail: Vec<usize> = (0..options.len()).filter(|&o| options[o].initiation[s]).collect();
        let pick = rng.random_range(0..n_a + avail.len());
        if pick < n_a {
            s = mdp.step(s, pick, rng);
            out.push(s);
        } else {
            let opt = &options[avail[pick - n_a]];
            for _ in 0..option_cap {
                let a = opt.policy.sample(s, rng);
                s = mdp.step(s, a, rng);
                out.push(s);
                if opt.termination[s] || out.len() >= steps {
                    break;
                }
            }
        }
    }
    out
}

/// Walk of `total` steps split into episodes that each restart at `start`.
pub fn episodic_walk_with_options(
    mdp: &Mdp,
    options: &[OptionDef],
    start: usize,
    total: usize,
    episode_len: usize,
    option_cap: usize,
    rng: &mut Rng,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(total);
    let episode_len = episode_len.max(1);
    while out.len() < total {
        let len = episode_len.min(total - out.len());
        out.extend(random_walk_with_options(mdp, options, start, len, option_cap, rng));
    }
    out
}

/// Shannon entropy (nats) of the empirical state distribution.
pub fn visit_entropy(visits: &[usize], n_states: usize) -> f64 {
    let mut counts = vec![0usize; n_states];
    for &s in visits {
        counts[s] += 1;
    }
    let total = visits.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct EigenoptionConfig {
    pub n_rounds: usize,
    pub samples_per_round: usize,
    pub start: usize,
    pub gamma_sr: f64,
    pub rate: LearningRate,
    pub option_cap: usize,
    /// Which eigenvector of the learned SR drives each new option.
    pub eigen_index: usize,
}

impl Default for EigenoptionConfig {
    fn default() -> Self {
        Self {
            n_rounds: 1,
            samples_per_round: 1000,
            start: 0,
            gamma_sr: 0.9,
            rate: LearningRate::Constant { eta: 0.1 },
            option_cap: 100,
            eigen_index: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenoptionRun {
    pub options: Vec<OptionDef>,
    pub sr: DMatrix<f64>,
    pub visit_counts: Vec<usize>,
}

/// Eigenvector `index` (0 = top), flipped so its visit-weighted mean is negative.
pub fn oriented_eigenvector(sr: &DMatrix<f64>, index: usize, visit_counts: &[usize]) -> Result<DVector<f64>> {
    let pairs = eigen_decompose_sr(sr, index + 1)?;
    let mut e = pairs.vectors[index].clone();
    let weighted: f64 = visit_counts.iter().zip(e.iter()).map(|(&c, &x)| c as f64 * x).sum();
    if weighted > 0.0 {
        e.neg_mut();
    }
    Ok(e)
}

/// Iterative option discovery.
///
/// Each round walks with primitives and the options found so far, TD-learns
/// the SR of that behaviour (the estimate persists across rounds), and turns
/// the oriented top eigenvector of the estimate into a new option.
pub fn discover_eigenoptions(mdp: &Mdp, cfg: &EigenoptionConfig, rng: &mut Rng) -> Result<EigenoptionRun> {
    let n = mdp.n_states();
    if cfg.start >= n {
        return Err(Error::InvalidArgument("start state out of range".into()));
    }
    let mut learner = SrTdLearner::new(n, cfg.gamma_sr, 1.0, cfg.rate, SrInit::Zeros)?;
    let features = FeatureMap::one_hot(n);
    let mut options = Vec::new();
    let mut counts = vec![0usize; n];
    let mut s = cfg.start;
    for round in 0..cfg.n_rounds {
        let visits = random_walk_with_options(mdp, &options, s, cfg.samples_per_round, cfg.option_cap, rng);
        for &s2 in &visits {
            learner.observe(s, s2)?;
            counts[s2] += 1;
            s = s2;
        }
        let e = oriented_eigenvector(&learner.m, cfg.eigen_index, &counts)?;
        options.push(option_from_eigenvector(mdp, &e, &features, round)?);
    }
    Ok(EigenoptionRun { options, sr: learner.m, visit_counts: counts })
}

/// `1 / ||row||_1`, or `max_bonus` for an all-zero row.
pub fn count_bonus(row: &[f64], max_bonus: f64) -> f64 {
    let norm: f64 = row.iter().map(|x| x.abs()).sum();
    if norm == 0.0 {
        max_bonus
    } else {
        (1.0 / norm).min(max_bonus)
    }
}

pub fn count_bonus_sr(m: &DMatrix<f64>, s: usize, max_bonus: f64) -> f64 {
    let row: Vec<f64> = m.row(s).iter().cloned().collect();
    count_bonus(&row, max_bonus)
}

pub fn count_bonus_sf(sf: &SfTensor, s: usize, a: usize, max_bonus: f64) -> f64 {
    let row: Vec<f64> = sf.psi[a].row(s).iter().cloned().collect();
    count_bonus(&row, max_bonus)
}

/// Gaussian belief over reward weights, `r | w ~ N(phi^T w, noise)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub noise: f64,
}

impl RewardBelief {
    /// Standard normal prior.
    pub fn prior(k: usize, noise: f64) -> Self {
        Self { mean: DVector::zeros(k), cov: DMatrix::identity(k, k), noise }
    }

    /// Conjugate update with one observation.
    pub fn observe(&mut self, phi: &DVector<f64>, r: f64) -> Result<()> {
        if phi.len() != self.mean.len() {
            return Err(Error::Shape("feature length differs from belief".into()));
        }
        let sp = &self.cov * phi;
        let lambda = phi.dot(&sp) + self.noise;
        let k = sp / lambda;
        let delta = r - phi.dot(&self.mean);
        self.mean += &k * delta;
        self.cov -= &k * k.transpose() * lambda;
        self.cov = linalg::symmetrize(&self.cov);
        Ok(())
    }
}

/// One posterior draw of `w`, pushed through the SFs: `Q = Psi w`.
///
/// `Q` is then Gaussian with mean `Psi mu` and covariance `Psi Sigma Psi^T`.
pub fn posterior_q_sample(sf: &SfTensor, belief: &RewardBelief, rng: &mut Rng) -> Result<DMatrix<f64>> {
    let k = sf.n_features();
    if belief.mean.len() != k || belief.cov.nrows() != k || belief.cov.ncols() != k {
        return Err(Error::Shape("belief dimension differs from features".into()));
    }
    let l = linalg::psd_sqrt(&belief.cov, 1e-10)?;
    let z = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)));
    let w = &belief.mean + l * z;
    let mut q = DMatrix::zeros(sf.n_states(), sf.n_actions());
    for (a, p) in sf.psi.iter().enumerate() {
        q.set_column(a, &(p * &w));
    }
    Ok(q)
}

/// Landmarks over states, linked when the agent moved between them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandmarkGraph {
    pub landmarks: Vec<usize>,
    pub counts: Vec<u64>,
    pub edges: Vec<Vec<usize>>,
    pub epsilon_add: f64,
}

/// `0.75 x` the mean self-similarity of all states.
pub fn default_epsilon_add(similarity: &DMatrix<f64>) -> f64 {
    0.75 * similarity.diagonal().mean()
}

impl LandmarkGraph {
    pub fn new(epsilon_add: f64) -> Self {
        Self { landmarks: Vec::new(), counts: Vec::new(), edges: Vec::new(), epsilon_add }
    }

    /// Index of the most similar landmark; `None` for an empty graph.
    pub fn localize(&self, similarity: &DMatrix<f64>, s: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &l) in self.landmarks.iter().enumerate() {
            let v = similarity[(s, l)];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Inserts `s` when it is dissimilar to every landmark; returns its index if added.
    pub fn maybe_add(&mut self, similarity: &DMatrix<f64>, s: usize) -> Option<usize> {
        if self.landmarks.iter().all(|&l| similarity[(s, l)] < self.epsilon_add) {
            self.landmarks.push(s);
            self.counts.push(1);
            self.edges.push(Vec::new());
            Some(self.landmarks.len() - 1)
        } else {
            None
        }
    }

    pub fn connect(&mut self, a: usize, b: usize) {
        if a != b && !self.edges[a].contains(&b) {
            self.edges[a].push(b);
            self.edges[b].push(a);
        }
    }

    /// Breadth-first landmark path from `from` to `to`, both included.
    pub fn plan(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.landmarks.len()];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut x = to;
                while x != from {
                    x = prev[x];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            for &v in &self.edges[u] {
                if prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Frontier landmark drawn with probability proportional to `1 / N(L)`.
    pub fn sample_frontier(&self, rng: &mut Rng) -> Option<usize> {
        let w: Vec<f64> = self.counts.iter().map(|&c| 1.0 / c.max(1) as f64).collect();
        categorical(rng, &w)
    }

    /// Pairwise similarity between stored landmarks, for invariant checks.
    pub fn max_pairwise_similarity(&self, similarity: &DMatrix<f64>) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for (i, &a) in self.landmarks.iter().enumerate() {
            for &b in &self.landmarks[..i] {
                m = m.max(similarity[(a, b)]);
            }
        }
        m
    }
}

/// `argmax_a S(s, a, goal)` with the lowest action on ties.
pub fn landmark_goal_action(sf_uniform: &SfTensor, s: usize, goal: usize) -> usize {
    let target = sf_uniform.action_mean().row(goal).transpose();
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..sf_uniform.n_actions() {
        let v = sf_uniform.psi[a].row(s).transpose().dot(&target);
        if v > best.1 {
            best = (a, v);
        }
    }
    best.0
}

#[derive(Debug, Clone)]
pub struct LandmarkExploreConfig {
    pub max_steps: usize,
    /// Steps allowed to reach a chosen landmark.
    pub nav_budget: usize,
    /// Random-walk steps after arriving at the frontier.
    pub frontier_walk: usize,
    pub epsilon_add: Option<f64>,
    pub cosine: bool,
}

impl Default for LandmarkExploreConfig {
    fn default() -> Self {
        Self { max_steps: 5000, nav_budget: 20, frontier_walk: 8, epsilon_add: None, cosine: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreOutcome {
    /// Step at which a target state was first visited.
    pub steps_to_target: Option<usize>,
    pub landmarks: usize,
}

/// Frontier-biased exploration over a landmark graph.
///
/// Repeats: pick a landmark with probability `1/N`, follow SFS-greedy actions
/// toward it, then random-walk, adding landmarks and edges as new regions show
/// up. Stops when a state in `targets` is visited.
pub fn landmark_explore(
    mdp: &Mdp,
    sf_uniform: &SfTensor,
    start: usize,
    targets: &[bool],
    cfg: &LandmarkExploreConfig,
    rng: &mut Rng,
) -> ExploreOutcome {
    let sim = if cfg.cosine { crate::sf::sf_cosine_matrix(sf_uniform) } else { crate::sf::sf_similarity_matrix(sf_uniform) };
    let eps = cfg.epsilon_add.unwrap_or_else(|| default_epsilon_add(&sim));
    let mut graph = LandmarkGraph::new(eps);
    let n_a = mdp.n_actions();
    let mut s = start;
    let mut t = 0usize;
    graph.maybe_add(&sim, s);
    let mut here = graph.localize(&sim, s).expect("start landmark");

    let visit = |s: usize, graph: &mut LandmarkGraph, here: &mut usize| {
        if let Some(added) = graph.maybe_add(&sim, s) {
            graph.connect(*here, added);
            *here = added;
        } else {
            let l = graph.localize(&sim, s).expect("non-empty");
            graph.connect(*here, l);
            graph.counts[l] += 1;
            *here = l;
        }
    };

    while t < cfg.max_steps {
        if targets[s] {
            return ExploreOutcome { steps_to_target: Some(t), landmarks: graph.landmarks.len() };
        }
        let goal = graph.sample_frontier(rng).expect("non-empty");
        let goal_state = graph.landmarks[goal];
        let mut budget = cfg.nav_budget;
        while here != goal && budget > 0 && t < cfg.max_steps {
            let a = landmark_goal_action(sf_uniform, s, goal_state);
            s = mdp.step(s, a, rng);
            t += 1;
            budget -= 1;
            visit(s, &mut graph, &mut here);
            if targets[s] {
                return ExploreOutcome { steps_to_target: Some(t), landmarks: graph.landmarks.len() };
            }
        }
        for _ in 0..cfg.frontier_walk {
            if t >= cfg.max_steps {
                break;
            }
            s = mdp.step(s, rng.random_range(0..n_a), rng);
            t += 1;
            visit(s, &mut graph, &mut here);
            if targets[s] {
                return ExploreOutcome { steps_to_target: Some(t), landmarks: graph.landmarks.len() };
            }
        }
    }
    ExploreOutcome { steps_to_target: None, landmarks: graph.landmarks.len() }
}

/// Uniform random walk until a target is visited.
pub fn random_walk_to_target(mdp: &Mdp, start: usize, targets: &[bool], max_steps: usize, rng: &mut Rng) -> Option<usize> {
    let mut s = start;
    for t in 0..=max_steps {
        if targets[s] {
            return Some(t);
        }
        s = mdp.step(s, rng.random_range(0..mdp.n_actions()), rng);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridRewards, GridWorld};
    use crate::rng::seeded;
    use crate::sf::sf_closed_form;
    use crate::sr::sr_closed_form;
    use crate::worlds;
    use approx::assert_abs_diff_eq;

    #[test]
    fn swap_chain_spectrum() {
        let m = worlds::swap_chain(0.5, &[0.0, 1.0]).unwrap();
        let sr = sr_closed_form(&m, &Policy::uniform(2, 2)).unwrap();
        let p = eigen_decompose_sr(&sr.m, 2).unwrap();
        assert_abs_diff_eq!(p.values[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values[1], -2.0 / 3.0, epsilon = 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(p.vectors[0][0], r, epsilon = 1e-12);
        assert_abs_diff_eq!(p.vectors[0][1], r, epsilon = 1e-12);
        assert_abs_diff_eq!(p.vectors[1][0], r, epsilon = 1e-12);
        assert_abs_diff_eq!(p.vectors[1][1], -r, epsilon = 1e-12);
        assert!(eigen_decompose_sr(&sr.m, 3).is_err());
    }

    #[test]
    fn perron_vector_has_constant_sign() {
        let mut rng = seeded(5);
        let m = worlds::random_mdp(&mut rng, 7, 2, 0.9).unwrap();
        let sr = sr_closed_form(&m, &worlds::random_policy(&mut rng, 7, 2)).unwrap();
        let p = eigen_decompose_sr(&sr.m, 1).unwrap();
        assert!(p.vectors[0].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn eigenoption_reward_examples() {
        let e = DVector::from_vec(vec![1.0, -1.0]);
        let f = FeatureMap::one_hot(2);
        assert_eq!(eigenoption_reward(&e, &f, 0, 1), -2.0);
        assert_eq!(eigenoption_reward(&e, &f, 1, 1), 0.0);
        assert_eq!(eigenoption_reward(&e, &f, 1, 0), 2.0);
    }

    #[test]
    fn option_climbs_potential_and_stops_at_peak() {
        let g = GridWorld::open(5, 1);
        let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
        let e = DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let o = option_from_eigenvector(&m, &e, &FeatureMap::one_hot(5), 0).unwrap();
        for s in 0..4 {
            assert!(!o.termination[s]);
            assert_eq!(o.policy.action(s), Some(1));
        }
        assert!(o.termination[4]);
    }

    #[test]
    fn no_rounds_no_options() {
        let g = GridWorld::open(3, 3);
        let m = g.to_mdp(&GridRewards::default()).unwrap();
        let cfg = EigenoptionConfig { n_rounds: 0, ..Default::default() };
        assert!(discover_eigenoptions(&m, &cfg, &mut seeded(0)).unwrap().options.is_empty());
    }

    #[test]
    fn bonus_examples() {
        assert_eq!(count_bonus(&[0.0, 0.0], 10.0), 10.0);
        let g = GridWorld::open(3, 3);
        let m = g.to_mdp(&GridRewards { gamma: 0.8, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
        let sr = sr_closed_form(&m, &Policy::uniform(9, 4)).unwrap();
        for s in 0..9 {
            assert_abs_diff_eq!(count_bonus_sr(&sr.m, s, 10.0), 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_covariance_sample_is_mean() {
        let m = worlds::swap_chain(0.5, &[0.0, 1.0]).unwrap();
        let sf = sf_closed_form(&m, &Policy::uniform(2, 2), &FeatureMap::one_hot(2)).unwrap();
        let b = RewardBelief { mean: DVector::from_vec(vec![0.0, 1.0]), cov: DMatrix::zeros(2, 2), noise: 1.0 };
        let q = posterior_q_sample(&sf, &b, &mut seeded(0)).unwrap();
        assert!((q - crate::sf::q_from_sf(&sf, &crate::sf::TaskVector { w: b.mean.clone() }).unwrap()).amax() < 1e-15);
        let bad = RewardBelief { cov: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), ..b };
        assert!(posterior_q_sample(&sf, &bad, &mut seeded(0)).is_err());
    }

    #[test]
    fn landmark_basics() {
        let g = worlds::two_rooms(6).unwrap();
        let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
        let sf = sf_closed_form(&m, &Policy::uniform(m.n_states(), 4), &FeatureMap::one_hot(m.n_states())).unwrap();
        let sim = crate::sf::sf_similarity_matrix(&sf);
        let mut lg = LandmarkGraph::new(default_epsilon_add(&sim));
        assert_eq!(lg.localize(&sim, 0), None);
        assert_eq!(lg.maybe_add(&sim, 0), Some(0));
        assert_eq!(lg.localize(&sim, 0), Some(0));
        assert_eq!(lg.maybe_add(&sim, 0), None);
        let far = m.n_states() - 1;
        assert!(lg.maybe_add(&sim, far).is_some());
        lg.connect(0, 1);
        assert_eq!(lg.plan(0, 1), Some(vec![0, 1]));
        // goal action heads east along the top row
        assert_eq!(landmark_goal_action(&sf, 0, g.state_at(0, 2).unwrap()), 1);
    }
}

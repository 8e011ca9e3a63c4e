//! Tabular MDPs, policies and the classical solvers used as oracles.
//!
//! Terminal states self-loop under every action. They keep their state reward,
//! so an absorbing goal with reward `r` is worth `r / (1 - gamma)` on arrival.
//! This keeps `V = M R` exact for every policy (see `sr::value_from_sr`).
//! Episodic code (trajectories, Q-learning) stops at a terminal after recording
//! the arrival and substitutes that closed-form tail.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{categorical, Rng};

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    gamma: f64,
    /// One `|S| x |S|` matrix per action, rows indexed by the current state.
    transitions: Vec<DMatrix<f64>>,
    reward: DVector<f64>,
    terminal: Vec<bool>,
}

impl Mdp {
    pub fn new(
        gamma: f64,
        transitions: Vec<DMatrix<f64>>,
        reward: DVector<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma must lie in [0,1), got {gamma}")));
        }
        if transitions.is_empty() {
            return Err(Error::InvalidMdp("no actions".into()));
        }
        let n = reward.len();
        if n == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        if terminal.len() != n {
            return Err(Error::Shape(format!("terminal mask has {} entries for {n} states", terminal.len())));
        }
        for (a, t) in transitions.iter().enumerate() {
            if t.nrows() != n || t.ncols() != n {
                return Err(Error::Shape(format!("action {a}: transition is {}x{}, expected {n}x{n}", t.nrows(), t.ncols())));
            }
            for s in 0..n {
                let row = t.row(s);
                if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    return Err(Error::InvalidMdp(format!("T[{s}][{a}] has a negative or non-finite entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidMdp(format!("T[{s}][{a}] sums to {sum}")));
                }
                if terminal[s] && t[(s, s)] != 1.0 {
                    return Err(Error::InvalidMdp(format!("terminal state {s} does not self-loop under action {a}")));
                }
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        Ok(Self { gamma, transitions, reward, terminal })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn reward(&self) -> &DVector<f64> {
        &self.reward
    }

    pub fn transition(&self, a: usize) -> &DMatrix<f64> {
        &self.transitions[a]
    }

    pub fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transitions
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(gamma, self.transitions.clone(), self.reward.clone(), self.terminal.clone())
    }

    pub fn with_reward(&self, reward: DVector<f64>) -> Result<Self> {
        Self::new(self.gamma, self.transitions.clone(), reward, self.terminal.clone())
    }

    /// Samples `s' ~ T(.|s,a)`.
    pub fn step(&self, s: usize, a: usize, rng: &mut Rng) -> usize {
        let row = self.transitions[a].row(s);
        let w: Vec<f64> = row.iter().cloned().collect();
        categorical(rng, &w).unwrap_or(s)
    }

    /// Expected one-step backup `Q(s,a) = sum_s' T(s'|s,a) (R(s') + gamma V(s'))`.
    pub fn q_from_values(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let target = &self.reward + v * self.gamma;
        let mut q = DMatrix::zeros(self.n_states(), self.n_actions());
        for (a, t) in self.transitions.iter().enumerate() {
            q.set_column(a, &(t * &target));
        }
        q
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MdpDump::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: MdpDump = serde_json::from_str(text)?;
        dump.try_into()
    }
}

/// Plain nested-array form, `transition[s][a][s']`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDump {
    pub gamma: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<f64>,
    pub terminals: Vec<bool>,
}

impl From<&Mdp> for MdpDump {
    fn from(m: &Mdp) -> Self {
        let n = m.n_states();
        let transition = (0..n)
            .map(|s| {
                m.transitions
                    .iter()
                    .map(|t| t.row(s).iter().cloned().collect())
                    .collect()
            })
            .collect();
        Self {
            gamma: m.gamma,
            transition,
            reward: m.reward.iter().cloned().collect(),
            terminals: m.terminal.clone(),
        }
    }
}

impl TryFrom<MdpDump> for Mdp {
    type Error = Error;

    fn try_from(d: MdpDump) -> Result<Self> {
        let n = d.reward.len();
        let n_a = d.transition.first().map(|r| r.len()).unwrap_or(0);
        if d.transition.len() != n {
            return Err(Error::Shape(format!("transition has {} rows for {n} states", d.transition.len())));
        }
        let mut ts = vec![DMatrix::zeros(n, n); n_a];
        for (s, per_action) in d.transition.iter().enumerate() {
            if per_action.len() != n_a {
                return Err(Error::Shape(format!("state {s} lists {} actions, expected {n_a}", per_action.len())));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Shape(format!("T[{s}][{a}] has {} entries", row.len())));
                }
                for (j, &p) in row.iter().enumerate() {
                    ts[a][(s, j)] = p;
                }
            }
        }
        Mdp::new(d.gamma, ts, DVector::from_vec(d.reward), d.terminals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: DMatrix<f64>,
}

impl Policy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        for s in 0..probs.nrows() {
            let row = probs.row(s);
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!("row {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { probs: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64) }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = DMatrix::zeros(actions.len(), n_actions);
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidPolicy(format!("action {a} out of range at state {s}")));
            }
            probs[(s, a)] = 1.0;
        }
        Ok(Self { probs })
    }

    /// Greedy policy on a Q table; ties within `tie_tol` go to the lowest action.
    pub fn greedy(q: &DMatrix<f64>, tie_tol: f64) -> Self {
        let actions: Vec<usize> = (0..q.nrows()).map(|s| argmax_row(q, s, tie_tol)).collect();
        Self::deterministic(&actions, q.ncols()).expect("argmax in range")
    }

    /// Greedy with ties split uniformly.
    pub fn greedy_split(q: &DMatrix<f64>, tie_tol: f64) -> Self {
        let mut probs = DMatrix::zeros(q.nrows(), q.ncols());
        for s in 0..q.nrows() {
            let best = q.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<usize> = (0..q.ncols()).filter(|&a| q[(s, a)] >= best - tie_tol).collect();
            for &a in &winners {
                probs[(s, a)] = 1.0 / winners.len() as f64;
            }
        }
        Self { probs }
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn sample(&self, s: usize, rng: &mut Rng) -> usize {
        let w: Vec<f64> = self.probs.row(s).iter().cloned().collect();
        categorical(rng, &w).unwrap_or(0)
    }

    /// The action when the row is deterministic.
    pub fn action(&self, s: usize) -> Option<usize> {
        (0..self.n_actions()).find(|&a| self.probs[(s, a)] == 1.0)
    }

    fn check(&self, mdp: &Mdp) -> Result<()> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(Error::Shape(format!(
                "policy is {}x{}, MDP has {} states and {} actions",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Lowest index within `tol` of the row maximum.
pub fn argmax_row(q: &DMatrix<f64>, s: usize, tol: f64) -> usize {
    let best = q.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..q.ncols()).find(|&a| q[(s, a)] >= best - tol).unwrap_or(0)
}

/// `T^pi(s,s') = sum_a pi(a|s) T(s'|s,a)`
pub fn policy_transition_matrix(mdp: &Mdp, policy: &Policy) -> Result<DMatrix<f64>> {
    policy.check(mdp)?;
    let n = mdp.n_states();
    let mut tp = DMatrix::zeros(n, n);
    for (a, t) in mdp.transitions.iter().enumerate() {
        for s in 0..n {
            let p = policy.prob(s, a);
            if p != 0.0 {
                linalg::add_scaled_row(&mut tp, t, s, p);
            }
        }
    }
    Ok(tp)
}

/// Solves `(I - gamma T^pi) V = T^pi R`.
pub fn policy_evaluation_exact(mdp: &Mdp, policy: &Policy) -> Result<DVector<f64>> {
    let tp = policy_transition_matrix(mdp, policy)?;
    let n = mdp.n_states();
    let a = DMatrix::identity(n, n) - &tp * mdp.gamma;
    let b = &tp * &mdp.reward;
    linalg::solve_vec(&a, &b, "policy evaluation")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: 0.0, std_error: 0.0, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std_error: (var / n as f64).sqrt(), n }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.std_error + 1e-12
    }
}

/// `ceil(ln(1e-6) / ln(gamma))`, so that `gamma^H < 1e-6`.
pub fn default_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    ((1e-6f64).ln() / gamma.ln()).ceil() as usize
}

/// Discounted return of one rollout truncated at `horizon` steps.
///
/// On reaching a terminal the remaining self-loop reward is added in closed
/// form (within the horizon), so the estimate is unbiased for the exact value.
pub fn rollout_return(mdp: &Mdp, policy: &Policy, start: usize, horizon: usize, rng: &mut Rng) -> f64 {
    let g = mdp.gamma;
    let mut s = start;
    let mut disc = 1.0;
    let mut ret = 0.0;
    let mut t = 0;
    while t < horizon {
        if mdp.terminal[s] {
            let left = (horizon - t) as f64;
            ret += disc * mdp.reward[s] * (1.0 - g.powf(left)) / (1.0 - g);
            break;
        }
        let a = policy.sample(s, rng);
        let s2 = mdp.step(s, a, rng);
        ret += disc * mdp.reward[s2];
        disc *= g;
        s = s2;
        t += 1;
    }
    ret
}

pub fn monte_carlo_evaluation(
    mdp: &Mdp,
    policy: &Policy,
    state: usize,
    n_rollouts: usize,
    horizon: Option<usize>,
    rng: &mut Rng,
) -> Result<Estimate> {
    policy.check(mdp)?;
    if n_rollouts == 0 {
        return Err(Error::InvalidArgument("n_rollouts must be >= 1".into()));
    }
    if state >= mdp.n_states() {
        return Err(Error::InvalidArgument(format!("state {state} out of range")));
    }
    let h = horizon.unwrap_or_else(|| default_horizon(mdp.gamma));
    let xs: Vec<f64> = (0..n_rollouts).map(|_| rollout_return(mdp, policy, state, h, rng)).collect();
    Ok(Estimate::from_samples(&xs))
}

/// Value iteration for an arbitrary transition reward `r(s, a, s')`.
///
/// Returns `V`, the greedy Q table and the number of sweeps. The reward of the
/// standard MDP is `|_, _, s2| R[s2]`.
pub fn value_iteration_with<F>(mdp: &Mdp, tol: f64, max_sweeps: usize, reward: F) -> (DVector<f64>, DMatrix<f64>, usize)
where
    F: Fn(usize, usize, usize) -> f64,
{
    let n = mdp.n_states();
    let n_a = mdp.n_actions();
    // Expected immediate reward per (s,a) is fixed; precompute it.
    let mut r_sa = DMatrix::zeros(n, n_a);
    for a in 0..n_a {
        let t = &mdp.transitions[a];
        for s in 0..n {
            let mut acc = 0.0;
            for s2 in 0..n {
                let p = t[(s, s2)];
                if p != 0.0 {
                    acc += p * reward(s, a, s2);
                }
            }
            r_sa[(s, a)] = acc;
        }
    }
    let mut v = DVector::zeros(n);
    let mut q = r_sa.clone();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        for a in 0..n_a {
            let col = r_sa.column(a) + (&mdp.transitions[a] * &v) * mdp.gamma;
            q.set_column(a, &col);
        }
        let v_new = DVector::from_iterator(n, (0..n).map(|s| q.row(s).max()));
        let delta = (&v_new - &v).amax();
        v = v_new;
        if delta < tol || sweeps >= max_sweeps {
            break;
        }
    }
    (v, q, sweeps)
}

/// Tie tolerance used by all greedy extractions.
pub const TIE_TOL: f64 = 1e-10;

pub fn value_iteration(mdp: &Mdp, tol: f64) -> Result<(DVector<f64>, Policy)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let r = &mdp.reward;
    let (v, q, _) = value_iteration_with(mdp, tol, usize::MAX, |_, _, s2| r[s2]);
    Ok((v, Policy::greedy(&q, TIE_TOL)))
}

/// Step-size schedules shared by the TD learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearningRate {
    Constant { eta: f64 },
    /// `eta0 / (1 + t / tau)` with `t` the global update count.
    Decaying { eta0: f64, tau: f64 },
    /// `eta0 / (1 + n / tau)` with `n` the visit count of the updated entry.
    PerVisit { eta0: f64, tau: f64 },
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::Decaying { eta0: 0.1, tau: 1e4 }
    }
}

impl LearningRate {
    pub fn rate(&self, t: u64, visits: u64) -> f64 {
        match *self {
            LearningRate::Constant { eta } => eta,
            LearningRate::Decaying { eta0, tau } => eta0 / (1.0 + t as f64 / tau),
            LearningRate::PerVisit { eta0, tau } => eta0 / (1.0 + visits as f64 / tau),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (eta, tau) = match *self {
            LearningRate::Constant { eta } => (eta, 1.0),
            LearningRate::Decaying { eta0, tau } | LearningRate::PerVisit { eta0, tau } => (eta0, tau),
        };
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidArgument(format!("learning rate must lie in (0,1], got {eta}")));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument("tau must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QLearningConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub rate: LearningRate,
    pub epsilon: f64,
    /// Start states; uniform over non-terminal states when empty.
    pub starts: Vec<usize>,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            max_steps: 100,
            rate: LearningRate::PerVisit { eta0: 1.0, tau: 1.0 },
            epsilon: 0.1,
            starts: Vec::new(),
        }
    }
}

pub fn epsilon_greedy(q: &DMatrix<f64>, s: usize, epsilon: f64, rng: &mut Rng) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.ncols())
    } else {
        argmax_row(q, s, 0.0)
    }
}

/// Tabular Q-learning from a zero table.
///
/// Arriving in a terminal bootstraps with its closed-form value `R / (1 - gamma)`.
pub fn q_learning(mdp: &Mdp, cfg: &QLearningConfig, rng: &mut Rng) -> Result<DMatrix<f64>> {
    cfg.rate.validate()?;
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::InvalidArgument("epsilon must lie in [0,1]".into()));
    }
    let n = mdp.n_states();
    let starts: Vec<usize> = if cfg.starts.is_empty() {
        (0..n).filter(|&s| !mdp.terminal[s]).collect()
    } else {
        cfg.starts.clone()
    };
    if starts.is_empty() || starts.iter().any(|&s| s >= n) {
        return Err(Error::InvalidArgument("no valid start states".into()));
    }
    let g = mdp.gamma;
    let mut q = DMatrix::zeros(n, mdp.n_actions());
    let mut visits = DMatrix::<u64>::zeros(n, mdp.n_actions());
    let mut t = 0u64;
    for _ in 0..cfg.episodes {
        let mut s = starts[rng.random_range(0..starts.len())];
        for _ in 0..cfg.max_steps {
            let a = epsilon_greedy(&q, s, cfg.epsilon, rng);
            let s2 = mdp.step(s, a, rng);
            let r = mdp.reward[s2];
            let target = if mdp.terminal[s2] {
                r + g * r / (1.0 - g)
            } else {
                r + g * q.row(s2).max()
            };
            let eta = cfg.rate.rate(t, visits[(s, a)]);
            q[(s, a)] += eta * (target - q[(s, a)]);
            visits[(s, a)] += 1;
            t += 1;
            if mdp.terminal[s2] {
                break;
            }
            s = s2;
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn states(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.steps.iter().map(|s| s.state).collect();
        if let Some(last) = self.steps.last() {
            out.push(last.next_state);
        }
        out
    }
}

/// Rolls out `policy` for at most `horizon` steps, stopping once a terminal has been entered.
pub fn sample_trajectory(mdp: &Mdp, policy: &Policy, start: usize, horizon: usize, rng: &mut Rng) -> Result<Trajectory> {
    policy.check(mdp)?;
    if start >= mdp.n_states() {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    let mut steps = Vec::with_capacity(horizon.min(4096));
    let mut s = start;
    for _ in 0..horizon {
        let a = policy.sample(s, rng);
        let s2 = mdp.step(s, a, rng);
        steps.push(Step { state: s, action: a, reward: mdp.reward[s2], next_state: s2 });
        if mdp.terminal[s2] {
            break;
        }
        s = s2;
    }
    Ok(Trajectory { steps, seed: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::worlds;

    fn swap(gamma: f64) -> Mdp {
        worlds::swap_chain(gamma, &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let t = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.0, 1.0]);
        let err = Mdp::new(0.9, vec![t], DVector::zeros(2), vec![false; 2]);
        assert!(matches!(err, Err(Error::InvalidMdp(_))));
        let t = DMatrix::identity(2, 2);
        assert!(Mdp::new(1.0, vec![t], DVector::zeros(2), vec![false; 2]).is_err());
    }

    #[test]
    fn terminal_must_self_loop() {
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert!(Mdp::new(0.9, vec![t], DVector::zeros(2), vec![true, false]).is_err());
    }

    #[test]
    fn transition_matrix_examples() {
        let m = swap(0.5);
        let tp = policy_transition_matrix(&m, &Policy::uniform(2, 2)).unwrap();
        assert_eq!(tp, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let m = worlds::stay_swap(0.5, &[0.0, 1.0]).unwrap();
        let tp = policy_transition_matrix(&m, &Policy::uniform(2, 2)).unwrap();
        assert_eq!(tp, DMatrix::from_element(2, 2, 0.5));
        let det = Policy::deterministic(&[0, 1], 2).unwrap();
        let tp = policy_transition_matrix(&m, &det).unwrap();
        assert_eq!(tp.row(0), m.transition(0).row(0));
        assert_eq!(tp.row(1), m.transition(1).row(1));
    }

    #[test]
    fn swap_chain_values() {
        let m = swap(0.5);
        let v = policy_evaluation_exact(&m, &Policy::uniform(2, 2)).unwrap();
        assert!((v[0] - 4.0 / 3.0).abs() < 1e-12 && (v[1] - 2.0 / 3.0).abs() < 1e-12);
        let (vs, _) = value_iteration(&m, 1e-12).unwrap();
        assert!((&vs - &v).amax() < 1e-10);
    }

    #[test]
    fn zero_reward_gives_zero_value() {
        let m = worlds::swap_chain(0.9, &[0.0, 0.0]).unwrap();
        let v = policy_evaluation_exact(&m, &Policy::uniform(2, 2)).unwrap();
        assert_eq!(v.amax(), 0.0);
        let q = q_learning(&m, &QLearningConfig { episodes: 10, ..Default::default() }, &mut seeded(0)).unwrap();
        assert_eq!(q.amax(), 0.0);
    }

    #[test]
    fn absorbing_rewardless_state() {
        let m = Mdp::new(0.9, vec![DMatrix::identity(1, 1)], DVector::zeros(1), vec![true]).unwrap();
        let (v, p) = value_iteration(&m, 1e-9).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(p.action(0), Some(0));
    }

    #[test]
    fn monte_carlo_examples() {
        let m = swap(0.5);
        let pi = Policy::uniform(2, 2);
        let est = monte_carlo_evaluation(&m, &pi, 0, 2000, None, &mut seeded(1)).unwrap();
        // deterministic: zero variance, only the truncation bias gamma^H remains
        assert!(est.std_error < 1e-12);
        assert!((est.mean - 4.0 / 3.0).abs() < 1e-5);
        let zero = monte_carlo_evaluation(&m, &pi, 0, 10, Some(0), &mut seeded(1)).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn q_learning_swap_chain() {
        let m = swap(0.5);
        let (v, _) = value_iteration(&m, 1e-12).unwrap();
        let q_star = m.q_from_values(&v);
        let cfg = QLearningConfig { episodes: 10_000, max_steps: 10, epsilon: 0.5, ..Default::default() };
        let q = q_learning(&m, &cfg, &mut seeded(2)).unwrap();
        assert!((&q - &q_star).amax() < 0.05, "{q} vs {q_star}");
    }

    #[test]
    fn trajectory_examples() {
        let m = swap(0.5);
        let pi = Policy::uniform(2, 2);
        let t = sample_trajectory(&m, &pi, 0, 0, &mut seeded(0)).unwrap();
        assert!(t.steps.is_empty());
        let t = sample_trajectory(&m, &pi, 0, 4, &mut seeded(0)).unwrap();
        assert_eq!(t.states(), vec![0, 1, 0, 1, 0]);
        let det = Policy::deterministic(&[1, 0], 2).unwrap();
        let t1 = sample_trajectory(&m, &det, 0, 4, &mut seeded(0)).unwrap();
        let t2 = sample_trajectory(&m, &det, 0, 4, &mut seeded(99)).unwrap();
        assert_eq!(t1, t2);
        for st in &t.steps {
            assert_eq!(st.reward, m.reward()[st.next_state]);
        }
        assert!(sample_trajectory(&m, &pi, 5, 4, &mut seeded(0)).is_err());
    }

    #[test]
    fn trajectory_stops_at_terminal() {
        let g = crate::grid::GridWorld::parse("S.G").unwrap();
        let m = g.to_mdp(&crate::grid::GridRewards::default()).unwrap();
        let pi = Policy::deterministic(&[1, 1, 1], 4).unwrap();
        let t = sample_trajectory(&m, &pi, 0, 50, &mut seeded(0)).unwrap();
        assert_eq!(t.steps.len(), 2);
        assert!(m.is_terminal(t.steps[1].next_state));
    }

    #[test]
    fn json_round_trip() {
        let m = swap(0.7);
        let back = Mdp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}

//! Successor representation, successor models and geometric policy composition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{policy_transition_matrix, Estimate, LearningRate, Mdp, Policy};
use crate::rng::{categorical, Rng};
use crate::tcm::{trace_td_update, ContextVector};

/// `M(s, s~) = E[sum_{t>=0} gamma^t 1[s_{t+1} = s~] | s_0 = s]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrMatrix {
    pub m: DMatrix<f64>,
    pub gamma: f64,
    pub policy_id: String,
}

impl SrMatrix {
    pub fn new(m: DMatrix<f64>, gamma: f64, policy_id: impl Into<String>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("SR must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if !linalg::all_finite(&m) {
            return Err(Error::NonFinite("SR"));
        }
        Ok(Self { m, gamma, policy_id: policy_id.into() })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.policy_id = id.into();
        self
    }

    pub fn n_states(&self) -> usize {
        self.m.nrows()
    }

    /// Largest deviation of a row sum from `1 / (1 - gamma)`.
    pub fn row_sum_error(&self) -> f64 {
        let target = 1.0 / (1.0 - self.gamma);
        (0..self.n_states())
            .map(|s| (self.m.row(s).sum() - target).abs())
            .fold(0.0, f64::max)
    }

    /// Sup-norm of `T^pi (I + gamma M) - M`.
    pub fn bellman_residual(&self, tp: &DMatrix<f64>) -> f64 {
        let n = self.n_states();
        let backup = tp * (DMatrix::identity(n, n) + &self.m * self.gamma);
        linalg::max_abs_diff(&backup, &self.m)
    }
}

/// Closed form from a policy transition matrix.
///
/// Entries whose target is unreachable from the row state under `tp` are set
/// to exactly zero so that structural zeros survive roundoff.
pub fn sr_from_transition(tp: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let n = tp.nrows();
    let a = DMatrix::identity(n, n) - tp * gamma;
    let mut m = linalg::solve(&a, tp, "SR closed form")?;
    let reach = linalg::reachability(tp);
    for s in 0..n {
        for j in 0..n {
            if !reach[s][j] {
                m[(s, j)] = 0.0;
            }
        }
    }
    Ok(m)
}

/// `M = T^pi (I - gamma T^pi)^-1`
pub fn sr_closed_form(mdp: &Mdp, policy: &Policy) -> Result<SrMatrix> {
    let tp = policy_transition_matrix(mdp, policy)?;
    SrMatrix::new(sr_from_transition(&tp, mdp.gamma())?, mdp.gamma(), "")
}

/// `M(s, a, s~)`; one `|S| x |S|` matrix per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSr {
    pub m: Vec<DMatrix<f64>>,
    pub gamma: f64,
    pub policy_id: String,
}

impl ActionSr {
    pub fn n_actions(&self) -> usize {
        self.m.len()
    }

    pub fn n_states(&self) -> usize {
        self.m[0].nrows()
    }

    /// `sum_a pi(a|s) M(s, a, .)`
    pub fn marginal(&self, policy: &Policy) -> DMatrix<f64> {
        let n = self.n_states();
        let mut out = DMatrix::zeros(n, n);
        for (a, ma) in self.m.iter().enumerate() {
            for s in 0..n {
                let p = policy.prob(s, a);
                if p != 0.0 {
                    linalg::add_scaled_row(&mut out, ma, s, p);
                }
            }
        }
        out
    }
}

/// `M(s, a, .) = sum_s' T(s'|s,a) (1[s' = .] + gamma M^pi(s', .))`
pub fn sr_action_closed_form(mdp: &Mdp, policy: &Policy) -> Result<ActionSr> {
    let sr = sr_closed_form(mdp, policy)?;
    let n = mdp.n_states();
    let next = DMatrix::identity(n, n) + &sr.m * mdp.gamma();
    let m = mdp.transitions().iter().map(|t| t * &next).collect();
    Ok(ActionSr { m, gamma: mdp.gamma(), policy_id: String::new() })
}

/// `V = M R`
pub fn value_from_sr(sr: &SrMatrix, reward: &DVector<f64>) -> Result<DVector<f64>> {
    if reward.len() != sr.n_states() {
        return Err(Error::Shape(format!("reward has {} entries, SR {}", reward.len(), sr.n_states())));
    }
    Ok(&sr.m * reward)
}

/// `Q(s, a) = M(s, a, .) R`, returned as an `|S| x |A|` table.
pub fn q_from_action_sr(sr: &ActionSr, reward: &DVector<f64>) -> Result<DMatrix<f64>> {
    if reward.len() != sr.n_states() {
        return Err(Error::Shape(format!("reward has {} entries, SR {}", reward.len(), sr.n_states())));
    }
    let mut q = DMatrix::zeros(sr.n_states(), sr.n_actions());
    for (a, ma) in sr.m.iter().enumerate() {
        q.set_column(a, &(ma * reward));
    }
    Ok(q)
}

/// Plain one-hot row update:
/// `M(s, j) += eta (1[s_next = j] + gamma M(s_next, j) - M(s, j))`.
pub fn sr_td_row_update(m: &mut DMatrix<f64>, s: usize, s_next: usize, eta: f64, gamma: f64) {
    let n = m.ncols();
    let delta: Vec<f64> = (0..n)
        .map(|j| {
            let ind = if j == s_next { 1.0 } else { 0.0 };
            ind + gamma * m[(s_next, j)] - m[(s, j)]
        })
        .collect();
    for (j, d) in delta.iter().enumerate() {
        m[(s, j)] += eta * d;
    }
}

/// One TD step with an eligibility trace.
///
/// The trace is the drifting context of `tcm`: it is first moved toward the
/// one-hot code of `s`, then every row `i` moves by `eta c_i delta`. With drift
/// 1 this is the plain row update.
pub fn sr_td_step(
    m: &mut DMatrix<f64>,
    s: usize,
    s_next: usize,
    eta: f64,
    gamma: f64,
    trace: &mut ContextVector,
) -> Result<()> {
    let n = m.nrows();
    if trace.dim() != n || m.ncols() != n {
        return Err(Error::Shape("trace and SR dimensions differ".into()));
    }
    if s >= n || s_next >= n {
        return Err(Error::InvalidArgument("state out of range".into()));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0,1], got {eta}")));
    }
    trace.update_onehot(s);
    trace_td_update(m, s, s_next, gamma, eta, trace.vector());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SrInit {
    #[default]
    Zeros,
    Identity,
}

/// Owns an SR estimate and learns it from a transition stream.
#[derive(Debug, Clone)]
pub struct SrTdLearner {
    pub m: DMatrix<f64>,
    pub gamma: f64,
    pub rate: LearningRate,
    trace: ContextVector,
    t: u64,
    visits: Vec<u64>,
}

impl SrTdLearner {
    pub fn new(n: usize, gamma: f64, omega: f64, rate: LearningRate, init: SrInit) -> Result<Self> {
        rate.validate()?;
        let m = match init {
            SrInit::Zeros => DMatrix::zeros(n, n),
            SrInit::Identity => DMatrix::identity(n, n),
        };
        Ok(Self { m, gamma, rate, trace: ContextVector::new(n, omega)?, t: 0, visits: vec![0; n] })
    }

    pub fn observe(&mut self, s: usize, s_next: usize) -> Result<()> {
        let eta = self.rate.rate(self.t, self.visits[s]);
        sr_td_step(&mut self.m, s, s_next, eta, self.gamma, &mut self.trace)?;
        self.t += 1;
        self.visits[s] += 1;
        Ok(())
    }

    /// Clears the trace, e.g. at an episode boundary.
    pub fn reset_trace(&mut self) {
        self.trace.reset();
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn snapshot(&self, policy_id: &str) -> SrMatrix {
        SrMatrix { m: self.m.clone(), gamma: self.gamma, policy_id: policy_id.to_string() }
    }
}

/// Learns the SR of `policy` from one simulated stream of `steps` transitions.
///
/// A terminal state contributes its self-transition once, then the walk
/// restarts from a uniformly drawn state with a cleared trace.
pub fn learn_sr_stream(
    mdp: &Mdp,
    policy: &Policy,
    steps: usize,
    rate: LearningRate,
    omega: f64,
    start: usize,
    rng: &mut Rng,
) -> Result<SrMatrix> {
    let n = mdp.n_states();
    if start >= n {
        return Err(Error::InvalidArgument(format!("start {start} out of range")));
    }
    let mut learner = SrTdLearner::new(n, mdp.gamma(), omega, rate, SrInit::Zeros)?;
    let mut s = start;
    for _ in 0..steps {
        if mdp.is_terminal(s) {
            learner.observe(s, s)?;
            learner.reset_trace();
            s = rand::Rng::random_range(rng, 0..n);
            continue;
        }
        let a = policy.sample(s, rng);
        let s2 = mdp.step(s, a, rng);
        learner.observe(s, s2)?;
        s = s2;
    }
    Ok(learner.snapshot("td"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SmTable {
    State(DMatrix<f64>),
    Action(Vec<DMatrix<f64>>),
}

/// Normalized SR: each row is a distribution over discounted future states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorModel {
    pub mu: SmTable,
    pub gamma: f64,
}

const SM_TOL: f64 = 1e-8;

fn normalize_sr(m: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let mu = m * (1.0 - gamma);
    let dev = (0..mu.nrows()).map(|s| (mu.row(s).sum() - 1.0).abs()).fold(0.0, f64::max);
    if dev > SM_TOL {
        return Err(Error::Unnormalized(dev));
    }
    if mu.iter().any(|&x| x < -SM_TOL) {
        return Err(Error::InvalidArgument("successor model has negative mass".into()));
    }
    Ok(mu)
}

/// `mu = (1 - gamma) M`; fails when rows do not sum to one.
pub fn successor_model(sr: &SrMatrix) -> Result<SuccessorModel> {
    Ok(SuccessorModel { mu: SmTable::State(normalize_sr(&sr.m, sr.gamma)?), gamma: sr.gamma })
}

pub fn action_successor_model(sr: &ActionSr) -> Result<SuccessorModel> {
    let mu = sr.m.iter().map(|m| normalize_sr(m, sr.gamma)).collect::<Result<_>>()?;
    Ok(SuccessorModel { mu: SmTable::Action(mu), gamma: sr.gamma })
}

/// Action-conditioned SM of `policy` at discount `gamma`, from the closed form.
pub fn exact_action_sm(mdp: &Mdp, policy: &Policy, gamma: f64) -> Result<SuccessorModel> {
    action_successor_model(&sr_action_closed_form(&mdp.with_gamma(gamma)?, policy)?)
}

impl SuccessorModel {
    pub fn row(&self, s: usize, a: Option<usize>) -> Result<Vec<f64>> {
        let m = match (&self.mu, a) {
            (SmTable::State(m), None) => m,
            (SmTable::Action(ms), Some(a)) => ms
                .get(a)
                .ok_or_else(|| Error::InvalidArgument(format!("action {a} out of range")))?,
            (SmTable::State(_), Some(_)) => return Err(Error::InvalidArgument("state SM queried with an action".into())),
            (SmTable::Action(_), None) => return Err(Error::InvalidArgument("action SM queried without an action".into())),
        };
        if s >= m.nrows() {
            return Err(Error::InvalidArgument(format!("state {s} out of range")));
        }
        Ok(m.row(s).iter().cloned().collect())
    }

    /// Sup-norm of `(1 - gamma) T^pi + gamma T^pi mu - mu` (state form only).
    pub fn bellman_residual(&self, tp: &DMatrix<f64>) -> Result<f64> {
        match &self.mu {
            SmTable::State(mu) => {
                let rhs = tp * (1.0 - self.gamma) + tp * mu * self.gamma;
                Ok(linalg::max_abs_diff(&rhs, mu))
            }
            SmTable::Action(_) => Err(Error::InvalidArgument("residual defined for the state form".into())),
        }
    }

    /// `V = E_mu[R] / (1 - gamma)` (state form).
    pub fn value(&self, reward: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.mu {
            SmTable::State(mu) if mu.ncols() == reward.len() => Ok(mu * reward / (1.0 - self.gamma)),
            SmTable::State(_) => Err(Error::Shape("reward length".into())),
            SmTable::Action(_) => Err(Error::InvalidArgument("value defined for the state form".into())),
        }
    }
}

/// Draws `s~ ~ mu(. | s[, a])`.
pub fn sm_sample(sm: &SuccessorModel, s: usize, a: Option<usize>, rng: &mut Rng) -> Result<usize> {
    let row: Vec<f64> = sm.row(s, a)?.into_iter().map(|x| x.max(0.0)).collect();
    categorical(rng, &row).ok_or_else(|| Error::InvalidArgument(format!("row {s} has no mass")))
}

/// Monte Carlo value of following `policies[0]` for a geometric(beta) number of
/// steps, then `policies[1]`, ..., and finally `policies[n-1]` forever.
///
/// `short[i]` is the action SM of `policies[i]` at discount `beta` (`n - 1` of
/// them), `long` the action SM of the last policy at discount `gamma`. Each
/// sample chains one jump per policy and scores
/// `sum_{i<n} c^(i-1) R(s_i) / (1 - beta) + c^(n-1) R(s_n) / (1 - gamma)` with
/// `c = (gamma - beta) / (1 - beta)`.
#[allow(clippy::too_many_arguments)]
pub fn gpc_rollout(
    short: &[SuccessorModel],
    long: &SuccessorModel,
    policies: &[Policy],
    s0: usize,
    a0: usize,
    n_samples: usize,
    reward: &DVector<f64>,
    rng: &mut Rng,
) -> Result<Estimate> {
    let n = policies.len();
    if n == 0 {
        return Err(Error::EmptyLibrary);
    }
    if short.len() != n - 1 {
        return Err(Error::Shape(format!("{} short-horizon models for {n} policies", short.len())));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let gamma = long.gamma;
    let beta = short.first().map(|m| m.gamma).unwrap_or(0.0);
    if short.iter().any(|m| m.gamma != beta) {
        return Err(Error::InvalidArgument("short-horizon models use different discounts".into()));
    }
    if n > 1 && beta >= gamma {
        return Err(Error::InvalidArgument(format!("short horizon beta={beta} must be below gamma={gamma}")));
    }
    let c = (gamma - beta) / (1.0 - beta);
    let mut xs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (mut s, mut a) = (s0, a0);
        let mut g = 0.0;
        let mut coef = 1.0;
        for (i, sm) in short.iter().enumerate() {
            let s_next = sm_sample(sm, s, Some(a), rng)?;
            g += coef * reward[s_next] / (1.0 - beta);
            coef *= c;
            s = s_next;
            a = policies[i + 1].sample(s, rng);
        }
        let s_last = sm_sample(long, s, Some(a), rng)?;
        g += coef * reward[s_last] / (1.0 - gamma);
        xs.push(g);
    }
    Ok(Estimate::from_samples(&xs))
}

/// Exact `Q(s0, a0)` of the switched policy sampled by `gpc_rollout`.
///
/// After each transition under `policies[k]` (k < n-1) the agent keeps the
/// policy with probability `beta / gamma` and moves on otherwise. Each phase is
/// a linear solve: `(I - beta T_k) V_k = T_k (R + (gamma - beta) V_{k+1})`.
pub fn gpc_exact(mdp: &Mdp, policies: &[Policy], beta: f64, s0: usize, a0: usize) -> Result<f64> {
    let n = policies.len();
    if n == 0 {
        return Err(Error::EmptyLibrary);
    }
    let gamma = mdp.gamma();
    if n > 1 && !(0.0..gamma).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta={beta} must lie in [0, gamma)")));
    }
    let ns = mdp.n_states();
    let r = mdp.reward();
    let mut v_next = crate::mdp::policy_evaluation_exact(mdp, &policies[n - 1])?;
    // value of the phase after the one being solved
    let mut v_after: Option<DVector<f64>> = None;
    for k in (0..n - 1).rev() {
        let tk = policy_transition_matrix(mdp, &policies[k])?;
        let a = DMatrix::identity(ns, ns) - &tk * beta;
        let b = &tk * (r + &v_next * (gamma - beta));
        let vk = linalg::solve_vec(&a, &b, "switched policy phase")?;
        v_after = Some(v_next);
        v_next = vk;
    }
    let row = mdp.transition(a0).row(s0);
    let target = match v_after {
        None => r + &v_next * gamma,
        Some(after) => r + &v_next * beta + after * (gamma - beta),
    };
    Ok((row * target)[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::policy_evaluation_exact;
    use crate::rng::seeded;
    use crate::worlds;
    use approx::assert_abs_diff_eq;

    fn swap() -> (Mdp, Policy) {
        (worlds::swap_chain(0.5, &[0.0, 1.0]).unwrap(), Policy::uniform(2, 2))
    }

    #[test]
    fn absorbing_state() {
        let m = Mdp::new(0.5, vec![DMatrix::identity(1, 1)], DVector::zeros(1), vec![true]).unwrap();
        let sr = sr_closed_form(&m, &Policy::uniform(1, 1)).unwrap();
        assert_abs_diff_eq!(sr.m[(0, 0)], 2.0, epsilon = 1e-14);
        let sm = successor_model(&sr).unwrap();
        assert_eq!(sm.row(0, None).unwrap(), vec![1.0]);
        for _ in 0..10 {
            assert_eq!(sm_sample(&sm, 0, None, &mut seeded(1)).unwrap(), 0);
        }
    }

    #[test]
    fn swap_chain_closed_form() {
        let (m, pi) = swap();
        let sr = sr_closed_form(&m, &pi).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0]);
        assert!(linalg::max_abs_diff(&sr.m, &want) < 1e-14);
        let v = value_from_sr(&sr, m.reward()).unwrap();
        assert_abs_diff_eq!(v[0], 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 2.0 / 3.0, epsilon = 1e-14);
        let sm = successor_model(&sr).unwrap();
        assert_eq!(sm.row(0, None).unwrap().len(), 2);
        assert_abs_diff_eq!(sm.row(0, None).unwrap()[1], 2.0 / 3.0, epsilon = 1e-14);
        let zero = value_from_sr(&sr, &DVector::zeros(2)).unwrap();
        assert_eq!(zero.amax(), 0.0);
        assert!(value_from_sr(&sr, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn action_sr_identities() {
        let mut rng = seeded(9);
        let m = worlds::random_mdp(&mut rng, 5, 3, 0.8).unwrap();
        let pi = worlds::random_policy(&mut rng, 5, 3);
        let sr = sr_closed_form(&m, &pi).unwrap();
        let asr = sr_action_closed_form(&m, &pi).unwrap();
        assert!(linalg::max_abs_diff(&asr.marginal(&pi), &sr.m) < 1e-10);
        let q = q_from_action_sr(&asr, m.reward()).unwrap();
        let v = policy_evaluation_exact(&m, &pi).unwrap();
        assert!((&q - m.q_from_values(&v)).amax() < 1e-10);
        // myopic limit
        let m0 = m.with_gamma(0.0).unwrap();
        let asr0 = sr_action_closed_form(&m0, &pi).unwrap();
        for a in 0..3 {
            assert!(linalg::max_abs_diff(&asr0.m[a], m.transition(a)) < 1e-14);
        }
    }

    #[test]
    fn single_action_sr_equals_state_sr() {
        let m = worlds::chain(4, 0.9, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let only = Mdp::new(0.9, vec![m.transition(0).clone()], m.reward().clone(), m.terminal_mask().to_vec()).unwrap();
        let pi = Policy::uniform(4, 1);
        let sr = sr_closed_form(&only, &pi).unwrap();
        let asr = sr_action_closed_form(&only, &pi).unwrap();
        assert!(linalg::max_abs_diff(&asr.m[0], &sr.m) < 1e-12);
    }

    #[test]
    fn unconverged_sr_rejected() {
        let sr = SrMatrix::new(DMatrix::zeros(2, 2), 0.5, "zeros").unwrap();
        assert!(matches!(successor_model(&sr), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn td_leaves_exact_sr_unchanged() {
        let (m, pi) = swap();
        let sr = sr_closed_form(&m, &pi).unwrap();
        let mut est = sr.m.clone();
        let mut trace = ContextVector::new(2, 1.0).unwrap();
        sr_td_step(&mut est, 0, 1, 0.3, 0.5, &mut trace).unwrap();
        assert_eq!(est, sr.m);
    }

    #[test]
    fn td_on_swap_chain() {
        let mut est = DMatrix::zeros(2, 2);
        let mut trace = ContextVector::new(2, 1.0).unwrap();
        let mut s = 0;
        for _ in 0..50_000 {
            sr_td_step(&mut est, s, 1 - s, 0.05, 0.5, &mut trace).unwrap();
            s = 1 - s;
        }
        let (m, pi) = swap();
        let sr = sr_closed_form(&m, &pi).unwrap();
        assert!(linalg::max_abs_diff(&est, &sr.m) <= 0.02);
    }

    #[test]
    fn trace_converges_to_same_fixed_point_on_ring() {
        let m = worlds::ring(5, 0.8).unwrap();
        let pi = Policy::deterministic(&[0; 5], 2).unwrap();
        let sr = sr_closed_form(&m, &pi).unwrap();
        for omega in [1.0, 0.5] {
            let rate = LearningRate::Decaying { eta0: 0.1, tau: 1e4 };
            let mut l = SrTdLearner::new(5, 0.8, omega, rate, SrInit::Zeros).unwrap();
            let mut s = 0;
            for _ in 0..50_000 {
                l.observe(s, (s + 1) % 5).unwrap();
                s = (s + 1) % 5;
            }
            assert!(linalg::max_abs_diff(&l.m, &sr.m) < 0.02, "omega {omega}");
        }
    }

    #[test]
    fn gamma_limit() {
        let mut rng = seeded(2);
        let m = worlds::random_mdp(&mut rng, 6, 2, 1e-9).unwrap();
        let pi = worlds::random_policy(&mut rng, 6, 2);
        let sr = sr_closed_form(&m, &pi).unwrap();
        let tp = policy_transition_matrix(&m, &pi).unwrap();
        assert!(linalg::max_abs_diff(&sr.m, &tp) < 1e-6);
    }

    #[test]
    fn gpc_rejects_long_short_horizon() {
        let (m, pi) = swap();
        let sm = exact_action_sm(&m, &pi, 0.5).unwrap();
        let r = m.reward().clone();
        let err = gpc_rollout(std::slice::from_ref(&sm), &sm, &[pi.clone(), pi], 0, 0, 10, &r, &mut seeded(0));
        assert!(err.is_err());
    }

    #[test]
    fn gpc_single_policy_on_swap_chain() {
        let (m, pi) = swap();
        let long = exact_action_sm(&m, &pi, 0.5).unwrap();
        let r = m.reward().clone();
        let mut rng = seeded(4);
        for a in 0..2 {
            let est = gpc_rollout(&[], &long, std::slice::from_ref(&pi), 0, a, 20_000, &r, &mut rng).unwrap();
            assert!(est.within(4.0 / 3.0, 3.0), "{est:?}");
        }
    }

    #[test]
    fn gpc_two_policies_matches_exact() {
        let mut rng = seeded(12);
        let m = worlds::random_mdp(&mut rng, 5, 2, 0.9).unwrap();
        let p1 = worlds::random_deterministic_policy(&mut rng, 5, 2);
        let p2 = worlds::random_policy(&mut rng, 5, 2);
        let beta = 0.6;
        let short = exact_action_sm(&m, &p1, beta).unwrap();
        let long = exact_action_sm(&m, &p2, 0.9).unwrap();
        let est = gpc_rollout(&[short], &long, &[p1.clone(), p2.clone()], 1, 1, 20_000, m.reward(), &mut rng).unwrap();
        let exact = gpc_exact(&m, &[p1, p2], beta, 1, 1).unwrap();
        assert!(est.within(exact, 3.0), "{est:?} vs {exact}");
    }

    #[test]
    fn gpc_exact_single_policy_is_q() {
        let mut rng = seeded(13);
        let m = worlds::random_mdp(&mut rng, 4, 2, 0.7).unwrap();
        let p = worlds::random_policy(&mut rng, 4, 2);
        let v = policy_evaluation_exact(&m, &p).unwrap();
        let q = m.q_from_values(&v);
        assert_abs_diff_eq!(gpc_exact(&m, std::slice::from_ref(&p), 0.3, 2, 1).unwrap(), q[(2, 1)], epsilon = 1e-12);
        // identical policies: switching is invisible
        assert_abs_diff_eq!(gpc_exact(&m, &[p.clone(), p], 0.3, 2, 1).unwrap(), q[(2, 1)], epsilon = 1e-10);
    }
}

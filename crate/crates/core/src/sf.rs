//! Successor features, generalized policy improvement and the option keyboard.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{policy_transition_matrix, Mdp, Policy};

/// `Phi[s][k]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    phi: DMatrix<f64>,
}

impl FeatureMap {
    pub fn new(phi: DMatrix<f64>) -> Result<Self> {
        if !linalg::all_finite(&phi) {
            return Err(Error::NonFinite("features"));
        }
        Ok(Self { phi })
    }

    pub fn one_hot(n_states: usize) -> Self {
        Self { phi: DMatrix::identity(n_states, n_states) }
    }

    pub fn constant(n_states: usize) -> Self {
        Self { phi: DMatrix::from_element(n_states, 1, 1.0) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn n_states(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.phi.ncols()
    }

    pub fn row(&self, s: usize) -> DVector<f64> {
        self.phi.row(s).transpose()
    }

    /// `R = Phi w`
    pub fn reward(&self, w: &TaskVector) -> Result<DVector<f64>> {
        check_task(w, self.n_features())?;
        Ok(&self.phi * &w.w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVector {
    pub w: DVector<f64>,
}

impl TaskVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("task vector"));
        }
        Ok(Self { w: DVector::from_vec(w) })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

fn check_task(w: &TaskVector, k: usize) -> Result<()> {
    if w.len() != k {
        return Err(Error::Shape(format!("task vector has {} entries, features {k}", w.len())));
    }
    Ok(())
}

/// `Psi[a]` is an `|S| x K` matrix of expected discounted feature sums after taking `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfTensor {
    pub psi: Vec<DMatrix<f64>>,
    pub gamma: f64,
    pub policy_id: String,
}

impl SfTensor {
    pub fn zeros(n_states: usize, n_actions: usize, n_features: usize, gamma: f64, policy_id: &str) -> Self {
        Self {
            psi: vec![DMatrix::zeros(n_states, n_features); n_actions],
            gamma,
            policy_id: policy_id.to_string(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.psi[0].nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.psi.len()
    }

    pub fn n_features(&self) -> usize {
        self.psi[0].ncols()
    }

    pub fn row(&self, s: usize, a: usize) -> DVector<f64> {
        self.psi[a].row(s).transpose()
    }

    /// `sum_a pi(a|s) Psi[a](s, .)`
    pub fn marginal(&self, policy: &Policy) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_states(), self.n_features());
        for (a, pa) in self.psi.iter().enumerate() {
            for s in 0..self.n_states() {
                let p = policy.prob(s, a);
                if p != 0.0 {
                    linalg::add_scaled_row(&mut out, pa, s, p);
                }
            }
        }
        out
    }

    /// Average over actions, i.e. the marginal under the uniform policy.
    pub fn action_mean(&self) -> DMatrix<f64> {
        let sum = self.psi.iter().fold(DMatrix::zeros(self.n_states(), self.n_features()), |acc, p| acc + p);
        sum / self.n_actions() as f64
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.policy_id = id.to_string();
        self
    }
}

/// `Psi[a] = T_a (Phi + gamma Psi^pi)` with `(I - gamma T^pi) Psi^pi = T^pi Phi`.
pub fn sf_closed_form(mdp: &Mdp, policy: &Policy, features: &FeatureMap) -> Result<SfTensor> {
    if features.n_states() != mdp.n_states() {
        return Err(Error::Shape("feature rows differ from state count".into()));
    }
    let tp = policy_transition_matrix(mdp, policy)?;
    let n = mdp.n_states();
    let g = mdp.gamma();
    let a = DMatrix::identity(n, n) - &tp * g;
    let marginal = linalg::solve(&a, &(&tp * features.matrix()), "SF closed form")?;
    let next = features.matrix() + marginal * g;
    let psi = mdp.transitions().iter().map(|t| t * &next).collect();
    Ok(SfTensor { psi, gamma: g, policy_id: String::new() })
}

/// Sup-norm of the SF Bellman residual.
pub fn sf_bellman_residual(sf: &SfTensor, mdp: &Mdp, policy: &Policy, features: &FeatureMap) -> f64 {
    let next = features.matrix() + sf.marginal(policy) * sf.gamma;
    sf.psi
        .iter()
        .zip(mdp.transitions())
        .map(|(p, t)| linalg::max_abs_diff(&(t * &next), p))
        .fold(0.0, f64::max)
}

/// `psi(s,a) += eta (phi(s') + gamma psi(s',a') - psi(s,a))`
#[allow(clippy::too_many_arguments)]
pub fn sf_td_step(
    sf: &mut SfTensor,
    s: usize,
    a: usize,
    s_next: usize,
    a_next: usize,
    features: &FeatureMap,
    eta: f64,
) -> Result<()> {
    if features.n_features() != sf.n_features() || features.n_states() != sf.n_states() {
        return Err(Error::Shape("features disagree with SF tensor".into()));
    }
    if a >= sf.n_actions() || a_next >= sf.n_actions() || s >= sf.n_states() || s_next >= sf.n_states() {
        return Err(Error::InvalidArgument("transition out of range".into()));
    }
    let k = sf.n_features();
    let g = sf.gamma;
    let delta: Vec<f64> = (0..k)
        .map(|j| features.matrix()[(s_next, j)] + g * sf.psi[a_next][(s_next, j)] - sf.psi[a][(s, j)])
        .collect();
    for (j, d) in delta.iter().enumerate() {
        sf.psi[a][(s, j)] += eta * d;
    }
    Ok(())
}

/// Expected-target update toward `phi(s') + gamma sum_a' pi(a'|s') psi(s', a')`.
pub fn sf_expected_td_step(
    sf: &mut SfTensor,
    s: usize,
    a: usize,
    s_next: usize,
    policy: &Policy,
    features: &FeatureMap,
    eta: f64,
) -> Result<()> {
    if features.n_features() != sf.n_features() || features.n_states() != sf.n_states() {
        return Err(Error::Shape("features disagree with SF tensor".into()));
    }
    if a >= sf.n_actions() || s >= sf.n_states() || s_next >= sf.n_states() {
        return Err(Error::InvalidArgument("transition out of range".into()));
    }
    let k = sf.n_features();
    let g = sf.gamma;
    let delta: Vec<f64> = (0..k)
        .map(|j| {
            let next: f64 = (0..sf.n_actions()).map(|b| policy.prob(s_next, b) * sf.psi[b][(s_next, j)]).sum();
            features.matrix()[(s_next, j)] + g * next - sf.psi[a][(s, j)]
        })
        .collect();
    for (j, d) in delta.iter().enumerate() {
        sf.psi[a][(s, j)] += eta * d;
    }
    Ok(())
}

/// Learns the SFs of `policy` along one stream driven by uniformly random
/// actions, using expected targets so every action is learned equally often.
///
/// Terminal states restart the walk from a uniformly drawn state once their
/// own row has been updated.
pub fn learn_sf_stream(
    mdp: &Mdp,
    policy: &Policy,
    features: &FeatureMap,
    steps: usize,
    rate: crate::mdp::LearningRate,
    start: usize,
    rng: &mut crate::rng::Rng,
) -> Result<SfTensor> {
    rate.validate()?;
    let (n, n_a) = (mdp.n_states(), mdp.n_actions());
    if start >= n || features.n_states() != n {
        return Err(Error::Shape("start or features do not match the MDP".into()));
    }
    let mut sf = SfTensor::zeros(n, n_a, features.n_features(), mdp.gamma(), "td");
    let mut visits = vec![0u64; n * n_a];
    let mut s = start;
    for t in 0..steps as u64 {
        let a = rand::Rng::random_range(rng, 0..n_a);
        let s2 = mdp.step(s, a, rng);
        let eta = rate.rate(t, visits[s * n_a + a]);
        sf_expected_td_step(&mut sf, s, a, s2, policy, features, eta)?;
        visits[s * n_a + a] += 1;
        s = if mdp.is_terminal(s) { rand::Rng::random_range(rng, 0..n) } else { s2 };
    }
    Ok(sf)
}

/// `Q(s, a) = psi(s, a)^T w`
pub fn q_from_sf(sf: &SfTensor, w: &TaskVector) -> Result<DMatrix<f64>> {
    check_task(w, sf.n_features())?;
    let mut q = DMatrix::zeros(sf.n_states(), sf.n_actions());
    for (a, p) in sf.psi.iter().enumerate() {
        q.set_column(a, &(p * &w.w));
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpiChoice {
    pub action: usize,
    pub policy: usize,
    pub q: f64,
}

fn check_library(sfs: &[SfTensor]) -> Result<()> {
    let first = sfs.first().ok_or(Error::EmptyLibrary)?;
    for sf in sfs {
        if sf.n_states() != first.n_states() || sf.n_actions() != first.n_actions() || sf.n_features() != first.n_features() {
            return Err(Error::Shape("library SFs have different shapes".into()));
        }
    }
    Ok(())
}

fn best_pair(sfs: &[SfTensor], w: &DVector<f64>, s: usize) -> GpiChoice {
    let mut best = GpiChoice { action: 0, policy: 0, q: f64::NEG_INFINITY };
    for (i, sf) in sfs.iter().enumerate() {
        for a in 0..sf.n_actions() {
            let q = sf.psi[a].row(s).transpose().dot(w);
            if q > best.q {
                best = GpiChoice { action: a, policy: i, q };
            }
        }
    }
    best
}

/// `argmax_a max_i psi_i(s, a)^T w`; ties go to the lower policy, then the lower action.
pub fn gpi_action(sfs: &[SfTensor], w: &TaskVector, s: usize) -> Result<GpiChoice> {
    check_library(sfs)?;
    check_task(w, sfs[0].n_features())?;
    if s >= sfs[0].n_states() {
        return Err(Error::InvalidArgument(format!("state {s} out of range")));
    }
    Ok(best_pair(sfs, &w.w, s))
}

/// Deterministic GPI policy plus the winning library index per state.
pub fn gpi_policy(sfs: &[SfTensor], w: &TaskVector) -> Result<(Policy, Vec<usize>)> {
    check_library(sfs)?;
    let choices = (0..sfs[0].n_states()).map(|s| gpi_action(sfs, w, s)).collect::<Result<Vec<_>>>()?;
    let actions: Vec<usize> = choices.iter().map(|c| c.action).collect();
    let winners = choices.iter().map(|c| c.policy).collect();
    Ok((Policy::deterministic(&actions, sfs[0].n_actions())?, winners))
}

/// Distance from `w` to the span of the training tasks (least squares).
pub fn span_residual(train: &[TaskVector], w: &TaskVector) -> Result<f64> {
    if train.is_empty() {
        return Ok(w.w.norm());
    }
    let k = w.len();
    let mut basis = DMatrix::zeros(k, train.len());
    for (i, t) in train.iter().enumerate() {
        check_task(t, k)?;
        basis.set_column(i, &t.w);
    }
    let svd = basis.clone().svd(true, true);
    let coef = svd.solve(&w.w, 1e-12).map_err(|e| Error::Singular(e.to_string()))?;
    Ok((&basis * coef - &w.w).norm())
}

/// The GPI guarantee covers tasks in the span of the training tasks. Outside
/// the span the operator still runs; callers can use this to warn.
pub fn in_span(train: &[TaskVector], w: &TaskVector) -> Result<bool> {
    Ok(span_residual(train, w)? <= 1e-9 * (1.0 + w.w.norm()))
}

/// GPI with a state-dependent task vector `g(s, w)`.
pub fn option_keyboard_action<G>(sfs: &[SfTensor], g: G, s: usize, w: &TaskVector) -> Result<GpiChoice>
where
    G: Fn(usize, &TaskVector) -> TaskVector,
{
    let ws = g(s, w);
    gpi_action(sfs, &ws, s)
}

/// Keyboard that always plays `w` itself.
pub fn ok_constant(_s: usize, w: &TaskVector) -> TaskVector {
    w.clone()
}

/// Keyboard that flips the sign of one feature while inside `region`.
pub fn ok_region_switch(region: Vec<bool>, feature: usize) -> impl Fn(usize, &TaskVector) -> TaskVector {
    move |s, w| {
        let mut out = w.clone();
        if region.get(s).copied().unwrap_or(false) && feature < out.len() {
            out.w[feature] = -out.w[feature];
        }
        out
    }
}

/// `S(s1, s2) = psi_bar(s1)^T psi_bar(s2)` with `psi_bar` the action average.
pub fn sf_similarity(sf_uniform: &SfTensor, s1: usize, s2: usize) -> f64 {
    let mean = sf_uniform.action_mean();
    mean.row(s1).dot(&mean.row(s2))
}

/// `S(s1, a, s2) = psi(s1, a)^T psi_bar(s2)`
pub fn sf_similarity_action(sf_uniform: &SfTensor, s1: usize, a: usize, s2: usize) -> f64 {
    let mean = sf_uniform.action_mean();
    sf_uniform.psi[a].row(s1).dot(&mean.row(s2))
}

/// Full state-similarity kernel.
pub fn sf_similarity_matrix(sf_uniform: &SfTensor) -> DMatrix<f64> {
    let mean = sf_uniform.action_mean();
    &mean * mean.transpose()
}

/// Similarity rescaled to unit self-similarity (cosine of SF rows).
pub fn sf_cosine_matrix(sf_uniform: &SfTensor) -> DMatrix<f64> {
    let raw = sf_similarity_matrix(sf_uniform);
    let norms: Vec<f64> = raw.diagonal().iter().map(|d| d.max(0.0).sqrt()).collect();
    DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| {
        let z = norms[i] * norms[j];
        if z > 0.0 { raw[(i, j)] / z } else { 0.0 }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskFit {
    pub w: TaskVector,
    /// Sum of squared residuals.
    pub residual: f64,
}

/// Ridge regularization used when none is requested explicitly.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Least-squares `w` for `r ~ phi(s)^T w`; `ridge = 0` disables regularization.
pub fn fit_task_weights(features: &FeatureMap, samples: &[(usize, f64)], ridge: f64) -> Result<TaskFit> {
    let k = features.n_features();
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument("ridge must be >= 0".into()));
    }
    let mut x = DMatrix::zeros(samples.len(), k);
    let mut y = DVector::zeros(samples.len());
    for (i, &(s, r)) in samples.iter().enumerate() {
        if s >= features.n_states() {
            return Err(Error::InvalidArgument(format!("state {s} out of range")));
        }
        x.set_row(i, &features.matrix().row(s));
        y[i] = r;
    }
    let gram = x.transpose() * &x + DMatrix::identity(k, k) * ridge;
    if ridge == 0.0 {
        let sv = x.clone().svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&v| v > 1e-10 * max.max(1e-300)).count();
        if samples.len() < k || rank < k {
            return Err(Error::Singular(format!("design has rank {rank} for {k} features; enable ridge")));
        }
    }
    let w = linalg::solve_vec(&gram, &(x.transpose() * &y), "task weight normal equations")?;
    let residual = (&x * &w - y).norm_squared();
    Ok(TaskFit { w: TaskVector { w }, residual })
}

/// JSON layout of an SF library, `psi[s][a][k]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SfDump {
    pub policy_id: String,
    pub gamma: f64,
    pub psi: Vec<Vec<Vec<f64>>>,
}

pub fn library_to_json(sfs: &[SfTensor]) -> Result<String> {
    let dumps: Vec<SfDump> = sfs
        .iter()
        .map(|sf| SfDump {
            policy_id: sf.policy_id.clone(),
            gamma: sf.gamma,
            psi: (0..sf.n_states())
                .map(|s| (0..sf.n_actions()).map(|a| sf.psi[a].row(s).iter().cloned().collect()).collect())
                .collect(),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&dumps)?)
}

pub fn library_from_json(text: &str) -> Result<Vec<SfTensor>> {
    let dumps: Vec<SfDump> = serde_json::from_str(text)?;
    dumps
        .into_iter()
        .map(|d| {
            let n = d.psi.len();
            let n_a = d.psi.first().map_or(0, |r| r.len());
            let k = d.psi.first().and_then(|r| r.first()).map_or(0, |r| r.len());
            let mut psi = vec![DMatrix::zeros(n, k); n_a];
            for (s, per_a) in d.psi.iter().enumerate() {
                if per_a.len() != n_a {
                    return Err(Error::Shape("ragged SF dump".into()));
                }
                for (a, row) in per_a.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::Shape("ragged SF dump".into()));
                    }
                    for (j, &x) in row.iter().enumerate() {
                        psi[a][(s, j)] = x;
                    }
                }
            }
            Ok(SfTensor { psi, gamma: d.gamma, policy_id: d.policy_id })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::policy_evaluation_exact;
    use crate::rng::seeded;
    use crate::sr::{q_from_action_sr, sr_action_closed_form};
    use crate::worlds;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_hot_recovers_action_sr() {
        let mut rng = seeded(21);
        let m = worlds::random_mdp(&mut rng, 6, 3, 0.85).unwrap();
        let pi = worlds::random_policy(&mut rng, 6, 3);
        let sf = sf_closed_form(&m, &pi, &FeatureMap::one_hot(6)).unwrap();
        let asr = sr_action_closed_form(&m, &pi).unwrap();
        for a in 0..3 {
            assert!(linalg::max_abs_diff(&sf.psi[a], &asr.m[a]) < 1e-8);
        }
        assert!(sf_bellman_residual(&sf, &m, &pi, &FeatureMap::one_hot(6)) < 1e-10);
    }

    #[test]
    fn constant_feature_is_geometric_series() {
        let mut rng = seeded(22);
        let m = worlds::random_mdp(&mut rng, 5, 2, 0.75).unwrap();
        let pi = worlds::random_policy(&mut rng, 5, 2);
        let sf = sf_closed_form(&m, &pi, &FeatureMap::constant(5)).unwrap();
        for p in &sf.psi {
            assert!(p.iter().all(|x| (x - 4.0).abs() < 1e-10));
        }
    }

    #[test]
    fn swap_chain_sf_rows_are_sr_rows() {
        let m = worlds::swap_chain(0.5, &[0.0, 1.0]).unwrap();
        let pi = Policy::uniform(2, 2);
        let sf = sf_closed_form(&m, &pi, &FeatureMap::one_hot(2)).unwrap();
        assert_abs_diff_eq!(sf.psi[0][(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sf.psi[1][(0, 1)], 4.0 / 3.0, epsilon = 1e-14);
        let w = TaskVector::new(vec![0.0, 1.0]).unwrap();
        let q = q_from_sf(&sf, &w).unwrap();
        let q_sr = q_from_action_sr(&sr_action_closed_form(&m, &pi).unwrap(), m.reward()).unwrap();
        assert!((&q - &q_sr).amax() < 1e-12);
        assert_abs_diff_eq!(sf_similarity(&sf, 0, 0), 20.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sf_similarity(&sf, 0, 1), 16.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn q_from_fitted_weights_is_exact() {
        let mut rng = seeded(23);
        let m = worlds::random_mdp(&mut rng, 6, 2, 0.9).unwrap();
        let pi = worlds::random_policy(&mut rng, 6, 2);
        let phi = FeatureMap::one_hot(6);
        let samples: Vec<(usize, f64)> = (0..6).map(|s| (s, m.reward()[s])).collect();
        let fit = fit_task_weights(&phi, &samples, 0.0).unwrap();
        assert!((&fit.w.w - m.reward()).amax() < 1e-12);
        let q = q_from_sf(&sf_closed_form(&m, &pi, &phi).unwrap(), &fit.w).unwrap();
        let v = policy_evaluation_exact(&m, &pi).unwrap();
        assert!((&q - m.q_from_values(&v)).amax() < 1e-10);
        let zero = q_from_sf(&sf_closed_form(&m, &pi, &phi).unwrap(), &TaskVector::new(vec![0.0; 6]).unwrap()).unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn fit_examples() {
        let phi = FeatureMap::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])).unwrap();
        let fit = fit_task_weights(&phi, &[(0, 1.0), (1, 3.0)], DEFAULT_RIDGE).unwrap();
        assert!((fit.w.w[0] - 1.0).abs() < 1e-7 && (fit.w.w[1] - 2.0).abs() < 1e-7);
        assert!(fit_task_weights(&phi, &[(0, 1.0)], 0.0).is_err());
        assert!(fit_task_weights(&phi, &[(0, 1.0), (0, 2.0)], 0.0).is_err());
        assert!(fit_task_weights(&phi, &[(0, 1.0)], 1e-3).is_ok());
    }

    #[test]
    fn gpi_tie_breaking_and_single_policy() {
        let m = worlds::swap_chain(0.5, &[0.0, 1.0]).unwrap();
        let pi = Policy::uniform(2, 2);
        let sf = sf_closed_form(&m, &pi, &FeatureMap::one_hot(2)).unwrap();
        let w = TaskVector::new(vec![0.0, 1.0]).unwrap();
        // both actions and both copies tie: lowest indices win
        let c = gpi_action(&[sf.clone(), sf.clone()], &w, 0).unwrap();
        assert_eq!((c.policy, c.action), (0, 0));
        let zero = TaskVector::new(vec![0.0, 0.0]).unwrap();
        let c = option_keyboard_action(std::slice::from_ref(&sf), |_, _| zero.clone(), 1, &w).unwrap();
        assert_eq!((c.policy, c.action), (0, 0));
        assert!(matches!(gpi_action(&[], &w, 0), Err(Error::EmptyLibrary)));
    }

    #[test]
    fn span_check() {
        let t = vec![TaskVector::new(vec![1.0, 0.0, 0.0]).unwrap(), TaskVector::new(vec![0.0, 1.0, 0.0]).unwrap()];
        assert!(in_span(&t, &TaskVector::new(vec![2.0, -1.0, 0.0]).unwrap()).unwrap());
        assert!(!in_span(&t, &TaskVector::new(vec![1.0, 1.0, 1.0]).unwrap()).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = seeded(3);
        let m = worlds::random_mdp(&mut rng, 3, 2, 0.5).unwrap();
        let sf = sf_closed_form(&m, &Policy::uniform(3, 2), &FeatureMap::one_hot(3)).unwrap().with_id("uniform");
        let back = library_from_json(&library_to_json(std::slice::from_ref(&sf)).unwrap()).unwrap();
        assert_eq!(back[0].policy_id, "uniform");
        assert!(linalg::max_abs_diff(&back[0].psi[1], &sf.psi[1]) == 0.0);
    }
}

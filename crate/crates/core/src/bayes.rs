//! Bayesian associative learning: Kalman filter and Kalman TD, Chinese
//! restaurant process priors and a context-switching successor-feature learner.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, symmetrize};
use crate::rng;

/// Covariances with an eigenvalue below this are rejected.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Process noise added to the covariance before each observation.
    pub q: f64,
    /// Observation noise variance.
    pub noise: f64,
}

/// Per-step quantities of a Kalman update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KalmanDiag {
    pub delta: f64,
    pub lambda: f64,
    pub gain: DVector<f64>,
}

fn check_cov(cov: &DMatrix<f64>) -> Result<()> {
    if !cov.is_square() {
        return Err(Error::Shape("covariance must be square".into()));
    }
    if !crate::linalg::all_finite(cov) {
        return Err(Error::NonFinite("covariance"));
    }
    let asym = crate::linalg::max_abs_diff(cov, &cov.transpose());
    if asym > 1e-9 * (1.0 + crate::linalg::max_abs(cov)) {
        return Err(Error::NotPsd(asym));
    }
    let m = min_eigenvalue(cov);
    if m < -PSD_TOL {
        return Err(Error::NotPsd(m));
    }
    Ok(())
}

/// Shared update core: inflates `cov` by `q`, returns `(P, lambda, k)`.
fn gain(cov: &DMatrix<f64>, q: f64, noise: f64, h: &DVector<f64>) -> (DMatrix<f64>, f64, DVector<f64>) {
    let mut p = cov.clone();
    for i in 0..p.nrows() {
        p[(i, i)] += q;
    }
    let ph = &p * h;
    let lambda = h.dot(&ph) + noise;
    let k = ph / lambda;
    (p, lambda, k)
}

fn shrink(p: DMatrix<f64>, lambda: f64, k: &DVector<f64>) -> DMatrix<f64> {
    symmetrize(&(p - k * k.transpose() * lambda))
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, q: f64, noise: f64) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::Shape(format!("mean has {} entries, covariance is {}x{}", mean.len(), cov.nrows(), cov.ncols())));
        }
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!("process noise {q}")));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("observation noise {noise}")));
        }
        check_cov(&cov)?;
        Ok(Self { mean, cov, q, noise })
    }

    /// Zero mean, identity covariance, `q = 0.01`, unit observation noise.
    pub fn default_prior(dim: usize) -> Self {
        Self::isotropic(dim, 1.0, 0.01, 1.0).expect("valid defaults")
    }

    /// Zero mean, `prior_var * I` covariance.
    pub fn isotropic(dim: usize, prior_var: f64, q: f64, noise: f64) -> Result<Self> {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim) * prior_var, q, noise)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn predict(&self, phi: &DVector<f64>) -> f64 {
        phi.dot(&self.mean)
    }

    /// Adds `n * q` to the diagonal without an observation.
    pub fn elapse(&mut self, n: usize) {
        for i in 0..self.dim() {
            self.cov[(i, i)] += self.q * n as f64;
        }
    }
}

/// One Kalman filter update on reward `r` with features `phi`.
pub fn kalman_step(belief: &mut GaussianBelief, phi: &DVector<f64>, r: f64) -> Result<KalmanDiag> {
    if phi.len() != belief.dim() {
        return Err(Error::Shape(format!("{} features for a {}-dim belief", phi.len(), belief.dim())));
    }
    check_cov(&belief.cov)?;
    let delta = r - belief.predict(phi);
    let (p, lambda, k) = gain(&belief.cov, belief.q, belief.noise, phi);
    belief.mean += &k * delta;
    belief.cov = shrink(p, lambda, &k);
    Ok(KalmanDiag { delta, lambda, gain: k })
}

/// Temporal-difference features `phi - gamma * phi_next`.
pub fn td_features(phi: &DVector<f64>, phi_next: &DVector<f64>, gamma: f64) -> DVector<f64> {
    phi - phi_next * gamma
}

/// Kalman TD: the filter applied to `phi - gamma * phi_next`.
pub fn kalman_td_step(
    belief: &mut GaussianBelief,
    phi: &DVector<f64>,
    phi_next: &DVector<f64>,
    gamma: f64,
    r: f64,
) -> Result<KalmanDiag> {
    if phi_next.len() != phi.len() {
        return Err(Error::Shape("feature vectors differ in length".into()));
    }
    kalman_step(belief, &td_features(phi, phi_next, gamma), r)
}

/// Conjugate Bayesian linear regression posterior `(mean, cov)`.
///
/// Rows of `x` are feature vectors, `y` the targets.
pub fn batch_regression(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    noise: f64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if x.nrows() != y.len() || x.ncols() != prior_mean.len() {
        return Err(Error::Shape("design matrix does not match targets or prior".into()));
    }
    let prior_prec = prior_cov.clone().try_inverse().ok_or(Error::Singular("prior covariance".into()))?;
    let prec = &prior_prec + x.transpose() * x / noise;
    let cov = symmetrize(&prec.try_inverse().ok_or(Error::Singular("posterior precision".into()))?);
    let mean = &cov * (prior_prec * prior_mean + x.transpose() * y / noise);
    Ok((mean, cov))
}

fn normalize(weights: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegeneratePrior);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn check_prior_args(counts: &[f64], alpha: f64, nu: f64) -> Result<()> {
    if !(alpha >= 0.0) || !(nu >= 0.0) || !alpha.is_finite() || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha {alpha}, nu {nu}")));
    }
    if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
    }
    Ok(())
}

/// CRP prior over existing contexts plus one trailing new-context slot.
pub fn crp_prior(counts: &[f64], alpha: f64) -> Result<Vec<f64>> {
    sticky_crp_prior(counts, alpha, 0.0, None)
}

/// CRP with an extra `nu` on the previous context.
pub fn sticky_crp_prior(counts: &[f64], alpha: f64, nu: f64, prev: Option<usize>) -> Result<Vec<f64>> {
    check_prior_args(counts, alpha, nu)?;
    if let Some(p) = prev {
        if p >= counts.len() {
            return Err(Error::InvalidArgument(format!("previous context {p} of {}", counts.len())));
        }
    }
    let mut w: Vec<f64> = counts.to_vec();
    if let Some(p) = prev {
        w[p] += nu;
    }
    w.push(alpha);
    normalize(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextParams {
    pub sigma_phi: f64,
    /// Prior mean of every SF weight.
    pub mu0: f64,
    /// Prior variance scale: `Sigma0 = sigma0 * I`.
    pub sigma0: f64,
    pub q: f64,
    pub alpha: f64,
    pub nu: f64,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self { sigma_phi: 0.1, mu0: 0.0, sigma0: 1.0, q: 0.01, alpha: 1.0, nu: 5.0 }
    }
}

impl ContextParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_phi > 0.0
            && self.sigma0 > 0.0
            && self.q >= 0.0
            && self.alpha >= 0.0
            && self.nu >= 0.0
            && [self.sigma_phi, self.mu0, self.sigma0, self.q, self.alpha, self.nu].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("context parameters {self:?}")))
        }
    }
}

/// SF weights of one context: column `j` predicts feature `j`; one covariance
/// is shared across columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Context {
    pub weights: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub count: f64,
}

impl Context {
    fn prior(dim: usize, p: &ContextParams) -> Self {
        Self {
            weights: DMatrix::from_element(dim, dim, p.mu0),
            cov: DMatrix::identity(dim, dim) * p.sigma0,
            count: 0.0,
        }
    }

    fn log_likelihood(&self, h: &DVector<f64>, phi: &DVector<f64>, p: &ContextParams) -> f64 {
        let (_, var, _) = gain(&self.cov, p.q, p.sigma_phi * p.sigma_phi, h);
        let pred = self.weights.transpose() * h;
        let ln_norm = (std::f64::consts::TAU * var).ln();
        (0..phi.len()).map(|j| -0.5 * (ln_norm + (phi[j] - pred[j]).powi(2) / var)).sum()
    }

    fn update(&mut self, h: &DVector<f64>, phi: &DVector<f64>, p: &ContextParams) -> DVector<f64> {
        let delta = phi - self.weights.transpose() * h;
        let (pm, lambda, k) = gain(&self.cov, p.q, p.sigma_phi * p.sigma_phi, h);
        self.weights += &k * delta.transpose();
        self.cov = shrink(pm, lambda, &k);
        delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextStep {
    /// Posterior over the contexts that existed before the step, plus a trailing new slot.
    pub posterior: Vec<f64>,
    pub assigned: usize,
    pub created: bool,
    /// Per-feature prediction errors of the assigned context before its update.
    pub delta: DVector<f64>,
}

/// Context-dependent Kalman TD learner of successor features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextModel {
    pub params: ContextParams,
    pub dim: usize,
    pub contexts: Vec<Context>,
    pub prev: Option<usize>,
}

impl ContextModel {
    pub fn new(dim: usize, params: ContextParams) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        Ok(Self { params, dim, contexts: Vec::new(), prev: None })
    }

    pub fn counts(&self) -> Vec<f64> {
        self.contexts.iter().map(|c| c.count).collect()
    }

    /// Posterior over contexts (and a new one) for the transition, without updating.
    pub fn posterior(&self, phi: &DVector<f64>, phi_next: &DVector<f64>, gamma: f64) -> Result<Vec<f64>> {
        if phi.len() != self.dim || phi_next.len() != self.dim {
            return Err(Error::Shape(format!("features must have {} entries", self.dim)));
        }
        let h = td_features(phi, phi_next, gamma);
        let prior = sticky_crp_prior(&self.counts(), self.params.alpha, self.params.nu, self.prev)?;
        let fresh = Context::prior(self.dim, &self.params);
        let log_post: Vec<f64> = prior
            .iter()
            .enumerate()
            .map(|(k, &pk)| {
                let ctx = self.contexts.get(k).unwrap_or(&fresh);
                if pk > 0.0 {
                    pk.ln() + ctx.log_likelihood(&h, phi, &self.params)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        normalize(log_post.iter().map(|l| (l - top).exp()).collect())
    }

    /// Infers the context of one transition, assigns it to the MAP context and
    /// updates that context's weights.
    pub fn context_step(&mut self, phi: &DVector<f64>, phi_next: &DVector<f64>, gamma: f64) -> Result<ContextStep> {
        let posterior = self.posterior(phi, phi_next, gamma)?;
        let mut assigned = 0;
        for (k, &p) in posterior.iter().enumerate() {
            if p > posterior[assigned] {
                assigned = k;
            }
        }
        let created = assigned == self.contexts.len();
        if created {
            self.contexts.push(Context::prior(self.dim, &self.params));
        }
        let h = td_features(phi, phi_next, gamma);
        let ctx = &mut self.contexts[assigned];
        let delta = ctx.update(&h, phi, &self.params);
        ctx.count += 1.0;
        self.prev = Some(assigned);
        Ok(ContextStep { posterior, assigned, created, delta })
    }

    /// Time passing without observations: every covariance grows by `n * q * I`.
    pub fn elapse(&mut self, n: usize) {
        let inc = self.params.q * n as f64;
        for c in &mut self.contexts {
            for i in 0..self.dim {
                c.cov[(i, i)] += inc;
            }
        }
    }
}

/// One conditioning trial. Without `next` the trial is a plain Kalman update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub phi: Vec<f64>,
    #[serde(default)]
    pub next: Option<Vec<f64>>,
    pub reward: f64,
}

impl Trial {
    pub fn plain(phi: &[f64], reward: f64) -> Self {
        Self { phi: phi.to_vec(), next: None, reward }
    }

    pub fn td(phi: &[f64], next: &[f64], reward: f64) -> Self {
        Self { phi: phi.to_vec(), next: Some(next.to_vec()), reward }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub delta: f64,
    pub gain: Vec<f64>,
}

pub fn run_trials(belief: &mut GaussianBelief, trials: &[Trial], gamma: f64) -> Result<Vec<TrialRecord>> {
    trials
        .iter()
        .map(|t| {
            let phi = DVector::from_column_slice(&t.phi);
            let diag = match &t.next {
                Some(n) => kalman_td_step(belief, &phi, &DVector::from_column_slice(n), gamma, t.reward)?,
                None => kalman_step(belief, &phi, t.reward)?,
            };
            Ok(TrialRecord {
                mean: belief.mean.iter().cloned().collect(),
                var: belief.cov.diagonal().iter().cloned().collect(),
                delta: diag.delta,
                gain: diag.gain.iter().cloned().collect(),
            })
        })
        .collect()
}

/// Row per trial: means, then variances, then delta.
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let d = records.first().map_or(0, |r| r.mean.len());
    let mut m = DMatrix::zeros(records.len(), 2 * d + 1);
    for (i, r) in records.iter().enumerate() {
        for j in 0..d {
            m[(i, j)] = r.mean[j];
            m[(i, d + j)] = r.var[j];
        }
        m[(i, 2 * d)] = r.delta;
    }
    crate::csv::matrix_to_string(&m, &[("columns", format!("mean[{d}],var[{d}],delta"))])
}

fn noisy(rng: &mut rng::Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("positive sd").sample(rng)
    } else {
        0.0
    }
}

/// Compound `[1,1]` reinforced, then `[1,0]` reinforced. Rewards carry noise.
pub fn backward_blocking_trials(seed: u64, n_compound: usize, n_single: usize, noise_sd: f64) -> (Vec<Trial>, Vec<Trial>) {
    let mut r = rng::stream(seed, 0xb10c);
    let p1 = (0..n_compound).map(|_| Trial::plain(&[1.0, 1.0], 1.0 + noisy(&mut r, noise_sd))).collect();
    let p2 = (0..n_single).map(|_| Trial::plain(&[1.0, 0.0], 1.0 + noisy(&mut r, noise_sd))).collect();
    (p1, p2)
}

/// Stimulus `A` presented unreinforced `n_pre` times, then `A` and a novel
/// `B` each reinforced.
pub fn latent_inhibition_trials(seed: u64, n_pre: usize, noise_sd: f64) -> (Vec<Trial>, Trial, Trial) {
    let mut r = rng::stream(seed, 0x1a7e);
    let pre = (0..n_pre).map(|_| Trial::plain(&[1.0, 0.0], noisy(&mut r, noise_sd))).collect();
    let a = Trial::plain(&[1.0, 0.0], 1.0 + noisy(&mut r, noise_sd));
    let b = Trial::plain(&[0.0, 1.0], 1.0 + noisy(&mut r, noise_sd));
    (pre, a, b)
}

/// `B` followed by reward, then `A -> B` unreinforced. Features are `[A, B]`.
pub fn second_order_trials(seed: u64, n_first: usize, n_second: usize, noise_sd: f64) -> (Vec<Trial>, Vec<Trial>) {
    let mut r = rng::stream(seed, 0x5ec0);
    let p1 = (0..n_first).map(|_| Trial::td(&[0.0, 1.0], &[0.0, 0.0], 1.0 + noisy(&mut r, noise_sd))).collect();
    let p2 = (0..n_second).map(|_| Trial::td(&[1.0, 0.0], &[0.0, 1.0], noisy(&mut r, noise_sd))).collect();
    (p1, p2)
}

/// A random cyclic successor map over `n` states.
pub fn random_cycle(n: usize, r: &mut rng::Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(r);
    let mut next = vec![0; n];
    for i in 0..n {
        next[order[i]] = order[(i + 1) % n];
    }
    next
}

fn one_hot(n: usize, s: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[s] = 1.0;
    v
}

/// Walks the cycle for `steps` transitions from `start`, feeding one-hot
/// features; returns the assigned context of each step and the final state.
pub fn feed_cycle(
    model: &mut ContextModel,
    next: &[usize],
    start: usize,
    steps: usize,
    gamma: f64,
) -> Result<(Vec<usize>, usize)> {
    let n = next.len();
    let mut s = start;
    let mut assigned = Vec::with_capacity(steps);
    for _ in 0..steps {
        let step = model.context_step(&one_hot(n, s), &one_hot(n, next[s]), gamma)?;
        assigned.push(step.assigned);
        s = next[s];
    }
    Ok((assigned, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextProtocol {
    pub params: ContextParams,
    pub n_states: usize,
    pub gamma: f64,
    pub train_steps: usize,
    pub test_steps: usize,
    /// Delay applied through covariance inflation before the delayed tests.
    pub delay: usize,
    pub reminder_steps: usize,
}

impl Default for ContextProtocol {
    fn default() -> Self {
        // Slow drift keeps the one-hot SF beliefs sharp between revisits.
        let params = ContextParams { q: 1e-4, ..ContextParams::default() };
        Self { params, n_states: 8, gamma: 0.8, train_steps: 400, test_steps: 5, delay: 300, reminder_steps: 8 }
    }
}

/// Steps after a switch of world until a context other than the training one
/// is assigned; `None` if it never happens within `max_steps`.
pub fn switch_detection_delay(seed: u64, proto: &ContextProtocol, max_steps: usize) -> Result<Option<usize>> {
    let mut r = rng::stream(seed, 0xc7);
    let world_a = random_cycle(proto.n_states, &mut r);
    let world_b = random_cycle(proto.n_states, &mut r);
    let mut model = ContextModel::new(proto.n_states, proto.params)?;
    let (train, s) = feed_cycle(&mut model, &world_a, 0, proto.train_steps, proto.gamma)?;
    let home = *train.last().expect("training steps");
    let (test, _) = feed_cycle(&mut model, &world_b, s, max_steps, proto.gamma)?;
    Ok(test.iter().position(|&k| k != home).map(|i| i + 1))
}

/// Fraction of test transitions in the new world assigned to the training context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReminderOutcome {
    pub immediate: f64,
    pub delayed: f64,
    pub reminded: f64,
}

/// Train in world A, then test in world B immediately, after a delay, and
/// after a delay followed by a brief return to A.
pub fn reminder_protocol(seed: u64, proto: &ContextProtocol) -> Result<ReminderOutcome> {
    let mut r = rng::stream(seed, 0x7e);
    let world_a = random_cycle(proto.n_states, &mut r);
    let world_b = random_cycle(proto.n_states, &mut r);
    let mut trained = ContextModel::new(proto.n_states, proto.params)?;
    let (train, s_end) = feed_cycle(&mut trained, &world_a, 0, proto.train_steps, proto.gamma)?;
    let home = *train.last().expect("training steps");
    let test = |mut m: ContextModel, start: usize| -> Result<f64> {
        let (assigned, _) = feed_cycle(&mut m, &world_b, start, proto.test_steps, proto.gamma)?;
        Ok(assigned.iter().filter(|&&k| k == home).count() as f64 / proto.test_steps.max(1) as f64)
    };
    let immediate = test(trained.clone(), 0)?;
    let mut delayed_model = trained.clone();
    delayed_model.elapse(proto.delay);
    let delayed = test(delayed_model.clone(), 0)?;
    let mut reminded_model = delayed_model;
    feed_cycle(&mut reminded_model, &world_a, s_end, proto.reminder_steps, proto.gamma)?;
    let reminded = test(reminded_model, 0)?;
    Ok(ReminderOutcome { immediate, delayed, reminded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn scalar_update_by_hand() {
        let mut b = GaussianBelief::isotropic(1, 1.0, 0.0, 1.0).unwrap();
        let d = kalman_step(&mut b, &v(&[1.0]), 1.0).unwrap();
        assert_eq!(d.delta, 1.0);
        assert_eq!(d.lambda, 2.0);
        assert_eq!(d.gain[0], 0.5);
        assert_eq!(b.mean[0], 0.5);
        assert_eq!(b.cov[(0, 0)], 0.5);
    }

    #[test]
    fn zero_features_only_inflate() {
        let mut b = GaussianBelief::isotropic(2, 1.0, 0.01, 1.0).unwrap();
        let d = kalman_step(&mut b, &v(&[0.0, 0.0]), 3.0).unwrap();
        assert_eq!(d.gain, v(&[0.0, 0.0]));
        assert_eq!(b.mean, v(&[0.0, 0.0]));
        assert!((b.cov[(0, 0)] - 1.01).abs() < 1e-15);
    }

    #[test]
    fn repeated_trials_shrink_variance() {
        let mut b = GaussianBelief::isotropic(2, 1.0, 0.0, 0.5).unwrap();
        let mut last = b.cov.diagonal();
        for _ in 0..20 {
            kalman_step(&mut b, &v(&[1.0, 1.0]), 1.0).unwrap();
            let d = b.cov.diagonal();
            assert!(d[0] < last[0] && d[1] < last[1]);
            last = d;
        }
    }

    #[test]
    fn rejects_bad_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(GaussianBelief::new(DVector::zeros(2), cov, 0.0, 1.0), Err(Error::NotPsd(_))));
        let mut b = GaussianBelief::isotropic(2, 1.0, 0.0, 1.0).unwrap();
        b.cov[(0, 0)] = -1.0;
        assert!(kalman_step(&mut b, &v(&[1.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn crp_examples() {
        assert_eq!(crp_prior(&[], 1.0).unwrap(), vec![1.0]);
        assert_eq!(crp_prior(&[2.0, 1.0], 1.0).unwrap(), vec![0.5, 0.25, 0.25]);
        let s = sticky_crp_prior(&[2.0, 1.0], 1.0, 1.0, Some(1)).unwrap();
        for (a, b) in s.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(sticky_crp_prior(&[3.0, 1.0], 2.0, 0.0, Some(0)).unwrap(), crp_prior(&[3.0, 1.0], 2.0).unwrap());
        assert!(matches!(crp_prior(&[0.0], 0.0), Err(Error::DegeneratePrior)));
        assert!(crp_prior(&[1.0], -1.0).is_err());
        assert!(sticky_crp_prior(&[1.0], 1.0, 1.0, Some(3)).is_err());
    }

    #[test]
    fn single_world_stays_in_one_context() {
        let mut m = ContextModel::new(6, ContextParams::default()).unwrap();
        let mut r = rng::seeded(4);
        let world = random_cycle(6, &mut r);
        let (assigned, _) = feed_cycle(&mut m, &world, 0, 300, 0.5).unwrap();
        let home = assigned[299];
        assert!(assigned[200..].iter().all(|&k| k == home));
        let p = m.posterior(&one_hot(6, 0), &one_hot(6, world[0]), 0.5).unwrap();
        assert!(p[home] > 0.99);
    }

    #[test]
    fn switch_and_reminder_directions() {
        let proto = ContextProtocol::default();
        let mut delays: Vec<usize> = (0..20).map(|s| switch_detection_delay(s, &proto, 50).unwrap().unwrap_or(usize::MAX)).collect();
        delays.sort();
        assert!(delays[10] <= 5);
        let o = reminder_protocol(3, &proto).unwrap();
        assert!(o.immediate < o.delayed && o.reminded < o.delayed, "{o:?}");
    }

    #[test]
    fn trials_parse_from_json() {
        let t: Vec<Trial> = serde_json::from_str(r#"[{"phi":[1,0],"reward":1},{"phi":[1,0],"next":[0,1],"reward":0}]"#).unwrap();
        assert_eq!(t[1], Trial::td(&[1.0, 0.0], &[0.0, 1.0], 0.0));
        assert!(serde_json::from_str::<Trial>(r#"{"phi":[1],"reward":1,"extra":2}"#).is_err());
        let mut b = GaussianBelief::isotropic(2, 1.0, 0.0, 1.0).unwrap();
        let recs = run_trials(&mut b, &t, 0.9).unwrap();
        assert!(records_to_csv(&recs).contains("# rows=2"));
    }
}

//! Temporal context model.
//!
//! A drifting context `c <- (1 - omega) c + omega phi(s)` is bound to the next
//! stimulus either by Hebbian outer products or by an error-driven TD rule. The
//! TD rule is exactly the SR TD update with the context acting as an
//! eligibility trace; `sr::sr_td_step` calls into this module.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Estimate;
use crate::rng::{categorical, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    c: DVector<f64>,
    omega: f64,
}

impl ContextVector {
    pub fn new(dim: usize, omega: f64) -> Result<Self> {
        Self::from_vector(DVector::zeros(dim), omega)
    }

    pub fn from_vector(c: DVector<f64>, omega: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::InvalidArgument(format!("drift omega must lie in [0,1], got {omega}")));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("context"));
        }
        Ok(Self { c, omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn reset(&mut self) {
        self.c.fill(0.0);
    }

    /// `c <- (1 - omega) c + omega phi`
    pub fn update(&mut self, phi: &DVector<f64>) -> Result<()> {
        if phi.len() != self.c.len() {
            return Err(Error::Shape(format!("feature has {} entries, context {}", phi.len(), self.c.len())));
        }
        let keep = 1.0 - self.omega;
        for (ci, &p) in self.c.iter_mut().zip(phi.iter()) {
            *ci = keep * *ci + self.omega * p;
        }
        Ok(())
    }

    /// Update with the one-hot feature of state `s`.
    pub fn update_onehot(&mut self, s: usize) {
        let keep = 1.0 - self.omega;
        for (i, ci) in self.c.iter_mut().enumerate() {
            let p = if i == s { 1.0 } else { 0.0 };
            *ci = keep * *ci + self.omega * p;
        }
    }
}

/// Free-function form of `ContextVector::update`.
pub fn context_update(c: &ContextVector, phi: &DVector<f64>) -> Result<ContextVector> {
    let mut out = c.clone();
    out.update(phi)?;
    Ok(out)
}

/// Applies the trace-weighted SR TD update for the transition `s -> s_next`.
///
/// `delta_j = 1[s_next = j] + gamma M(s_next, j) - M(s, j)` is computed from the
/// pre-update matrix, then `M(i, .) += eta c_i delta` for every `i` with `c_i != 0`.
pub(crate) fn trace_td_update(
    m: &mut DMatrix<f64>,
    s: usize,
    s_next: usize,
    gamma: f64,
    eta: f64,
    c: &DVector<f64>,
) {
    let n = m.ncols();
    let mut delta = vec![0.0; n];
    for (j, d) in delta.iter_mut().enumerate() {
        let ind = if j == s_next { 1.0 } else { 0.0 };
        *d = ind + gamma * m[(s_next, j)] - m[(s, j)];
    }
    for i in 0..m.nrows() {
        let ci = c[i];
        if ci == 0.0 {
            continue;
        }
        let scale = eta * ci;
        for (j, d) in delta.iter().enumerate() {
            m[(i, j)] += scale * d;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    Hebbian,
    Td,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    pub m_hat: DMatrix<f64>,
    pub mode: LearningMode,
    /// Per-state multiplier on the learning rate of transitions arriving in that state.
    pub salience: Option<DVector<f64>>,
}

impl AssociationMatrix {
    pub fn zeros(n: usize, mode: LearningMode) -> Self {
        Self { m_hat: DMatrix::zeros(n, n), mode, salience: None }
    }

    pub fn with_salience(mut self, salience: DVector<f64>) -> Result<Self> {
        if salience.len() != self.m_hat.nrows() {
            return Err(Error::Shape("salience length differs from state count".into()));
        }
        if salience.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("salience must be finite and non-negative".into()));
        }
        self.salience = Some(salience);
        Ok(self)
    }

    /// Presents the transition `s -> s_next`, advancing `context` with `phi(s)` first.
    pub fn observe(&mut self, context: &mut ContextVector, s: usize, s_next: usize, rate: f64, gamma: f64) -> Result<()> {
        check_square(&self.m_hat, context.dim())?;
        context.update_onehot(s);
        let rate = rate * self.salience.as_ref().map_or(1.0, |k| k[s_next]);
        match self.mode {
            LearningMode::Hebbian => {
                let mut phi = DVector::zeros(self.m_hat.nrows());
                phi[s_next] = 1.0;
                tcm_hebbian_update(&mut self.m_hat, &phi, context, rate)
            }
            LearningMode::Td => tcm_td_update(&mut self.m_hat, s, s_next, context, rate, gamma),
        }
    }
}

fn check_square(m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Shape(format!("association matrix is {}x{}, context has {dim} entries", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// `M(i, j) += rate * c_i * phi_j`: the current context is bound to the incoming stimulus.
///
/// Rows index context units, columns index stimuli, matching the SR layout.
pub fn tcm_hebbian_update(m_hat: &mut DMatrix<f64>, phi: &DVector<f64>, c: &ContextVector, rate: f64) -> Result<()> {
    check_square(m_hat, c.dim())?;
    if phi.len() != m_hat.ncols() {
        return Err(Error::Shape("stimulus length differs from association width".into()));
    }
    let cv = c.vector();
    for i in 0..m_hat.nrows() {
        if cv[i] == 0.0 {
            continue;
        }
        for j in 0..m_hat.ncols() {
            m_hat[(i, j)] += rate * cv[i] * phi[j];
        }
    }
    Ok(())
}

/// Error-driven update `M(i, .) += rate * c_i * delta_M` for the transition `s -> s_next`.
pub fn tcm_td_update(
    m_hat: &mut DMatrix<f64>,
    s: usize,
    s_next: usize,
    c: &ContextVector,
    rate: f64,
    gamma: f64,
) -> Result<()> {
    check_square(m_hat, c.dim())?;
    if s >= m_hat.nrows() || s_next >= m_hat.nrows() {
        return Err(Error::InvalidArgument("state out of range".into()));
    }
    trace_td_update(m_hat, s, s_next, gamma, rate, c.vector());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TcmEstimate {
    pub estimate: Estimate,
    /// Number of negative sampling weights that were clamped to zero.
    pub clamped: usize,
    /// Whether some sampling distribution had no mass and fell back to uniform.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct TcmEvalConfig {
    pub omega: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub depth: usize,
    /// Retrieval context; `phi(query)` when absent.
    pub initial_context: Option<DVector<f64>>,
}

/// Value estimate from samples drawn with probability proportional to `M^T c`.
///
/// With `omega = 0` the context never moves: draws are i.i.d. from the
/// normalized row and each sample contributes `rowsum * R(s~)`, an unbiased
/// estimate of `(M R)(query)`. With `omega > 0` each sample is a chain of
/// `depth` draws, context drifting toward each drawn state, scored as
/// `sum_t gamma^(t-1) w_t R(s~_t)` plus the tail `gamma^depth w_depth R(s~_depth) / (1 - gamma)`,
/// where `w_t` is the total mass of the sampling weights. When `M` is a
/// transition matrix and `omega = 1` this is a Monte Carlo rollout.
pub fn tcm_sr_evaluate(
    m_hat: &DMatrix<f64>,
    reward: &DVector<f64>,
    query: usize,
    cfg: &TcmEvalConfig,
    rng: &mut Rng,
) -> Result<TcmEstimate> {
    let n = m_hat.nrows();
    if m_hat.ncols() != n || reward.len() != n {
        return Err(Error::Shape("association matrix and reward disagree".into()));
    }
    if query >= n {
        return Err(Error::InvalidArgument(format!("query state {query} out of range")));
    }
    if cfg.n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.gamma) {
        return Err(Error::InvalidArgument("gamma must lie in [0,1)".into()));
    }
    let c0 = match &cfg.initial_context {
        Some(c) if c.len() != n => return Err(Error::Shape("initial context length".into())),
        Some(c) => c.clone(),
        None => {
            let mut c = DVector::zeros(n);
            c[query] = 1.0;
            c
        }
    };
    let mut clamped = 0usize;
    let mut fallback = false;
    let mut weights = |c: &DVector<f64>| -> Vec<f64> {
        let raw = m_hat.tr_mul(c);
        let mut w: Vec<f64> = raw
            .iter()
            .map(|&x| {
                if x < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    x
                }
            })
            .collect();
        if w.iter().sum::<f64>() <= 0.0 {
            fallback = true;
            w = vec![1.0; n];
        }
        w
    };

    let mut xs = Vec::with_capacity(cfg.n_samples);
    if cfg.omega == 0.0 {
        let w = weights(&c0);
        let total: f64 = w.iter().sum();
        for _ in 0..cfg.n_samples {
            let j = categorical(rng, &w).expect("positive mass");
            xs.push(total * reward[j]);
        }
    } else {
        let mut ctx = ContextVector::from_vector(c0.clone(), cfg.omega)?;
        for _ in 0..cfg.n_samples {
            ctx.c.copy_from(&c0);
            let mut g = 0.0;
            let mut disc = 1.0;
            let mut last = (0.0, 0.0);
            for _ in 0..cfg.depth {
                let w = weights(&ctx.c);
                let total: f64 = w.iter().sum();
                let j = categorical(rng, &w).expect("positive mass");
                g += disc * total * reward[j];
                last = (total, reward[j]);
                disc *= cfg.gamma;
                ctx.update_onehot(j);
            }
            if cfg.depth > 0 {
                g += disc * last.0 * last.1 / (1.0 - cfg.gamma);
            }
            xs.push(g);
        }
    }
    Ok(TcmEstimate { estimate: Estimate::from_samples(&xs), clamped, fallback })
}

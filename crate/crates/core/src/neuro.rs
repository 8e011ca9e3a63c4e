//! Predictive-map analyses: place fields, population vectors, eigenvector grid
//! fields, field skew on directional tracks and need-times-gain replay.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::explore::eigen_decompose_sr;
use crate::grid::GridWorld;
use crate::mdp::{Mdp, Policy};
use crate::sr::sr_from_transition;

/// Placement of states on a rectangular lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<(usize, usize)>,
}

impl Geometry {
    pub fn from_grid(g: &GridWorld) -> Self {
        Self { width: g.width(), height: g.height(), cells: (0..g.n_states()).map(|s| g.coords(s)).collect() }
    }

    /// States laid out left to right on one row.
    pub fn line(n: usize) -> Self {
        Self { width: n, height: 1, cells: (0..n).map(|c| (0, c)).collect() }
    }

    pub fn n_states(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldMap {
    pub width: usize,
    pub height: usize,
    /// Row-major; `None` where no state lives.
    pub values: Vec<Option<f64>>,
}

impl FieldMap {
    pub fn from_states(geom: &Geometry, v: &[f64]) -> Result<Self> {
        if v.len() != geom.n_states() {
            return Err(Error::Shape(format!("{} values for {} states", v.len(), geom.n_states())));
        }
        let mut values = vec![None; geom.width * geom.height];
        for (s, &(r, c)) in geom.cells.iter().enumerate() {
            values[r * geom.width + c] = Some(v[s]);
        }
        Ok(Self { width: geom.width, height: geom.height, values })
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.values[r * self.width + c]
    }

    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        self.values.chunks(self.width).map(|r| r.to_vec()).collect()
    }

    pub fn to_csv(&self, header: &[(&str, String)]) -> String {
        crate::csv::grid_to_string(&self.rows(), header)
    }

    pub fn rectified(&self) -> Self {
        Self { values: self.values.iter().map(|v| v.map(|x| x.max(0.0))).collect(), ..self.clone() }
    }
}

/// Column `s~` of the SR: how strongly each state predicts `s~`.
pub fn place_field(sr: &DMatrix<f64>, geom: &Geometry, target: usize) -> Result<FieldMap> {
    if target >= sr.ncols() {
        return Err(Error::InvalidArgument(format!("state {target} out of range")));
    }
    let col: Vec<f64> = sr.column(target).iter().cloned().collect();
    FieldMap::from_states(geom, &col)
}

/// Row `s` of the SR: predicted future occupancy from `s`.
pub fn population_vector(sr: &DMatrix<f64>, geom: &Geometry, s: usize) -> Result<FieldMap> {
    if s >= sr.nrows() {
        return Err(Error::InvalidArgument(format!("state {s} out of range")));
    }
    let row: Vec<f64> = sr.row(s).iter().cloned().collect();
    FieldMap::from_states(geom, &row)
}

/// Top-`k` eigenvector maps, optionally rectified.
pub fn grid_fields(sr: &DMatrix<f64>, geom: &Geometry, k: usize, non_negative: bool) -> Result<Vec<FieldMap>> {
    let pairs = eigen_decompose_sr(sr, k)?;
    pairs
        .vectors
        .iter()
        .map(|v| {
            let f = FieldMap::from_states(geom, v.as_slice())?;
            Ok(if non_negative { f.rectified() } else { f })
        })
        .collect()
}

/// Number of SR eigenvalues at least `fraction` of the largest.
pub fn significant_components(sr: &DMatrix<f64>, fraction: f64) -> Result<usize> {
    let pairs = eigen_decompose_sr(sr, sr.nrows())?;
    let top = pairs.values[0];
    Ok(pairs.values.iter().filter(|&&v| v >= fraction * top).count())
}

/// Pearson spatial autocorrelation over all shifts.
///
/// Entry `(dy + h - 1, dx + w - 1)` correlates the field with itself shifted by
/// `(dy, dx)`, using only cells present in both copies. Shifts with fewer than
/// `min_overlap` shared cells are `NaN`; a constant field gives all `NaN`.
pub fn autocorrelation(field: &FieldMap, min_overlap: usize) -> DMatrix<f64> {
    let (h, w) = (field.height as i64, field.width as i64);
    let mut out = DMatrix::from_element((2 * h - 1) as usize, (2 * w - 1) as usize, f64::NAN);
    let present: Vec<f64> = field.values.iter().flatten().cloned().collect();
    let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(hi - lo > 1e-9 * hi.abs().max(lo.abs())) {
        return out;
    }
    for dy in -(h - 1)..h {
        for dx in -(w - 1)..w {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in 0..h {
                for c in 0..w {
                    let (r2, c2) = (r + dy, c + dx);
                    if r2 < 0 || r2 >= h || c2 < 0 || c2 >= w {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (field.get(r as usize, c as usize), field.get(r2 as usize, c2 as usize)) {
                        xs.push(a);
                        ys.push(b);
                    }
                }
            }
            if xs.len() >= min_overlap.max(2) {
                out[((dy + h - 1) as usize, (dx + w - 1) as usize)] = pearson(&xs, &ys);
            }
        }
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub dy: i64,
    pub dx: i64,
    pub value: f64,
}

impl Peak {
    /// Angle in degrees in `[0, 180)`; autocorrelograms are point-symmetric.
    pub fn angle(&self) -> f64 {
        let a = (-(self.dy as f64)).atan2(self.dx as f64).to_degrees();
        a.rem_euclid(180.0) + 0.0
    }

    pub fn distance(&self) -> f64 {
        ((self.dy * self.dy + self.dx * self.dx) as f64).sqrt()
    }
}

/// Strict local maxima (8-neighbourhood) above `threshold`, excluding the centre.
pub fn secondary_peaks(ac: &DMatrix<f64>, threshold: f64) -> Vec<Peak> {
    let (rows, cols) = (ac.nrows() as i64, ac.ncols() as i64);
    let (cy, cx) = (rows / 2, cols / 2);
    let mut peaks = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = ac[(r as usize, c as usize)];
            if !(v > threshold) || (r == cy && c == cx) {
                continue;
            }
            let mut is_max = true;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (r2, c2) = (r + dr, c + dc);
                    if (dr, dc) == (0, 0) || r2 < 0 || c2 < 0 || r2 >= rows || c2 >= cols {
                        continue;
                    }
                    let u = ac[(r2 as usize, c2 as usize)];
                    if u.is_finite() && u >= v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                peaks.push(Peak { dy: r - cy, dx: c - cx, value: v });
            }
        }
    }
    peaks.sort_by(|a, b| a.distance().partial_cmp(&b.distance()).unwrap().then(a.dy.cmp(&b.dy)).then(a.dx.cmp(&b.dx)));
    peaks
}

/// Mean over field pairs of the smallest angular gap between the nearest-peak
/// angle of one field and the peak angles of the other (degrees, mod 180).
pub fn peak_angle_shift(a: &[FieldMap], b: &[FieldMap], min_overlap: usize, threshold: f64) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (fa, fb) in a.iter().zip(b) {
        let pa = secondary_peaks(&autocorrelation(fa, min_overlap), threshold);
        let pb = secondary_peaks(&autocorrelation(fb, min_overlap), threshold);
        if let (Some(first), false) = (pa.first(), pb.is_empty()) {
            let gap = pb
                .iter()
                .map(|p| {
                    let d = (p.angle() - first.angle()).abs();
                    d.min(180.0 - d)
                })
                .fold(f64::INFINITY, f64::min);
            total += gap;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Skew {
    pub value: f64,
    /// Set when the field has no variation and the skew is reported as zero.
    pub flat: bool,
}

/// `(centre of mass - argmax) * direction`; negative means skewed against motion.
/// Tied maxima contribute their mean position.
///
/// `positions[i]` is the track coordinate of `field[i]`. Negative entries are
/// ignored in the centre of mass.
pub fn skew_metric(field: &[f64], positions: &[f64], direction: f64) -> Result<Skew> {
    if field.len() != positions.len() || field.is_empty() {
        return Err(Error::Shape("field and positions differ in length".into()));
    }
    let max = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let mass: f64 = field.iter().map(|x| x.max(0.0)).sum();
    if max - min <= 1e-12 * max.abs().max(1.0) || mass <= 0.0 {
        return Ok(Skew { value: 0.0, flat: true });
    }
    let com = field.iter().zip(positions).map(|(f, x)| f.max(0.0) * x).sum::<f64>() / mass;
    let tol = 1e-12 * max.abs().max(1.0);
    let tied: Vec<f64> = field.iter().zip(positions).filter(|(f, _)| **f >= max - tol).map(|(_, x)| *x).collect();
    let peak = tied.iter().sum::<f64>() / tied.len() as f64;
    Ok(Skew { value: (com - peak) * direction.signum(), flat: false })
}

/// Skew of the place field of `cell` on an `n`-state ring, with the field
/// unwrapped so that `cell` sits in the middle.
pub fn ring_field_skew(sr: &DMatrix<f64>, cell: usize, direction: f64) -> Result<Skew> {
    let n = sr.nrows();
    let half = (n as i64 - 1) / 2;
    let mut field = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    for off in -half..=(n as i64 - 1 - half) {
        let s = (cell as i64 + off).rem_euclid(n as i64) as usize;
        field.push(sr[(s, cell)]);
        pos.push(off as f64);
    }
    skew_metric(&field, &pos, direction)
}

/// Ring transition matrix moving forward with probability `p_forward`, back otherwise.
pub fn ring_transition(n: usize, p_forward: f64) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, n);
    for s in 0..n {
        t[(s, (s + 1) % n)] += p_forward;
        t[(s, (s + n - 1) % n)] += 1.0 - p_forward;
    }
    t
}

/// SR of a ring walk.
pub fn ring_sr(n: usize, p_forward: f64, gamma: f64) -> Result<DMatrix<f64>> {
    sr_from_transition(&ring_transition(n, p_forward), gamma)
}

/// Cosine similarity between eigenvector `i` and its best match in the span
/// of `cos(2 pi k x / n)`, `sin(2 pi k x / n)` with `k = ceil(i / 2)`.
pub fn ring_fourier_alignment(vectors: &[DVector<f64>]) -> Vec<f64> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = v.len();
            let k = i.div_ceil(2) as f64;
            let tau = std::f64::consts::TAU;
            let mut basis: Vec<DVector<f64>> = vec![DVector::from_iterator(n, (0..n).map(|x| (tau * k * x as f64 / n as f64).cos()))];
            if k > 0.0 {
                basis.push(DVector::from_iterator(n, (0..n).map(|x| (tau * k * x as f64 / n as f64).sin())));
            }
            let vn = v.normalize();
            let mut proj = 0.0;
            for b in basis.iter().filter(|b| b.norm() > 1e-12) {
                proj += vn.dot(&b.normalize()).powi(2);
            }
            proj.sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplayCandidate {
    pub state: usize,
    pub action: usize,
    pub need: f64,
    pub gain: f64,
    pub evb: f64,
}

/// Full expected backup of `(s, a)`: `sum_s' T(s'|s,a) (R(s') + gamma max Q(s', .))`.
pub fn backup_target(mdp: &Mdp, q: &DMatrix<f64>, s: usize, a: usize) -> f64 {
    let row = mdp.transition(a).row(s);
    (0..mdp.n_states())
        .filter(|&s2| row[s2] != 0.0)
        .map(|s2| row[s2] * (mdp.reward()[s2] + mdp.gamma() * q.row(s2).max()))
        .sum()
}

const GREEDY_TOL: f64 = 1e-12;

fn greedy_row(q: &DMatrix<f64>, s: usize) -> Vec<f64> {
    let best = q.row(s).max();
    let winners: Vec<bool> = q.row(s).iter().map(|&x| x >= best - GREEDY_TOL).collect();
    let k = winners.iter().filter(|&&w| w).count() as f64;
    winners.iter().map(|&w| if w { 1.0 / k } else { 0.0 }).collect()
}

/// Value gained at `s` by the policy change a backup of `(s, a)` would cause:
/// `sum_a pi_new(a|s) Q_new(s, a) - sum_a pi_old(a|s) Q_new(s, a)`,
/// both policies greedy with ties split uniformly.
pub fn backup_gain(mdp: &Mdp, q: &DMatrix<f64>, s: usize, a: usize) -> f64 {
    let mut q_new = q.row(s).transpose();
    q_new[a] = backup_target(mdp, q, s, a);
    let old = greedy_row(q, s);
    let best = q_new.max();
    let winners: Vec<usize> = (0..q_new.len()).filter(|&b| q_new[b] >= best - GREEDY_TOL).collect();
    let new_value = winners.iter().map(|&b| q_new[b]).sum::<f64>() / winners.len() as f64;
    let old_value: f64 = old.iter().zip(q_new.iter()).map(|(p, x)| p * x).sum();
    new_value - old_value
}

/// Greedy policy (ties split) mixed with `epsilon` of uniform.
pub fn behaviour_policy(q: &DMatrix<f64>, epsilon: f64) -> Policy {
    let g = Policy::greedy_split(q, GREEDY_TOL);
    let n_a = q.ncols() as f64;
    let probs = g.probs().map(|p| (1.0 - epsilon) * p + epsilon / n_a);
    Policy::new(probs).unwrap_or(g)
}

/// Scores and ranks candidate backups by `need * gain`.
///
/// `need` is row `agent_state` of `need_sr`. Gains below `min_gain` are raised to it.
/// Ties keep the lower state, then the lower action.
pub fn replay_priorities(
    need_sr: &DMatrix<f64>,
    q: &DMatrix<f64>,
    mdp: &Mdp,
    agent_state: usize,
    candidates: &[(usize, usize)],
    min_gain: f64,
) -> Result<Vec<ReplayCandidate>> {
    if agent_state >= need_sr.nrows() || q.nrows() != mdp.n_states() || q.ncols() != mdp.n_actions() {
        return Err(Error::Shape("replay inputs disagree".into()));
    }
    let mut out = Vec::with_capacity(candidates.len());
    for &(s, a) in candidates {
        if s >= mdp.n_states() || a >= mdp.n_actions() {
            return Err(Error::InvalidArgument(format!("candidate ({s},{a}) out of range")));
        }
        let need = need_sr[(agent_state, s)];
        let gain = backup_gain(mdp, q, s, a).max(min_gain);
        out.push(ReplayCandidate { state: s, action: a, need, gain, evb: need * gain });
    }
    out.sort_by(|x, y| {
        y.evb
            .partial_cmp(&x.evb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.state.cmp(&y.state))
            .then(x.action.cmp(&y.action))
    });
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    /// Replay stops once the best EVB falls to this value or below.
    pub threshold: f64,
    pub max_backups: usize,
    pub min_gain: f64,
    /// Exploration mixed into the policy that defines need.
    pub epsilon: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { threshold: 1e-6, max_backups: 100, min_gain: 0.0, epsilon: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayRun {
    pub sequence: Vec<ReplayCandidate>,
    #[serde(skip)]
    pub q: DMatrix<f64>,
}

/// Executes the highest-EVB backup repeatedly, recomputing need under the
/// current behaviour policy after each one.
pub fn replay_simulate(
    mdp: &Mdp,
    q0: &DMatrix<f64>,
    agent_state: usize,
    candidates: &[(usize, usize)],
    cfg: &ReplayConfig,
) -> Result<ReplayRun> {
    let mut q = q0.clone();
    let mut sequence = Vec::new();
    while sequence.len() < cfg.max_backups && !candidates.is_empty() {
        let pi = behaviour_policy(&q, cfg.epsilon);
        let tp = crate::mdp::policy_transition_matrix(mdp, &pi)?;
        let need = sr_from_transition(&tp, mdp.gamma())?;
        let ranked = replay_priorities(&need, &q, mdp, agent_state, candidates, cfg.min_gain)?;
        let best = ranked[0];
        if !(best.evb > cfg.threshold) {
            break;
        }
        q[(best.state, best.action)] = backup_target(mdp, &q, best.state, best.action);
        sequence.push(best);
    }
    Ok(ReplayRun { sequence, q })
}

/// Every `(s, a)` pair.
pub fn all_pairs(mdp: &Mdp) -> Vec<(usize, usize)> {
    (0..mdp.n_states()).flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a))).collect()
}

/// Linear track `0 .. n-1` whose last state returns the agent to state 0.
///
/// Action 0 moves right, action 1 moves left. Reward is earned on arrival in
/// the last state.
pub fn restart_track(n: usize, gamma: f64, goal_reward: f64) -> Result<Mdp> {
    if n < 2 {
        return Err(Error::InvalidArgument("track needs at least two states".into()));
    }
    let mut right = DMatrix::zeros(n, n);
    let mut left = DMatrix::zeros(n, n);
    for s in 0..n {
        if s == n - 1 {
            right[(s, 0)] = 1.0;
            left[(s, 0)] = 1.0;
        } else {
            right[(s, s + 1)] = 1.0;
            left[(s, s.saturating_sub(1))] = 1.0;
        }
    }
    let mut r = DVector::zeros(n);
    r[n - 1] = goal_reward;
    Mdp::new(gamma, vec![right, left], r, vec![false; n])
}

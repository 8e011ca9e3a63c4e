//! Small reference environments.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::grid::GridWorld;
use crate::mdp::{Mdp, Policy};
use crate::rng::Rng;

/// Small maze with 24 open cells. The goal is state 5, the agent's
/// reference state 13 sits at the left end of the third row.
pub const HALLWAY_MAZE: &str = "\
.....G.
...#...
....#..
#..#...
";

/// Agent state, its right-hand neighbour, the far corner and a dead-end cell
/// off the shortest path in `HALLWAY_MAZE`.
pub const HALLWAY_AGENT: usize = 13;
pub const HALLWAY_NEIGHBOUR: usize = 14;
pub const HALLWAY_FAR: usize = 12;
pub const HALLWAY_OFF_PATH: usize = 19;

/// Three arms meeting at a junction, one goal at the end of each side arm.
pub const THREE_ARMED_MAZE: &str = "\
###G###
###.###
###.###
#G...G#
###.###
###.###
###S###
";

pub const FOUR_ROOMS: &str = "\
.....#.....
.....#.....
...........
.....#.....
.....#.....
#.####.....
.....###.##
.....#.....
.....#.....
...........
.....#.....
";

fn check_reward(reward: &[f64], n: usize) -> Result<DVector<f64>> {
    if reward.len() != n {
        return Err(Error::Shape(format!("reward has {} entries for {n} states", reward.len())));
    }
    Ok(DVector::from_row_slice(reward))
}

/// Two states; both actions swap.
pub fn swap_chain(gamma: f64, reward: &[f64]) -> Result<Mdp> {
    let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    Mdp::new(gamma, vec![swap.clone(), swap], check_reward(reward, 2)?, vec![false; 2])
}

/// Two states; action 0 stays, action 1 swaps.
pub fn stay_swap(gamma: f64, reward: &[f64]) -> Result<Mdp> {
    let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    Mdp::new(gamma, vec![DMatrix::identity(2, 2), swap], check_reward(reward, 2)?, vec![false; 2])
}

/// Ring of `n` states; action 0 steps forward (+1), action 1 steps back.
pub fn ring(n: usize, gamma: f64) -> Result<Mdp> {
    if n < 2 {
        return Err(Error::InvalidArgument("ring needs at least two states".into()));
    }
    let mut fwd = DMatrix::zeros(n, n);
    let mut back = DMatrix::zeros(n, n);
    for s in 0..n {
        fwd[(s, (s + 1) % n)] = 1.0;
        back[(s, (s + n - 1) % n)] = 1.0;
    }
    Mdp::new(gamma, vec![fwd, back], DVector::zeros(n), vec![false; n])
}

/// Deterministic chain `0 -> 1 -> ... -> n-1`; the last state is terminal.
///
/// Action 0 moves right, action 1 moves left (bumping at 0).
pub fn chain(n: usize, gamma: f64, reward: &[f64]) -> Result<Mdp> {
    if n < 2 {
        return Err(Error::InvalidArgument("chain needs at least two states".into()));
    }
    let mut right = DMatrix::zeros(n, n);
    let mut left = DMatrix::zeros(n, n);
    for s in 0..n {
        if s == n - 1 {
            right[(s, s)] = 1.0;
            left[(s, s)] = 1.0;
        } else {
            right[(s, s + 1)] = 1.0;
            left[(s, s.saturating_sub(1))] = 1.0;
        }
    }
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    Mdp::new(gamma, vec![right, left], check_reward(reward, n)?, terminal)
}

/// Random dense MDP with exponential (flat Dirichlet) transition rows.
///
/// Rows are renormalized so that they sum to one within rounding.
pub fn random_mdp(rng: &mut Rng, n_states: usize, n_actions: usize, gamma: f64) -> Result<Mdp> {
    let mut ts = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        let mut t = DMatrix::zeros(n_states, n_states);
        for s in 0..n_states {
            let w: Vec<f64> = (0..n_states).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = w.iter().sum();
            for (j, x) in w.iter().enumerate() {
                t[(s, j)] = x / total;
            }
            normalize_row(&mut t, s);
        }
        ts.push(t);
    }
    let reward = DVector::from_iterator(n_states, (0..n_states).map(|_| rng.random_range(-1.0..1.0)));
    Mdp::new(gamma, ts, reward, vec![false; n_states])
}

/// Random policy with flat Dirichlet rows.
pub fn random_policy(rng: &mut Rng, n_states: usize, n_actions: usize) -> Policy {
    let mut p = DMatrix::zeros(n_states, n_actions);
    for s in 0..n_states {
        let w: Vec<f64> = (0..n_actions).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = w.iter().sum();
        for (a, x) in w.iter().enumerate() {
            p[(s, a)] = x / total;
        }
        normalize_row(&mut p, s);
    }
    Policy::new(p).expect("rows normalized")
}

/// Random deterministic policy.
pub fn random_deterministic_policy(rng: &mut Rng, n_states: usize, n_actions: usize) -> Policy {
    let actions: Vec<usize> = (0..n_states).map(|_| rng.random_range(0..n_actions)).collect();
    Policy::deterministic(&actions, n_actions).expect("in range")
}

// Push any rounding residue into the largest entry.
fn normalize_row(m: &mut DMatrix<f64>, s: usize) {
    let sum: f64 = m.row(s).iter().sum();
    let (imax, _) = m
        .row(s)
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    m[(s, imax)] += 1.0 - sum;
}

/// Two rooms separated by a vertical wall with a single door.
///
/// `size x size` cells, wall in column `size / 2`, door in row `size / 2`.
pub fn two_rooms(size: usize) -> Result<GridWorld> {
    let wall = size / 2;
    let door = size / 2;
    GridWorld::from_mask(size + 1, size, |r, c| c != wall || r == door)
}

/// Right trapezoid: full height on the left, narrowing linearly to
/// `narrow` rows on the right, centred vertically.
pub fn trapezoid(width: usize, height: usize, narrow: usize) -> Result<GridWorld> {
    if narrow == 0 || narrow > height {
        return Err(Error::InvalidArgument("narrow side must lie in 1..=height".into()));
    }
    let h = height as f64;
    let n = narrow as f64;
    let w = (width.max(2) - 1) as f64;
    GridWorld::from_mask(width, height, |r, c| {
        let frac = c as f64 / w;
        let span = h + (n - h) * frac;
        let lo = (h - span) / 2.0;
        let centre = r as f64 + 0.5;
        centre >= lo && centre <= h - lo
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridRewards;
    use crate::rng::seeded;

    #[test]
    fn hallway_state_ids() {
        let g = GridWorld::parse(HALLWAY_MAZE).unwrap();
        assert_eq!(g.n_states(), 24);
        assert_eq!(g.goals(), vec![5]);
        assert_eq!(g.coords(HALLWAY_AGENT), (2, 0));
        assert_eq!(g.coords(HALLWAY_NEIGHBOUR), (2, 1));
        assert_eq!(g.coords(HALLWAY_FAR), (1, 6));
        assert_eq!(g.coords(HALLWAY_OFF_PATH), (3, 1));
    }

    #[test]
    fn random_mdp_is_valid() {
        let mut rng = seeded(4);
        for _ in 0..20 {
            let m = random_mdp(&mut rng, 7, 3, 0.9).unwrap();
            assert_eq!(m.n_states(), 7);
            let p = random_policy(&mut rng, 7, 3);
            assert_eq!(p.n_actions(), 3);
        }
    }

    #[test]
    fn four_rooms_and_two_rooms_connected() {
        for g in [GridWorld::parse(FOUR_ROOMS).unwrap(), two_rooms(6).unwrap()] {
            let d = g.bfs_distances(0);
            assert!(d.iter().all(|x| x.is_some()));
            assert!(g.to_mdp(&GridRewards::default()).is_ok());
        }
    }

    #[test]
    fn trapezoid_narrows() {
        let g = trapezoid(12, 12, 4).unwrap();
        let count = |c: usize| (0..12).filter(|&r| g.state_at(r, c).is_some()).count();
        assert_eq!(count(0), 12);
        assert!(count(11) <= 5 && count(11) >= 3);
    }
}

//! ASCII gridworlds.
//!
//! Map characters: `#` wall, `.` open, `S` start, `G` goal. Open cells become
//! states numbered row-major. Actions are 0=N, 1=E, 2=S, 3=W; bumping into a
//! wall or the border leaves the agent in place. Goals are absorbing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

pub const N_ACTIONS: usize = 4;
pub const ACTION_NAMES: [&str; 4] = ["N", "E", "S", "W"];
const DELTAS: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Open,
    Wall,
    Start,
    Goal,
}

impl Cell {
    pub fn is_open(self) -> bool {
        self != Cell::Wall
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    slip: f64,
    // row-major cell index -> state id
    state_of_cell: Vec<Option<usize>>,
    cell_of_state: Vec<usize>,
}

/// Reward layout for the derived MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRewards {
    pub gamma: f64,
    pub goal_reward: f64,
    /// Reward for arriving in any non-goal state.
    pub step_reward: f64,
}

impl Default for GridRewards {
    fn default() -> Self {
        Self { gamma: 0.95, goal_reward: 1.0, step_reward: 0.0 }
    }
}

impl GridRewards {
    /// Goal +1 and a cost of 0.1 for every other state.
    pub fn hallway(gamma: f64) -> Self {
        Self { gamma, goal_reward: 1.0, step_reward: -0.1 }
    }
}

impl GridWorld {
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::Parse { line: 1, msg: "empty map".into() });
        }
        let width = lines[0].chars().count();
        let mut cells = Vec::with_capacity(width * lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("ragged row: {} columns, expected {width}", line.chars().count()),
                });
            }
            for ch in line.chars() {
                cells.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Open,
                    'S' => Cell::Start,
                    'G' => Cell::Goal,
                    other => {
                        return Err(Error::Parse { line: i + 1, msg: format!("unknown character {other:?}") });
                    }
                });
            }
        }
        Self::from_cells(width, lines.len(), cells)
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Shape(format!("{} cells for a {width}x{height} grid", cells.len())));
        }
        let mut state_of_cell = vec![None; cells.len()];
        let mut cell_of_state = Vec::new();
        for (i, c) in cells.iter().enumerate() {
            if c.is_open() {
                state_of_cell[i] = Some(cell_of_state.len());
                cell_of_state.push(i);
            }
        }
        if cell_of_state.is_empty() {
            return Err(Error::Parse { line: 1, msg: "map has no open cells".into() });
        }
        Ok(Self { width, height, cells, slip: 0.0, state_of_cell, cell_of_state })
    }

    /// Grid whose open cells are given by a predicate on `(row, col)`.
    pub fn from_mask(width: usize, height: usize, open: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut cells = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                cells.push(if open(r, c) { Cell::Open } else { Cell::Wall });
            }
        }
        Self::from_cells(width, height, cells)
    }

    pub fn open(width: usize, height: usize) -> Self {
        Self::from_mask(width, height, |_, _| true).expect("non-empty")
    }

    pub fn with_slip(mut self, slip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::InvalidArgument(format!("slip must lie in [0,1], got {slip}")));
        }
        self.slip = slip;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_states(&self) -> usize {
        self.cell_of_state.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.height || col >= self.width {
            return None;
        }
        self.state_of_cell[row * self.width + col]
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        let c = self.cell_of_state[state];
        (c / self.width, c % self.width)
    }

    fn states_with(&self, kind: Cell) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&s| self.cells[self.cell_of_state[s]] == kind)
            .collect()
    }

    pub fn starts(&self) -> Vec<usize> {
        self.states_with(Cell::Start)
    }

    pub fn goals(&self) -> Vec<usize> {
        self.states_with(Cell::Goal)
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.cells[self.cell_of_state[s]] == Cell::Goal
    }

    /// Deterministic successor ignoring goals and slip.
    pub fn move_from(&self, s: usize, a: usize) -> usize {
        let (r, c) = self.coords(s);
        let (dr, dc) = DELTAS[a];
        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
        if nr < 0 || nc < 0 {
            return s;
        }
        self.state_at(nr as usize, nc as usize).unwrap_or(s)
    }

    /// Open 4-neighbours of `s`.
    pub fn neighbours(&self, s: usize) -> Vec<usize> {
        (0..N_ACTIONS).map(|a| self.move_from(s, a)).filter(|&n| n != s).collect()
    }

    /// Same map with extra walls at the given cells.
    pub fn with_walls(&self, walls: &[(usize, usize)]) -> Result<Self> {
        let mut cells = self.cells.clone();
        for &(r, c) in walls {
            if r >= self.height || c >= self.width {
                return Err(Error::InvalidArgument(format!("wall ({r},{c}) outside the map")));
            }
            cells[r * self.width + c] = Cell::Wall;
        }
        let mut g = Self::from_cells(self.width, self.height, cells)?;
        g.slip = self.slip;
        Ok(g)
    }

    pub fn reward_vector(&self, rewards: &GridRewards) -> DVector<f64> {
        DVector::from_iterator(
            self.n_states(),
            (0..self.n_states()).map(|s| if self.is_goal(s) { rewards.goal_reward } else { rewards.step_reward }),
        )
    }

    pub fn to_mdp(&self, rewards: &GridRewards) -> Result<Mdp> {
        let n = self.n_states();
        let mut det = vec![DMatrix::zeros(n, n); N_ACTIONS];
        for s in 0..n {
            for (a, t) in det.iter_mut().enumerate() {
                let s2 = if self.is_goal(s) { s } else { self.move_from(s, a) };
                t[(s, s2)] = 1.0;
            }
        }
        let transitions = if self.slip > 0.0 {
            let mean = det.iter().fold(DMatrix::zeros(n, n), |acc, t| acc + t) / N_ACTIONS as f64;
            det.iter().map(|t| t * (1.0 - self.slip) + &mean * self.slip).collect()
        } else {
            det
        };
        let terminal = (0..n).map(|s| self.is_goal(s)).collect();
        Mdp::new(rewards.gamma, transitions, self.reward_vector(rewards), terminal)
    }

    /// Values laid out on the grid; walls are `None`.
    pub fn layout(&self, values: &DVector<f64>) -> Vec<Vec<Option<f64>>> {
        (0..self.height)
            .map(|r| (0..self.width).map(|c| self.state_at(r, c).map(|s| values[s])).collect())
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(match self.cell(r, c) {
                    Cell::Open => '.',
                    Cell::Wall => '#',
                    Cell::Start => 'S',
                    Cell::Goal => 'G',
                });
            }
            out.push('\n');
        }
        out
    }

    /// Shortest path lengths (in moves) from `s` to every state, ignoring goal absorption.
    pub fn bfs_distances(&self, s: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_states()];
        dist[s] = Some(0);
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for v in self.neighbours(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

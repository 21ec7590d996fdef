//! Comparison agents: Q-learning on a fixed uniform grid, and the two
//! ambulance heuristics.

use crate::agent::{Agent, Decision};
use crate::error::{Error, Result};
use crate::learner::{learning_rate, LearnerConfig};
use crate::metric::SpaceDescriptor;
use crate::partition::SplitEvent;

/// Grid spacing `(K H)^(-1/(d+2))` for a `d`-dimensional state-action space.
pub fn default_epsilon(episodes: u64, horizon: usize, dims: usize) -> f64 {
    (episodes as f64 * horizon as f64).powf(-1.0 / (dims as f64 + 2.0))
}

/// Cells per axis for spacing `epsilon`. The count is rounded up when
/// `1/epsilon` is not an integer; a relative slack absorbs the rounding in
/// values such as `10000^(-1/4)`.
pub fn cells_per_axis(epsilon: f64) -> usize {
    let n = 1.0 / epsilon;
    let nearest = n.round();
    if (n - nearest).abs() <= 1e-9 * nearest {
        nearest as usize
    } else {
        n.ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub epsilon: f64,
    pub learner: LearnerConfig,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0,1]", self.epsilon)));
        }
        Ok(())
    }
}

/// Net-based Q-learning over the centers of an `epsilon`-spaced grid.
#[derive(Debug, Clone)]
pub struct NetAgent {
    config: NetConfig,
    space: SpaceDescriptor,
    per_axis: usize,
    n_states: usize,
    n_actions: usize,
    q_hat: Vec<Vec<f64>>,
    visits: Vec<Vec<u64>>,
}

impl NetAgent {
    pub fn new(config: NetConfig, space: SpaceDescriptor) -> Result<Self> {
        config.validate()?;
        let per_axis = cells_per_axis(config.epsilon);
        let n_states = checked_pow(per_axis, space.state_dims())?;
        let n_actions = checked_pow(per_axis, space.action_dims())?;
        let cells = n_states
            .checked_mul(n_actions)
            .filter(|&c| c <= 1 << 28)
            .ok_or_else(|| Error::Config(format!("epsilon {} gives too many cells", config.epsilon)))?;
        let horizon = config.learner.horizon;
        Ok(NetAgent {
            config,
            space,
            per_axis,
            n_states,
            n_actions,
            q_hat: vec![vec![horizon as f64; cells]; horizon],
            visits: vec![vec![0; cells]; horizon],
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    /// Cells per step, constant over the run.
    pub fn table_size(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn q_hat(&self, h: usize, cell: usize) -> f64 {
        self.q_hat[h][cell]
    }

    pub fn visits(&self, h: usize, cell: usize) -> u64 {
        self.visits[h][cell]
    }

    fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.per_axis as f64
    }

    /// Nearest grid index per coordinate; midway points go to the smaller one.
    fn snap_axis(&self, v: f64) -> usize {
        let n = self.per_axis;
        ((v * n as f64).ceil() as usize).saturating_sub(1).min(n - 1)
    }

    /// Row-major index of the grid point nearest to state `x`.
    pub fn snap_state(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &v| acc * self.per_axis + self.snap_axis(v))
    }

    fn action_point(&self, mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.action_dims()];
        for slot in out.iter_mut().rev() {
            *slot = self.center(idx % self.per_axis);
            idx /= self.per_axis;
        }
        out
    }

    fn row(&self, h: usize, state: usize) -> &[f64] {
        &self.q_hat[h][state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Greedy action at the snapped state; ties go to the smaller action.
    pub fn net_act(&self, h: usize, x: &[f64]) -> Result<Decision> {
        self.space.check_state(x)?;
        if h >= self.q_hat.len() {
            return Err(Error::InvalidInput(format!("step {h} outside horizon")));
        }
        let state = self.snap_state(x);
        let row = self.row(h, state);
        let mut best = 0;
        for (i, &q) in row.iter().enumerate().skip(1) {
            if q > row[best] {
                best = i;
            }
        }
        Ok(Decision {
            cell: state * self.n_actions + best,
            action: self.action_point(best),
        })
    }

    /// `min(H, max_a q_hat)` at the snapped next state; zero past the last step.
    pub fn value(&self, h: usize, x: &[f64]) -> f64 {
        match self.q_hat.get(h) {
            None => 0.0,
            Some(_) => {
                let row = self.row(h, self.snap_state(x));
                row.iter().cloned().fold(f64::MIN, f64::max).min(self.config.learner.horizon as f64)
            }
        }
    }

    /// Q-learning update of grid cell `cell` at step `h`, with the
    /// discretization bonus measured at the grid spacing.
    pub fn net_update(&mut self, h: usize, cell: usize, reward: f64, next_state: &[f64]) -> Result<()> {
        if h >= self.q_hat.len() || cell >= self.table_size() {
            return Err(Error::InvalidInput(format!("no cell {cell} at step {h}")));
        }
        self.space.check_state(next_state)?;
        let learner = &self.config.learner;
        let v_next = self.value(h + 1, next_state);
        let t = self.visits[h][cell] + 1;
        self.visits[h][cell] = t;
        let alpha = learning_rate(t, learner.horizon);
        let target = reward + v_next + learner.bonus_at_length(t, self.config.epsilon);
        let q = &mut self.q_hat[h][cell];
        *q = (1.0 - alpha) * *q + alpha * target;
        Ok(())
    }
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .ok_or_else(|| Error::Config("grid too large".into()))
}

impl Agent for NetAgent {
    fn horizon(&self) -> usize {
        self.config.learner.horizon
    }

    fn act(&mut self, h: usize, state: &[f64]) -> Result<Decision> {
        self.net_act(h, state)
    }

    fn observe(&mut self, h: usize, decision: &Decision, reward: f64, next_state: &[f64]) -> Result<Option<SplitEvent>> {
        self.net_update(h, decision.cell, reward, next_state)?;
        Ok(None)
    }

    fn partition_sizes(&self) -> Vec<usize> {
        vec![self.table_size(); self.horizon()]
    }
}

/// Stay where the last request was served.
pub fn heuristic_no_movement(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// Median of the observed requests, `0.5` before any request is seen.
/// An even count averages the two middle values.
pub fn heuristic_median(history: &[f64]) -> f64 {
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted_median(&sorted)
}

fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => 0.5,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[derive(Debug, Clone)]
pub struct NoMovementAgent {
    horizon: usize,
}

impl NoMovementAgent {
    pub fn new(horizon: usize) -> Self {
        NoMovementAgent { horizon }
    }
}

impl Agent for NoMovementAgent {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn act(&mut self, _: usize, state: &[f64]) -> Result<Decision> {
        Ok(Decision { cell: 0, action: heuristic_no_movement(state) })
    }

    fn observe(&mut self, _: usize, _: &Decision, _: f64, _: &[f64]) -> Result<Option<SplitEvent>> {
        Ok(None)
    }
}

/// Relocates to the running median of every request seen so far, across
/// steps and episodes. The next state of the ambulance problem is the request.
#[derive(Debug, Clone)]
pub struct MedianAgent {
    horizon: usize,
    sorted: Vec<f64>,
}

impl MedianAgent {
    pub fn new(horizon: usize) -> Self {
        MedianAgent { horizon, sorted: Vec::new() }
    }

    pub fn current(&self) -> f64 {
        sorted_median(&self.sorted)
    }
}

impl Agent for MedianAgent {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn act(&mut self, _: usize, _: &[f64]) -> Result<Decision> {
        Ok(Decision { cell: 0, action: vec![self.current()] })
    }

    fn observe(&mut self, _: usize, _: &Decision, _: f64, next_state: &[f64]) -> Result<Option<SplitEvent>> {
        let v = next_state[0];
        let at = self.sorted.partition_point(|&s| s < v);
        self.sorted.insert(at, v);
        Ok(None)
    }
}

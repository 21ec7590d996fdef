//! The adaptive Q-learning agent.
//!
//! One [`StepPartition`] per step holds optimistic Q estimates over dyadic
//! cells. Each step the agent picks the relevant leaf with the largest
//! estimate, plays the midpoint of its action interval, applies the
//! Q-learning update with learning rate `(H+1)/(H+t)` plus a confidence
//! bonus, and splits the leaf once it has been selected `(d_max/r)^2` times.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Decision};
use crate::env::SimRng;
use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;
use crate::partition::{should_split, NodeId, SplitEvent, StepPartition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub horizon: usize,
    pub episodes: u64,
    pub delta: f64,
    pub lipschitz: f64,
    pub d_max: f64,
    /// Multiplier on the `2 sqrt(H^3 ln(4HK/delta) / t)` term.
    pub bonus_scale_stochastic: f64,
    /// Multiplier on the `4 L d_max / sqrt(t)` term.
    pub bonus_scale_metric: f64,
}

impl LearnerConfig {
    pub fn new(horizon: usize, episodes: u64, delta: f64, lipschitz: f64) -> Self {
        LearnerConfig {
            horizon,
            episodes,
            delta,
            lipschitz,
            d_max: 1.0,
            bonus_scale_stochastic: 1.0,
            bonus_scale_metric: 1.0,
        }
    }

    pub fn with_bonus_scales(mut self, stochastic: f64, metric: f64) -> Self {
        self.bonus_scale_stochastic = stochastic;
        self.bonus_scale_metric = metric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.episodes == 0 {
            return Err(Error::Config("horizon and episodes must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0,1)", self.delta)));
        }
        if !(0.0..).contains(&self.lipschitz) || self.d_max.is_nan() || self.d_max <= 0.0 {
            return Err(Error::Config("lipschitz must be >= 0 and d_max > 0".into()));
        }
        if !(0.0..).contains(&self.bonus_scale_stochastic) || !(0.0..).contains(&self.bonus_scale_metric) {
            return Err(Error::Config("bonus scales must be >= 0".into()));
        }
        Ok(())
    }

    /// `ln(4 H K / delta)`.
    pub fn log_term(&self) -> f64 {
        (4.0 * self.horizon as f64 * self.episodes as f64 / self.delta).ln()
    }

    /// Confidence bonus with the discretization term measured at `length`
    /// instead of `d_max`. The uniform-grid baseline passes its spacing here.
    pub fn bonus_at_length(&self, t: u64, length: f64) -> f64 {
        assert!(t >= 1, "bonus is defined for t >= 1");
        let t = t as f64;
        let h3 = (self.horizon as f64).powi(3);
        self.bonus_scale_stochastic * 2.0 * (h3 * self.log_term() / t).sqrt()
            + self.bonus_scale_metric * 4.0 * self.lipschitz * length / t.sqrt()
    }
}

/// Learning rate `(H + 1) / (H + t)`. Panics for `t = 0`.
pub fn learning_rate(t: u64, horizon: usize) -> f64 {
    assert!(t >= 1, "learning rate is defined for t >= 1");
    (horizon as f64 + 1.0) / (horizon as f64 + t as f64)
}

/// Effective weights `alpha_t^i = alpha_i prod_{j=i+1}^t (1 - alpha_j)` for
/// `i = 1..=t`: the weight the `i`-th target carries after `t` updates.
pub fn alpha_weights(t: u64, horizon: usize) -> Vec<f64> {
    let mut out = vec![0.0; t as usize];
    let mut tail = 1.0;
    for i in (1..=t).rev() {
        let a = learning_rate(i, horizon);
        out[i as usize - 1] = a * tail;
        tail *= 1.0 - a;
    }
    out
}

/// Confidence bonus `b(t)` for a ball selected `t` times.
pub fn bonus(t: u64, cfg: &LearnerConfig) -> f64 {
    cfg.bonus_at_length(t, cfg.d_max)
}

/// Value estimate `min(H, max q_hat)` over the relevant leaves of `x` in the
/// next step's tree; zero past the last step.
pub fn v_estimate(next: Option<&StepPartition>, x: &[f64], horizon: usize) -> Result<f64> {
    match next {
        None => Ok(0.0),
        Some(tree) => Ok(tree.max_relevant_q(x)?.min(horizon as f64)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub ball: NodeId,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Which episodes keep a frozen copy of the greedy policy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotSchedule {
    #[default]
    None,
    All,
    Every(u64),
    Episodes(Vec<u64>),
}

impl SnapshotSchedule {
    pub fn includes(&self, episode: u64) -> bool {
        match self {
            SnapshotSchedule::None => false,
            SnapshotSchedule::All => true,
            SnapshotSchedule::Every(n) => *n > 0 && (episode - 1).is_multiple_of(*n),
            SnapshotSchedule::Episodes(list) => list.contains(&episode),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveAgent {
    config: LearnerConfig,
    space: SpaceDescriptor,
    trees: Vec<StepPartition>,
    episode: u64,
    schedule: SnapshotSchedule,
    snapshots: BTreeMap<u64, GreedyPolicy>,
}

impl AdaptiveAgent {
    /// `H` single-cell partitions with optimistic estimate `H`.
    pub fn new(config: LearnerConfig, space: SpaceDescriptor) -> Result<Self> {
        config.validate()?;
        if config.d_max != space.d_max() {
            return Err(Error::Config(format!(
                "learner d_max {} differs from the space diameter {}",
                config.d_max,
                space.d_max()
            )));
        }
        let trees = (1..=config.horizon)
            .map(|step| StepPartition::new(step, space, config.horizon as f64))
            .collect();
        Ok(AdaptiveAgent {
            config,
            space,
            trees,
            episode: 0,
            schedule: SnapshotSchedule::None,
            snapshots: BTreeMap::new(),
        })
    }

    pub fn with_snapshots(mut self, schedule: SnapshotSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn trees(&self) -> &[StepPartition] {
        &self.trees
    }

    pub fn into_trees(self) -> Vec<StepPartition> {
        self.trees
    }

    /// 1-based index of the episode in progress (0 before the first one).
    pub fn episode(&self) -> u64 {
        self.episode
    }

    fn tree(&self, h: usize) -> Result<&StepPartition> {
        self.trees
            .get(h)
            .ok_or_else(|| Error::InvalidInput(format!("step {h} outside horizon {}", self.config.horizon)))
    }

    /// Greedy choice at 0-based step `h`: the selected ball and the midpoint
    /// of its action interval.
    pub fn act(&self, h: usize, x: &[f64]) -> Result<(NodeId, Vec<f64>)> {
        greedy_action(self.tree(h)?, x)
    }

    /// Q-learning update of the ball chosen at step `h`, followed by a split
    /// if the ball reached its threshold.
    pub fn update(&mut self, h: usize, outcome: &StepOutcome) -> Result<Option<SplitEvent>> {
        let horizon = self.config.horizon;
        self.tree(h)?;
        if !(0.0..=1.0).contains(&outcome.reward) {
            return Err(Error::InvalidInput(format!("reward {} outside [0,1]", outcome.reward)));
        }
        let v_next = v_estimate(self.trees.get(h + 1), &outcome.next_state, horizon)?;

        let tree = &mut self.trees[h];
        let t = tree.record_visit(outcome.ball)?;
        let alpha = learning_rate(t, horizon);
        let q_old = tree.node(outcome.ball).q_hat();
        let target = outcome.reward + v_next + bonus(t, &self.config);
        tree.set_q(outcome.ball, (1.0 - alpha) * q_old + alpha * target);

        if should_split(tree.node(outcome.ball), self.config.d_max) {
            let depth = tree.node(outcome.ball).region().depth();
            tree.split(outcome.ball, self.episode)?;
            return Ok(Some(SplitEvent {
                step: h + 1,
                episode: self.episode,
                node: outcome.ball,
                depth,
                visits: t,
            }));
        }
        Ok(None)
    }

    /// Frozen greedy policy over the current trees.
    pub fn extract_greedy_policy(&self) -> GreedyPolicy {
        GreedyPolicy {
            episode: self.episode,
            trees: self.trees.clone(),
        }
    }

    pub fn snapshots(&self) -> &BTreeMap<u64, GreedyPolicy> {
        &self.snapshots
    }

    /// A policy drawn uniformly from the recorded per-episode snapshots.
    /// With [`SnapshotSchedule::All`] this is uniform over every episode played.
    pub fn sample_pac_policy(&self, rng: &mut SimRng) -> Option<&GreedyPolicy> {
        if self.snapshots.is_empty() {
            return None;
        }
        let i = rng.random_range(0..self.snapshots.len());
        self.snapshots.values().nth(i)
    }
}

fn greedy_action(tree: &StepPartition, x: &[f64]) -> Result<(NodeId, Vec<f64>)> {
    tree.space().check_state(x)?;
    let ball = tree.select_ball(x)?;
    Ok((ball, tree.node(ball).region().action_midpoint()))
}

impl Agent for AdaptiveAgent {
    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn begin_episode(&mut self) -> Result<()> {
        if self.episode >= self.config.episodes {
            return Err(Error::Contract(format!(
                "all {} episodes have been played",
                self.config.episodes
            )));
        }
        self.episode += 1;
        if self.schedule.includes(self.episode) {
            let policy = self.extract_greedy_policy();
            self.snapshots.insert(self.episode, policy);
        }
        Ok(())
    }

    fn act(&mut self, h: usize, state: &[f64]) -> Result<Decision> {
        let (ball, action) = AdaptiveAgent::act(self, h, state)?;
        Ok(Decision { cell: ball.0, action })
    }

    fn observe(
        &mut self,
        h: usize,
        decision: &Decision,
        reward: f64,
        next_state: &[f64],
    ) -> Result<Option<SplitEvent>> {
        self.update(
            h,
            &StepOutcome {
                ball: NodeId(decision.cell),
                action: decision.action.clone(),
                reward,
                next_state: next_state.to_vec(),
            },
        )
    }

    fn partition_sizes(&self) -> Vec<usize> {
        self.trees.iter().map(StepPartition::leaf_count).collect()
    }
}

/// Greedy policy over a frozen copy of the partitions. Running it through
/// [`crate::agent::run_episode`] never changes it.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    episode: u64,
    trees: Vec<StepPartition>,
}

impl GreedyPolicy {
    /// Episode whose start this policy was frozen at.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn action(&self, h: usize, x: &[f64]) -> Result<Vec<f64>> {
        let tree = self
            .trees
            .get(h)
            .ok_or_else(|| Error::InvalidInput(format!("step {h} outside horizon")))?;
        greedy_action(tree, x).map(|(_, a)| a)
    }
}

impl Agent for GreedyPolicy {
    fn horizon(&self) -> usize {
        self.trees.len()
    }

    fn act(&mut self, h: usize, state: &[f64]) -> Result<Decision> {
        let tree = self
            .trees
            .get(h)
            .ok_or_else(|| Error::InvalidInput(format!("step {h} outside horizon")))?;
        let (ball, action) = greedy_action(tree, state)?;
        Ok(Decision { cell: ball.0, action })
    }

    fn observe(&mut self, _: usize, _: &Decision, _: f64, _: &[f64]) -> Result<Option<SplitEvent>> {
        Ok(None)
    }

    fn partition_sizes(&self) -> Vec<usize> {
        self.trees.iter().map(StepPartition::leaf_count).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionRegularity {
    /// Transition kernel Lipschitz in total variation.
    TotalVariation,
    /// Transition kernel Lipschitz in the Wasserstein metric.
    Wasserstein,
}

/// Lipschitz constant of `Q*_h` implied by Lipschitz rewards and transitions.
///
/// For total variation, `l1` bounds the kernel and `l2` the reward, giving
/// `2 l1 H + l2`. For Wasserstein the constant at 1-based step `h` is
/// `sum_{i=0}^{H-h} l1 l2^i`.
pub fn lipschitz_from_primitives(kind: TransitionRegularity, l1: f64, l2: f64, horizon: usize, h: usize) -> f64 {
    assert!((1..=horizon).contains(&h), "step {h} outside [1, {horizon}]");
    match kind {
        TransitionRegularity::TotalVariation => 2.0 * l1 * horizon as f64 + l2,
        TransitionRegularity::Wasserstein => (0..=(horizon - h) as i32).map(|i| l1 * l2.powi(i)).sum(),
    }
}

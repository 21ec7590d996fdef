//! Common agent interface and the episode loop shared by every agent kind.

use serde::Serialize;

use crate::env::{Environment, SimRng};
use crate::error::{Error, Result};
use crate::partition::SplitEvent;

/// An action together with the cell (ball id or grid index) that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub cell: usize,
    pub action: Vec<f64>,
}

/// An episodic learner. Step indices `h` are 0-based.
pub trait Agent {
    fn horizon(&self) -> usize;

    fn act(&mut self, h: usize, state: &[f64]) -> Result<Decision>;

    /// Feeds back the outcome of the decision taken at step `h`.
    fn observe(
        &mut self,
        h: usize,
        decision: &Decision,
        reward: f64,
        next_state: &[f64],
    ) -> Result<Option<SplitEvent>>;

    /// Called before the first step of every episode.
    fn begin_episode(&mut self) -> Result<()> {
        Ok(())
    }

    fn end_episode(&mut self) {}

    /// Number of active cells per step; empty for agents without a discretization.
    fn partition_sizes(&self) -> Vec<usize> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EpisodeTrace {
    /// `H + 1` states, starting with the initial one.
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub cells: Vec<usize>,
    pub splits: Vec<SplitEvent>,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Plays one episode of `agent.horizon()` steps from `x1`.
pub fn run_episode<A: Agent + ?Sized, E: Environment + ?Sized>(
    agent: &mut A,
    env: &E,
    x1: Vec<f64>,
    rng: &mut SimRng,
) -> Result<EpisodeTrace> {
    let horizon = agent.horizon();
    let mut trace = EpisodeTrace {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        cells: Vec::with_capacity(horizon),
        splits: Vec::new(),
    };
    agent.begin_episode()?;
    let mut x = x1;
    for h in 0..horizon {
        let decision = agent.act(h, &x)?;
        let out = env.step(h, &x, &decision.action, rng)?;
        if !(0.0..=1.0).contains(&out.reward) {
            return Err(Error::Contract(format!("reward {} outside [0,1]", out.reward)));
        }
        if let Some(split) = agent.observe(h, &decision, out.reward, &out.next_state)? {
            trace.splits.push(split);
        }
        trace.states.push(std::mem::replace(&mut x, out.next_state));
        trace.actions.push(decision.action);
        trace.rewards.push(out.reward);
        trace.cells.push(decision.cell);
    }
    trace.states.push(x);
    agent.end_episode();
    Ok(trace)
}

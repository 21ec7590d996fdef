//! Q-learning over adaptively refined dyadic partitions of a continuous
//! state-action box, with tabular baselines, two benchmark environments and
//! an experiment harness.

pub mod agent;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod metric;
pub mod par;
pub mod partition;

pub use agent::{run_episode, Agent, Decision, EpisodeTrace};
pub use error::{Error, Result};
pub use learner::{AdaptiveAgent, LearnerConfig};
pub use metric::{Point, SpaceDescriptor};
pub use partition::{NodeId, StepPartition};

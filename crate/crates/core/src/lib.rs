//! Multi-agent path finding on grid worlds with an evolutionary learner,
//! classic baselines, evaluation metrics and a benchmark harness.

pub mod baselines;
pub mod bench;
pub mod egt;
pub mod error;
pub mod gridworld;
pub mod metrics;
pub mod parallel;
pub mod policy;
pub mod seed;

pub use error::{Error, Result};
pub use gridworld::{Action, ActionSet, Cell, GridMap, RewardConfig, WorldConfig};
pub use policy::Policy;

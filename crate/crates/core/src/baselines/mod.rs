//! Reference competitors sharing the same grid world and rewards.

mod astar;
mod tabular;

pub use astar::{astar_plan, PlanResult};
pub use tabular::{
    first_visit_update, mc_train, q_train, Exploration, LearnParams, QTable, ReturnsAccumulator, TabularRun,
};

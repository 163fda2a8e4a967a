//! Evaluation rollouts and the measurement suite.

use std::collections::HashMap;

use rand::Rng;

use crate::egt::{Trajectory, TrainingStats};
use crate::error::{Error, Result};
use crate::gridworld::{manhattan, sample_initial, Action, Cell, GridMap, JointState, RewardConfig, WorldConfig};
use crate::policy::Policy;

/// Chooses actions during an evaluation rollout.
pub trait Controller {
    fn act(&self, agent: usize, t: usize, cell: Cell, rng: &mut dyn rand::RngCore) -> Action;
}

impl Controller for Policy {
    fn act(&self, _agent: usize, _t: usize, cell: Cell, rng: &mut dyn rand::RngCore) -> Action {
        self.sample(cell, rng)
    }
}

/// Per-agent timestep-indexed cell sequences executed open loop.
#[derive(Clone, Debug)]
pub struct PathFollower {
    pub paths: Vec<Vec<Cell>>,
}

impl Controller for PathFollower {
    fn act(&self, agent: usize, t: usize, cell: Cell, _rng: &mut dyn rand::RngCore) -> Action {
        self.paths
            .get(agent)
            .and_then(|p| p.get(t + 1))
            .and_then(|&next| Action::between(cell, next))
            .unwrap_or(Action::Stay)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub trajectories: Vec<Trajectory>,
    /// Sum of rewards per agent.
    pub returns: Vec<f64>,
    /// Sum of `returns`.
    pub cumulative_return: f64,
    pub min_obstacle_distance: Vec<u32>,
}

/// Simulates one episode under a shared policy from sampled start cells.
pub fn rollout<R: Rng>(
    map: &GridMap,
    world: &WorldConfig,
    rewards: &RewardConfig,
    policy: &Policy,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let starts = sample_initial(map, world.n_agents, rng)?;
    rollout_from(map, world, rewards, policy, &starts, rng)
}

/// Simulates one episode from fixed start cells. Agents that reach a goal
/// stop acting but keep occupying their cell.
pub fn rollout_from<R: Rng, C: Controller + ?Sized>(
    map: &GridMap,
    world: &WorldConfig,
    rewards: &RewardConfig,
    controller: &C,
    starts: &[Cell],
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let n = starts.len();
    let mut joint = JointState::new(map, starts)?;
    let mut history: Vec<Vec<Cell>> = vec![starts.to_vec()];
    let mut steps: Vec<Vec<(Cell, Action)>> = vec![Vec::new(); n];
    let mut returns = vec![0.0; n];
    let mut active: Vec<bool> = starts.iter().map(|&c| !map.is_goal(c)).collect();
    let mut actions: Vec<Option<Action>> = vec![None; n];
    let mut events = Vec::with_capacity(n);

    for t in 0..world.horizon {
        if !active.iter().any(|&a| a) {
            break;
        }
        for i in 0..n {
            actions[i] = if active[i] {
                let c = joint.cells()[i];
                let a = controller.act(i, t, c, rng);
                steps[i].push((c, a));
                Some(a)
            } else {
                None
            };
        }
        joint.advance(map, &actions, world.action_noise, rng, &mut events);
        for i in 0..n {
            if active[i] {
                let next = joint.cells()[i];
                returns[i] += rewards.reward(map, next, events[i].blocked_by_map);
                if events[i].reached_goal {
                    active[i] = false;
                }
            }
        }
        history.push(joint.cells().to_vec());
    }

    let trajectories: Vec<Trajectory> = (0..n)
        .map(|i| {
            let final_cell = joint.cells()[i];
            Trajectory {
                steps: std::mem::take(&mut steps[i]),
                final_cell,
                reached_goal: map.is_goal(final_cell),
            }
        })
        .collect();
    let min_obstacle_distance = trajectories
        .iter()
        .enumerate()
        .map(|(i, tau)| history_min_distance(map, &history, i, tau.steps.len()))
        .collect();
    Ok(EpisodeRecord {
        cumulative_return: returns.iter().sum(),
        returns,
        trajectories,
        min_obstacle_distance,
    })
}

fn cell_distance<'a>(map: &GridMap, cell: Cell, others: impl Iterator<Item = &'a Cell>) -> u32 {
    others.fold(map.hazard_distance(cell), |d, &o| d.min(manhattan(cell, o)))
}

fn history_min_distance(map: &GridMap, history: &[Vec<Cell>], agent: usize, last: usize) -> u32 {
    (0..=last)
        .map(|t| {
            let row = &history[t];
            let others = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != agent)
                .map(|(_, c)| c);
            cell_distance(map, row[agent], others)
        })
        .min()
        .unwrap_or(0)
}

/// Smallest Manhattan distance the trajectory ever comes to an obstacle, the
/// out-of-bounds ring, or another agent; `others[t]` holds the other agents'
/// cells at time `t`.
pub fn min_obstacle_distance(tau: &Trajectory, map: &GridMap, others: &[Vec<Cell>]) -> u32 {
    tau.cells()
        .enumerate()
        .map(|(t, c)| cell_distance(map, c, others.get(t).into_iter().flatten()))
        .min()
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub train_s: f64,
    pub run_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// Mean steps over goal-reaching agent-episodes; the horizon when none
    /// succeeded (see `no_successes`).
    pub mean_path_length: f64,
    pub no_successes: bool,
    pub success_rate: f64,
    /// Worst success fraction over start cells.
    pub min_agent_success_rate: f64,
    pub expected_min_obstacle_distance: f64,
    pub mean_cumulative_return: f64,
    pub policy_updates: u64,
    pub agent_episodes: usize,
    pub train_time_s: f64,
    pub run_time_s: f64,
}

impl MetricsReport {
    pub fn total_time_s(&self) -> f64 {
        self.train_time_s + self.run_time_s
    }
}

pub fn aggregate(
    records: &[EpisodeRecord],
    horizon: usize,
    stats: &TrainingStats,
    timings: Timings,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut successes = 0usize;
    let mut agent_episodes = 0usize;
    let mut path_total = 0u64;
    let mut distance_total = 0u64;
    let mut by_start: HashMap<Cell, (usize, usize)> = HashMap::new();
    for record in records {
        for (tau, &d) in record.trajectories.iter().zip(&record.min_obstacle_distance) {
            agent_episodes += 1;
            distance_total += u64::from(d);
            let entry = by_start.entry(tau.start()).or_default();
            entry.1 += 1;
            if tau.reached_goal {
                successes += 1;
                entry.0 += 1;
                path_total += tau.steps.len() as u64;
            }
        }
    }
    if agent_episodes == 0 {
        return Err(Error::EmptyRecords);
    }
    let min_agent_success_rate = by_start
        .values()
        .map(|&(ok, all)| ok as f64 / all as f64)
        .fold(1.0, f64::min);
    Ok(MetricsReport {
        mean_path_length: if successes > 0 {
            path_total as f64 / successes as f64
        } else {
            horizon as f64
        },
        no_successes: successes == 0,
        success_rate: successes as f64 / agent_episodes as f64,
        min_agent_success_rate,
        expected_min_obstacle_distance: distance_total as f64 / agent_episodes as f64,
        mean_cumulative_return: records.iter().map(|r| r.cumulative_return).sum::<f64>() / records.len() as f64,
        policy_updates: stats.policy_updates,
        agent_episodes,
        train_time_s: timings.train_s,
        run_time_s: timings.run_s,
    })
}

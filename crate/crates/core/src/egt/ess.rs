//! Invasion test for evolutionary stability.
//!
//! A trained population is exposed to extra episodes in which, with
//! probability `p_new`, an invading policy acts instead of the incumbent.
//! The strategy is stable when the greedy action map barely moves and the
//! incumbent's fitness does not drop.

use rand::Rng;

use super::train::Driver;
use super::{fitness, greedy_action_map, EgtParams, EgtTrainer};
use crate::error::{Error, Result};
use crate::gridworld::{GridMap, RewardConfig, WorldConfig};
use crate::metrics::rollout;
use crate::parallel;
use crate::policy::Policy;
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invader {
    /// Uniformly random actions.
    Uniform,
    /// The incumbent policy itself (control run).
    Incumbent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssConfig {
    pub p_new: f64,
    /// Extra episodes as a fraction of `EgtParams::episodes`.
    pub extra_episode_fraction: f64,
    /// Evaluation rollouts used for each fitness estimate.
    pub eval_episodes: usize,
    pub agreement_threshold: f64,
    pub fitness_tolerance: f64,
    pub invader: Invader,
}

impl Default for EssConfig {
    fn default() -> Self {
        EssConfig {
            p_new: 0.1,
            extra_episode_fraction: 0.1,
            eval_episodes: 200,
            agreement_threshold: 0.95,
            fitness_tolerance: 0.05,
            invader: Invader::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EssReport {
    pub p_new: f64,
    pub extra_episodes: usize,
    /// Fraction of cells defined in both snapshots whose greedy action is
    /// unchanged.
    pub argmax_agreement: f64,
    /// Negated mean stretch before invasion (higher is fitter).
    pub fitness_before: f64,
    pub fitness_after: f64,
    pub is_ess: bool,
}

/// Negated mean stretch over `episodes` evaluation rollouts. Failed agents
/// count with stretch equal to the horizon, the largest finite value a
/// trajectory can have.
pub fn mean_fitness(
    map: &GridMap,
    world: &WorldConfig,
    policy: &Policy,
    episodes: usize,
    seed: u64,
    threads: usize,
) -> Result<f64> {
    let rewards = RewardConfig::default();
    let per_episode = parallel::map_range(threads, 0..episodes, |k| {
        let mut rng = seed::rng_from(seed, &[stream::ESS_EVAL, k as u64]);
        rollout(map, world, &rewards, policy, &mut rng).map(|rec| {
            rec.trajectories
                .iter()
                .map(|tau| {
                    if tau.reached_goal {
                        fitness(tau)
                    } else {
                        world.horizon as f64
                    }
                })
                .collect::<Vec<f64>>()
        })
    });
    let mut total = 0.0;
    let mut count = 0usize;
    for stretches in per_episode {
        for u in stretches? {
            total += u;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyRecords);
    }
    Ok(-(total / count as f64))
}

pub fn ess_test(
    map: &GridMap,
    world: WorldConfig,
    params: EgtParams,
    cfg: &EssConfig,
    seed: u64,
    threads: usize,
) -> Result<EssReport> {
    if !(0.0..=1.0).contains(&cfg.p_new) {
        return Err(Error::config("p_new must lie in [0, 1]"));
    }
    if !(cfg.extra_episode_fraction >= 0.0 && cfg.extra_episode_fraction.is_finite()) {
        return Err(Error::config("extra_episode_fraction must be non-negative"));
    }
    let mut trainer = EgtTrainer::new(map, world, params, seed)?.with_threads(threads);
    trainer.train()?;

    let greedy_before = greedy_action_map(trainer.table());
    let eval_seed = seed::derive(seed, &[stream::ESS_EVAL]);
    let fitness_before = mean_fitness(map, &world, &trainer.policy(), cfg.eval_episodes, eval_seed, threads)?;

    let extra = (cfg.extra_episode_fraction * params.episodes as f64).round() as usize;
    trainer.refresh_behavior();
    let (p_new, invader, invasion_seed) = (cfg.p_new, cfg.invader, trainer.seed());
    trainer.run_with(extra, move |e| {
        let mut coin = seed::rng_from(invasion_seed, &[stream::INVASION, e]);
        if invader == Invader::Uniform && coin.gen::<f64>() < p_new {
            Driver::Uniform
        } else {
            Driver::Current
        }
    })?;

    let greedy_after = greedy_action_map(trainer.table());
    let fitness_after = mean_fitness(map, &world, &trainer.policy(), cfg.eval_episodes, eval_seed, threads)?;

    let (mut shared, mut same) = (0usize, 0usize);
    for (cell, action) in &greedy_before {
        if let Some(after) = greedy_after.get(cell) {
            shared += 1;
            same += usize::from(after == action);
        }
    }
    let argmax_agreement = if shared == 0 { 1.0 } else { same as f64 / shared as f64 };
    let is_ess =
        argmax_agreement >= cfg.agreement_threshold && fitness_after >= fitness_before - cfg.fitness_tolerance;
    Ok(EssReport {
        p_new,
        extra_episodes: extra,
        argmax_agreement,
        fitness_before,
        fitness_after,
        is_ess,
    })
}

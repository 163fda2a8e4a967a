//! Single experiment: train (or nothing, for the planner), then evaluate.

use std::time::Instant;

use crate::baselines::{astar_plan, mc_train, q_train};
use crate::egt::{EgtTrainer, TrainingStats};
use crate::error::Result;
use crate::gridworld::{sample_initial, GridMap};
use crate::metrics::{aggregate, rollout_from, EpisodeRecord, MetricsReport, PathFollower, Timings};
use crate::parallel;
use crate::policy::Policy;
use crate::seed::{self, stream};

use super::config::{Algorithm, ExperimentConfig};

/// What evaluation acts with.
#[derive(Clone, Debug)]
pub enum Model {
    Policy(Policy),
    /// Plans every evaluation episode from its sampled starts.
    Planner,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    /// Counter or value table in its text snapshot format; empty for A*.
    pub table_snapshot: String,
    pub stats: TrainingStats,
    pub train_time_s: f64,
}

/// Seed for the learner of `algorithm` within the experiment seeded `seed`.
pub fn learner_seed(seed: u64, algorithm: Algorithm) -> u64 {
    seed::derive(seed, &[stream::TRAIN, seed::label(algorithm.name())])
}

pub fn train_model(cfg: &ExperimentConfig, map: &GridMap) -> Result<Trained> {
    let world = cfg.world(map);
    let seed = learner_seed(cfg.seed, cfg.algorithm);
    let clock = Instant::now();
    let (model, table_snapshot, stats) = match cfg.algorithm {
        Algorithm::Astar => {
            world.validate(map)?;
            (Model::Planner, String::new(), TrainingStats::default())
        }
        Algorithm::Egt => {
            let mut trainer = EgtTrainer::new(map, world, cfg.egt_params(map), seed)?.with_threads(cfg.threads);
            trainer.train()?;
            let run = trainer.finish();
            (Model::Policy(run.policy), run.table.to_snapshot(), run.stats)
        }
        Algorithm::Mc | Algorithm::Qlearn => {
            let learn = cfg.learn_params(map);
            let run = if cfg.algorithm == Algorithm::Mc {
                mc_train(map, &world, &cfg.rewards, &learn, seed)?
            } else {
                q_train(map, &world, &cfg.rewards, &learn, seed)?
            };
            (Model::Policy(run.policy), run.q.to_snapshot(map), run.stats)
        }
    };
    Ok(Trained {
        model,
        table_snapshot,
        stats,
        train_time_s: clock.elapsed().as_secs_f64(),
    })
}

/// Runs the configured evaluation episodes. Episode `k` draws its starts
/// from a stream that depends only on the experiment seed and `k`, so every
/// algorithm is evaluated on the same start sets.
pub fn evaluate(
    cfg: &ExperimentConfig,
    map: &GridMap,
    model: &Model,
    stats: &TrainingStats,
    train_time_s: f64,
) -> Result<MetricsReport> {
    let world = cfg.world(map);
    let eval_seed = seed::derive(cfg.seed, &[stream::EVAL]);
    let clock = Instant::now();
    let records: Vec<Result<EpisodeRecord>> = parallel::map_range(cfg.threads, 0..cfg.eval_episodes, |k| {
        let k = k as u64;
        let starts = sample_initial(map, world.n_agents, &mut seed::rng_from(eval_seed, &[k, 0]))?;
        let mut rng = seed::rng_from(eval_seed, &[k, 1]);
        match model {
            Model::Policy(policy) => rollout_from(map, &world, &cfg.rewards, policy, &starts, &mut rng),
            Model::Planner => {
                let plan = astar_plan(map, &starts, world.horizon)?;
                let follower = PathFollower { paths: plan.paths };
                rollout_from(map, &world, &cfg.rewards, &follower, &starts, &mut rng)
            }
        }
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let run_s = clock.elapsed().as_secs_f64();
    aggregate(
        &records,
        world.horizon,
        stats,
        Timings {
            train_s: train_time_s,
            run_s,
        },
    )
}

/// Trains then evaluates on an already loaded map.
pub fn run_on_map(cfg: &ExperimentConfig, map: &GridMap) -> Result<MetricsReport> {
    parallel::with_threads(cfg.threads, || {
        let trained = train_model(cfg, map)?;
        evaluate(cfg, map, &trained.model, &trained.stats, trained.train_time_s)
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let map = cfg.load_map()?;
    run_on_map(cfg, &map)
}

use std::time::Instant;

use rand::Rng;

use super::{construct_policy, update_decision, BehaviorMode, CounterTable, EgtParams, Trajectory};
use crate::error::Result;
use crate::gridworld::{sample_initial, Action, Cell, GridMap, JointState, WorldConfig};
use crate::parallel;
use crate::policy::Policy;
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainingStats {
    pub episodes_run: u64,
    /// Learner-specific count of policy modifications.
    pub policy_updates: u64,
    pub goal_reach_count: u64,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct EgtRun {
    pub policy: Policy,
    pub table: CounterTable,
    pub stats: TrainingStats,
}

/// Which policy drives one training episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Driver {
    Uniform,
    Current,
}

#[derive(Default)]
struct EpisodeOutcome {
    // (distinct pair keys, signed delta) per modified trajectory.
    updates: Vec<(Vec<u32>, i64)>,
    goals: u64,
}

/// Incremental MAPF-EGT training state.
///
/// Episodes between two reconstruction barriers only read the acting
/// policy, so they run independently (in parallel when enabled) and their
/// counter changes are merged in episode order afterwards. Each episode
/// draws from its own stream keyed by (seed, episode index), which makes the
/// result independent of the thread count.
pub struct EgtTrainer<'a> {
    map: &'a GridMap,
    world: WorldConfig,
    params: EgtParams,
    seed: u64,
    threads: usize,
    table: CounterTable,
    behavior: Policy,
    stats: TrainingStats,
}

impl<'a> EgtTrainer<'a> {
    pub fn new(map: &'a GridMap, world: WorldConfig, params: EgtParams, seed: u64) -> Result<Self> {
        world.validate(map)?;
        params.validate()?;
        Ok(EgtTrainer {
            map,
            world,
            params,
            seed,
            threads: 1,
            table: CounterTable::new(map),
            behavior: Policy::uniform(map),
            stats: TrainingStats::default(),
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn table(&self) -> &CounterTable {
        &self.table
    }

    pub fn stats(&self) -> &TrainingStats {
        &self.stats
    }

    /// Policy constructed from the current counters.
    pub fn policy(&self) -> Policy {
        construct_policy(&self.table, self.params.epsilon, self.map)
    }

    /// Runs `params.episodes` episodes.
    pub fn train(&mut self) -> Result<()> {
        self.run(self.params.episodes)
    }

    /// Runs `episodes` more episodes under the configured behavior mode.
    pub fn run(&mut self, episodes: usize) -> Result<()> {
        let driver = match self.params.behavior_mode {
            BehaviorMode::Faithful => Driver::Uniform,
            BehaviorMode::Iterative => Driver::Current,
        };
        self.run_with(episodes, |_| driver)
    }

    /// Rebuilds the acting policy from the counters now.
    pub(crate) fn refresh_behavior(&mut self) {
        self.behavior = self.policy();
    }

    pub(crate) fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn run_with<F>(&mut self, episodes: usize, driver_for: F) -> Result<()>
    where
        F: Fn(u64) -> Driver + Sync,
    {
        let clock = Instant::now();
        let interval = self.params.reconstruct_interval as u64;
        let mut remaining = episodes as u64;
        while remaining > 0 {
            let first = self.stats.episodes_run;
            if first % interval == 0 && first > 0 {
                self.refresh_behavior();
            }
            let block = remaining.min(interval - first % interval);
            let outcomes = {
                let (map, world, params) = (self.map, &self.world, &self.params);
                let (table, behavior, seed) = (&self.table, &self.behavior, self.seed);
                parallel::map_range(self.threads, 0..block as usize, |k| {
                    let e = first + k as u64;
                    let mut rng = seed::rng_from(seed, &[stream::TRAIN, e]);
                    let acting = match driver_for(e) {
                        Driver::Uniform => None,
                        Driver::Current => Some(behavior),
                    };
                    run_episode(map, world, params, table, acting, &mut rng)
                })
            };
            for outcome in outcomes {
                let outcome = outcome?;
                self.stats.goal_reach_count += outcome.goals;
                self.stats.policy_updates += outcome.updates.len() as u64;
                for (keys, delta) in &outcome.updates {
                    self.table.add(keys, *delta);
                }
            }
            self.stats.episodes_run += block;
            remaining -= block;
        }
        self.stats.wall_time += clock.elapsed().as_secs_f64();
        Ok(())
    }

    pub fn finish(self) -> EgtRun {
        EgtRun {
            policy: self.policy(),
            table: self.table,
            stats: self.stats,
        }
    }
}

fn run_episode<R: Rng + ?Sized>(
    map: &GridMap,
    world: &WorldConfig,
    params: &EgtParams,
    table: &CounterTable,
    acting: Option<&Policy>,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    let starts = sample_initial(map, world.n_agents, rng)?;
    let n = starts.len();
    let mut joint = JointState::new(map, &starts)?;
    let mut steps: Vec<Vec<(Cell, Action)>> = vec![Vec::new(); n];
    let mut active: Vec<bool> = starts.iter().map(|&c| !map.is_goal(c)).collect();
    let mut out = EpisodeOutcome {
        goals: active.iter().filter(|&&a| !a).count() as u64,
        ..Default::default()
    };
    let mut actions: Vec<Option<Action>> = vec![None; n];
    let mut events = Vec::with_capacity(n);
    let submit = |tau: Trajectory, rng: &mut R, out: &mut EpisodeOutcome| {
        if let Some(delta) = update_decision(&tau, params, rng) {
            let keys = table.pair_keys(&tau);
            if !keys.is_empty() {
                out.updates.push((keys, delta));
            }
        }
    };

    for _ in 0..world.horizon {
        if !active.iter().any(|&a| a) {
            break;
        }
        for i in 0..n {
            actions[i] = if active[i] {
                let c = joint.cells()[i];
                let a = match acting {
                    Some(policy) => policy.sample(c, rng),
                    None => Action::ALL[rng.gen_range(0..Action::COUNT)],
                };
                steps[i].push((c, a));
                Some(a)
            } else {
                None
            };
        }
        joint.advance(map, &actions, world.action_noise, rng, &mut events);
        for i in 0..n {
            if active[i] && events[i].reached_goal {
                active[i] = false;
                out.goals += 1;
                let tau = Trajectory {
                    steps: std::mem::take(&mut steps[i]),
                    final_cell: joint.cells()[i],
                    reached_goal: true,
                };
                submit(tau, rng, &mut out);
            }
        }
    }
    for i in 0..n {
        if active[i] {
            let tau = Trajectory {
                steps: std::mem::take(&mut steps[i]),
                final_cell: joint.cells()[i],
                reached_goal: false,
            };
            submit(tau, rng, &mut out);
        }
    }
    Ok(out)
}

/// Trains for `params.episodes` episodes and returns the constructed
/// policy, the counters and the run statistics.
pub fn train(
    map: &GridMap,
    world: WorldConfig,
    params: EgtParams,
    seed: u64,
    threads: usize,
) -> Result<EgtRun> {
    let mut trainer = EgtTrainer::new(map, world, params, seed)?.with_threads(threads);
    trainer.train()?;
    Ok(trainer.finish())
}

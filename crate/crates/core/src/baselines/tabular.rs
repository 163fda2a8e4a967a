//! Tabular reward-driven learners: Q-learning and on-policy first-visit
//! Monte Carlo control. All agents share one table; goal cells are
//! absorbing, so the bootstrap term is zero on arrival.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use crate::egt::TrainingStats;
use crate::error::{Error, Result};
use crate::gridworld::{sample_initial, Action, Cell, GridMap, JointState, RewardConfig, WorldConfig};
use crate::policy::{argmax, Policy};
use crate::seed::{self, stream};

/// Linear exploration schedule from `start` to `end` over `decay_episodes`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exploration {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl Exploration {
    pub fn constant(eps: f64) -> Self {
        Exploration {
            start: eps,
            end: eps,
            decay_episodes: 0,
        }
    }

    pub fn at(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub explore: Exploration,
    pub episodes: usize,
    /// Stops training once this many agent-steps have been simulated.
    pub max_agent_steps: Option<u64>,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            learning_rate: 0.5,
            discount: 0.999,
            explore: Exploration {
                start: 1.0,
                end: 0.05,
                decay_episodes: 5_000,
            },
            episodes: 10_000,
            max_agent_steps: None,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("learn.learning_rate must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("learn.discount must lie in [0, 1]"));
        }
        let e = &self.explore;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return Err(Error::config("exploration rates must lie in [0, 1]"));
        }
        if e.end > e.start {
            return Err(Error::config("exploration must not increase (end > start)"));
        }
        Ok(())
    }
}

/// Action-value estimates per (cell, action), zero until written.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    width: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(map: &GridMap) -> QTable {
        QTable {
            width: map.width(),
            values: vec![0.0; map.area() * Action::COUNT],
        }
    }

    fn slot(&self, c: Cell, a: Action) -> usize {
        (c.y as usize * self.width + c.x as usize) * Action::COUNT + a.index()
    }

    pub fn get(&self, c: Cell, a: Action) -> f64 {
        self.values[self.slot(c, a)]
    }

    pub fn set(&mut self, c: Cell, a: Action, v: f64) {
        let i = self.slot(c, a);
        self.values[i] = v;
    }

    pub fn row(&self, c: Cell) -> [f64; Action::COUNT] {
        let i = self.slot(c, Action::Up);
        let mut out = [0.0; Action::COUNT];
        out.copy_from_slice(&self.values[i..i + Action::COUNT]);
        out
    }

    pub fn max(&self, c: Cell) -> f64 {
        self.row(c).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, c: Cell) -> Action {
        argmax(&self.row(c))
    }

    /// One Q-learning backup for the transition `(s, a) -> next` with
    /// reward `r`; returns the new estimate.
    pub fn backup(&mut self, s: Cell, a: Action, r: f64, next: Cell, terminal: bool, alpha: f64, gamma: f64) -> f64 {
        let bootstrap = if terminal { 0.0 } else { self.max(next) };
        let i = self.slot(s, a);
        let q = self.values[i];
        self.values[i] = q + alpha * (r + gamma * bootstrap - q);
        self.values[i]
    }

    /// Policy that is greedy with probability `1 - eps` and uniform otherwise.
    pub fn epsilon_greedy(&self, map: &GridMap, eps: f64) -> Policy {
        Policy::from_fn(map, |c| {
            let mut p = [eps / Action::COUNT as f64; Action::COUNT];
            p[self.greedy(c).index()] += 1.0 - eps;
            p
        })
    }

    /// Lines `x y action value`, 6 decimals, free cells only.
    pub fn to_snapshot(&self, map: &GridMap) -> String {
        let mut out = String::new();
        for c in map.free_cells() {
            for a in Action::ALL {
                let _ = writeln!(out, "{} {} {} {:.6}", c.x, c.y, a, self.get(c, a));
            }
        }
        out
    }
}

/// First-visit return sums and counts per (cell, action).
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnsAccumulator {
    width: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl ReturnsAccumulator {
    pub fn new(map: &GridMap) -> Self {
        ReturnsAccumulator {
            width: map.width(),
            sums: vec![0.0; map.area() * Action::COUNT],
            counts: vec![0; map.area() * Action::COUNT],
        }
    }

    fn slot(&self, c: Cell, a: Action) -> usize {
        (c.y as usize * self.width + c.x as usize) * Action::COUNT + a.index()
    }

    pub fn add(&mut self, c: Cell, a: Action, ret: f64) -> f64 {
        let i = self.slot(c, a);
        self.sums[i] += ret;
        self.counts[i] += 1;
        self.sums[i] / self.counts[i] as f64
    }

    pub fn average(&self, c: Cell, a: Action) -> Option<f64> {
        let i = self.slot(c, a);
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }

    pub fn count(&self, c: Cell, a: Action) -> u64 {
        self.counts[self.slot(c, a)]
    }
}

#[derive(Clone, Debug)]
pub struct TabularRun {
    pub q: QTable,
    pub policy: Policy,
    pub stats: TrainingStats,
}

fn epsilon_greedy_action<R: Rng + ?Sized>(q: &QTable, c: Cell, eps: f64, rng: &mut R) -> Action {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        Action::ALL[rng.gen_range(0..Action::COUNT)]
    } else {
        q.greedy(c)
    }
}

/// One agent's transition inside a joint step.
struct Transition {
    agent: usize,
    from: Cell,
    action: Action,
    reward: f64,
    to: Cell,
    terminal: bool,
}

/// Plays one episode with an ε-greedy joint policy, handing every active
/// agent's transition to `observe` in agent order after each tick.
fn play_episode<R, F>(
    map: &GridMap,
    world: &WorldConfig,
    rewards: &RewardConfig,
    q: &mut QTable,
    eps: f64,
    rng: &mut R,
    mut observe: F,
) -> Result<(u64, u64)>
where
    R: Rng + ?Sized,
    F: FnMut(&mut QTable, Transition),
{
    let starts = sample_initial(map, world.n_agents, rng)?;
    let n = starts.len();
    let mut joint = JointState::new(map, &starts)?;
    let mut active: Vec<bool> = starts.iter().map(|&c| !map.is_goal(c)).collect();
    let mut goals = active.iter().filter(|&&a| !a).count() as u64;
    let mut agent_steps = 0u64;
    let mut actions: Vec<Option<Action>> = vec![None; n];
    let mut before = starts.clone();
    let mut events = Vec::with_capacity(n);
    for _ in 0..world.horizon {
        if !active.iter().any(|&a| a) {
            break;
        }
        before.copy_from_slice(joint.cells());
        for i in 0..n {
            actions[i] = active[i].then(|| epsilon_greedy_action(q, before[i], eps, rng));
        }
        joint.advance(map, &actions, world.action_noise, rng, &mut events);
        for i in 0..n {
            let Some(action) = actions[i] else { continue };
            agent_steps += 1;
            let to = joint.cells()[i];
            let terminal = events[i].reached_goal;
            observe(
                q,
                Transition {
                    agent: i,
                    from: before[i],
                    action,
                    reward: rewards.reward(map, to, events[i].blocked_by_map),
                    to,
                    terminal,
                },
            );
            if terminal {
                active[i] = false;
                goals += 1;
            }
        }
    }
    Ok((agent_steps, goals))
}

fn validate(map: &GridMap, world: &WorldConfig, rewards: &RewardConfig, params: &LearnParams) -> Result<()> {
    world.validate(map)?;
    rewards.validate()?;
    params.validate()
}

/// Episodic ε-greedy Q-learning; every agent transition is one update.
pub fn q_train(
    map: &GridMap,
    world: &WorldConfig,
    rewards: &RewardConfig,
    params: &LearnParams,
    seed: u64,
) -> Result<TabularRun> {
    validate(map, world, rewards, params)?;
    let clock = Instant::now();
    let mut q = QTable::new(map);
    let mut stats = TrainingStats::default();
    let mut total_steps = 0u64;
    let (alpha, gamma) = (params.learning_rate, params.discount);
    for e in 0..params.episodes {
        if params.max_agent_steps.is_some_and(|cap| total_steps >= cap) {
            break;
        }
        let mut rng = seed::rng_from(seed, &[stream::TRAIN, e as u64]);
        let eps = params.explore.at(e);
        let mut updates = 0u64;
        let (steps, goals) = play_episode(map, world, rewards, &mut q, eps, &mut rng, |q, tr| {
            q.backup(tr.from, tr.action, tr.reward, tr.to, tr.terminal, alpha, gamma);
            updates += 1;
        })?;
        total_steps += steps;
        stats.policy_updates += updates;
        stats.goal_reach_count += goals;
        stats.episodes_run += 1;
    }
    stats.wall_time = clock.elapsed().as_secs_f64();
    Ok(TabularRun {
        policy: q.epsilon_greedy(map, params.explore.end),
        q,
        stats,
    })
}

/// Writes discounted first-visit returns of one agent's episode into `acc`
/// and `q`; returns the number of accumulator writes.
pub fn first_visit_update(
    acc: &mut ReturnsAccumulator,
    q: &mut QTable,
    episode: &[(Cell, Action, f64)],
    gamma: f64,
) -> u64 {
    let mut returns = vec![0.0; episode.len()];
    let mut g = 0.0;
    for (t, &(_, _, r)) in episode.iter().enumerate().rev() {
        g = r + gamma * g;
        returns[t] = g;
    }
    let mut seen: Vec<(Cell, Action)> = Vec::new();
    let mut writes = 0;
    for (t, &(c, a, _)) in episode.iter().enumerate() {
        if seen.contains(&(c, a)) {
            continue;
        }
        seen.push((c, a));
        let avg = acc.add(c, a, returns[t]);
        q.set(c, a, avg);
        writes += 1;
    }
    writes
}

/// On-policy first-visit Monte Carlo control over state-action values.
pub fn mc_train(
    map: &GridMap,
    world: &WorldConfig,
    rewards: &RewardConfig,
    params: &LearnParams,
    seed: u64,
) -> Result<TabularRun> {
    validate(map, world, rewards, params)?;
    let clock = Instant::now();
    let mut q = QTable::new(map);
    let mut acc = ReturnsAccumulator::new(map);
    let mut stats = TrainingStats::default();
    let mut total_steps = 0u64;
    let mut episodes: Vec<Vec<(Cell, Action, f64)>> = vec![Vec::new(); world.n_agents];
    for e in 0..params.episodes {
        if params.max_agent_steps.is_some_and(|cap| total_steps >= cap) {
            break;
        }
        let mut rng = seed::rng_from(seed, &[stream::TRAIN, e as u64]);
        let eps = params.explore.at(e);
        episodes.iter_mut().for_each(Vec::clear);
        let (steps, goals) = play_episode(map, world, rewards, &mut q, eps, &mut rng, |_, tr| {
            episodes[tr.agent].push((tr.from, tr.action, tr.reward));
        })?;
        for ep in &episodes {
            stats.policy_updates += first_visit_update(&mut acc, &mut q, ep, params.discount);
        }
        total_steps += steps;
        stats.goal_reach_count += goals;
        stats.episodes_run += 1;
    }
    stats.wall_time = clock.elapsed().as_secs_f64();
    Ok(TabularRun {
        policy: q.epsilon_greedy(map, params.explore.end),
        q,
        stats,
    })
}

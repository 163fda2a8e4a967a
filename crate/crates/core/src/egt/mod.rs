//! The evolutionary learner.
//!
//! Every state-action pair is an "organism" whose population is an integer
//! counter. Trajectories that reach a goal along short paths replicate the
//! pairs they used; trajectories that fail badly drive their pairs toward
//! extinction. The policy is read off the surviving populations.

mod ess;
mod train;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

pub use ess::{ess_test, EssConfig, EssReport, Invader};
pub use train::{train, EgtRun, EgtTrainer, TrainingStats};

use crate::error::{Error, Result};
use crate::gridworld::{manhattan, Action, Cell, GridMap};
use crate::policy::Policy;

/// Fitness of a trajectory that loops back to its start cell.
pub const WORST_FITNESS: f64 = f64::INFINITY;

/// One agent's path: the visited (cell, action) pairs and where it ended.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<(Cell, Action)>,
    pub final_cell: Cell,
    pub reached_goal: bool,
}

impl Trajectory {
    pub fn start(&self) -> Cell {
        self.steps.first().map_or(self.final_cell, |&(c, _)| c)
    }

    /// Number of states, `steps + 1`.
    pub fn state_count(&self) -> usize {
        self.steps.len() + 1
    }

    /// Cell occupied at each time index, final cell included.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.steps
            .iter()
            .map(|&(c, _)| c)
            .chain(std::iter::once(self.final_cell))
    }
}

/// Stretch factor `steps / manhattan(start, final)`: 1 is a straight run,
/// larger is worse. Zero steps score 1; returning to the start scores
/// [`WORST_FITNESS`].
pub fn fitness(tau: &Trajectory) -> f64 {
    let steps = tau.steps.len();
    if steps == 0 {
        return 1.0;
    }
    let d = manhattan(tau.start(), tau.final_cell);
    if d == 0 {
        WORST_FITNESS
    } else {
        steps as f64 / f64::from(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BehaviorMode {
    /// Act uniformly at random for the whole run.
    Faithful,
    /// Rebuild the acting policy from the counters every
    /// `reconstruct_interval` episodes.
    Iterative,
}

impl std::str::FromStr for BehaviorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(BehaviorMode::Faithful),
            "iterative" => Ok(BehaviorMode::Iterative),
            _ => Err(Error::config(format!("unknown behavior mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgtParams {
    /// Stretch up to which a successful path counts as short.
    pub eta: f64,
    /// Sharpness of the short-path update probability.
    pub alpha: f64,
    /// Stretch from which a failed path is penalized.
    pub beta: f64,
    /// Replication increment.
    pub nu: u32,
    /// Extinction decrement.
    pub mu: u32,
    /// Weight of the uniform distribution mixed into constructed policies.
    pub epsilon: f64,
    pub episodes: usize,
    pub reconstruct_interval: usize,
    pub behavior_mode: BehaviorMode,
}

impl Default for EgtParams {
    fn default() -> Self {
        EgtParams {
            eta: 1.5,
            alpha: 2.0,
            beta: 2.0,
            nu: 10,
            mu: 1,
            epsilon: 0.05,
            episodes: 200_000,
            reconstruct_interval: 1000,
            behavior_mode: BehaviorMode::Iterative,
        }
    }
}

impl EgtParams {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.eta) {
            return Err(Error::config("egt.eta must lie in [1, 2]"));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::config("egt.alpha must exceed 1"));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::config("egt.beta must be at least 1"));
        }
        if self.nu == 0 || self.mu == 0 {
            return Err(Error::config("egt.nu and egt.mu must be positive"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("egt.epsilon must lie in [0, 1]"));
        }
        if self.reconstruct_interval == 0 {
            return Err(Error::config("egt.reconstruct_interval must be positive"));
        }
        Ok(())
    }
}

/// Probability of replicating a goal-reaching trajectory with stretch `u`.
pub fn update_probability(u: f64, eta: f64, alpha: f64) -> f64 {
    if u <= eta {
        1.0 - (u - 1.0).max(0.0).powf(alpha)
    } else {
        1.0 / u
    }
}

/// Signed counter change a trajectory earns, if any. Consumes one uniform
/// draw for non-empty goal-reaching trajectories.
pub fn update_decision<R: Rng + ?Sized>(tau: &Trajectory, params: &EgtParams, rng: &mut R) -> Option<i64> {
    if tau.steps.is_empty() {
        return None;
    }
    let u = fitness(tau);
    if tau.reached_goal {
        let p = update_probability(u, params.eta, params.alpha);
        (rng.gen::<f64>() < p).then_some(i64::from(params.nu))
    } else if u >= params.beta {
        Some(-i64::from(params.mu))
    } else {
        None
    }
}

/// Population counters per (cell, action); `None` is "never updated".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterTable {
    width: usize,
    height: usize,
    counters: Vec<Option<i64>>,
}

impl CounterTable {
    pub fn new(map: &GridMap) -> CounterTable {
        CounterTable {
            width: map.width(),
            height: map.height(),
            counters: vec![None; map.area() * Action::COUNT],
        }
    }

    fn cell_index(&self, c: Cell) -> Option<usize> {
        (c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height)
            .then(|| c.y as usize * self.width + c.x as usize)
    }

    pub fn get(&self, c: Cell, a: Action) -> Option<i64> {
        self.cell_index(c)
            .and_then(|i| self.counters[i * Action::COUNT + a.index()])
    }

    pub(crate) fn row(&self, cell_index: usize) -> &[Option<i64>] {
        &self.counters[cell_index * Action::COUNT..(cell_index + 1) * Action::COUNT]
    }

    /// Flat (cell, action) keys of the distinct pairs in `tau`, sorted.
    pub(crate) fn pair_keys(&self, tau: &Trajectory) -> Vec<u32> {
        let mut keys: Vec<u32> = tau
            .steps
            .iter()
            .filter_map(|&(c, a)| self.cell_index(c).map(|i| (i * Action::COUNT + a.index()) as u32))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    /// Adds `delta` once to every key, treating `None` as 0.
    pub(crate) fn add(&mut self, keys: &[u32], delta: i64) {
        for &k in keys {
            let slot = &mut self.counters[k as usize];
            *slot = Some(slot.unwrap_or(0) + delta);
        }
    }

    /// Number of defined entries.
    pub fn defined(&self) -> usize {
        self.counters.iter().filter(|c| c.is_some()).count()
    }

    /// Lines `x y action counter`, sorted by cell then action, `None`
    /// entries omitted.
    pub fn to_snapshot(&self) -> String {
        let mut entries: Vec<(Cell, Action, i64)> = Vec::new();
        for (k, v) in self.counters.iter().enumerate() {
            if let Some(v) = *v {
                let i = k / Action::COUNT;
                let c = Cell::new((i % self.width) as i32, (i / self.width) as i32);
                entries.push((c, Action::ALL[k % Action::COUNT], v));
            }
        }
        entries.sort();
        let mut out = String::new();
        for (c, a, v) in entries {
            let _ = writeln!(out, "{} {} {} {}", c.x, c.y, a, v);
        }
        out
    }

    pub fn parse_snapshot(text: &str, map: &GridMap) -> Result<CounterTable> {
        let mut table = CounterTable::new(map);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::Snapshot {
                line: n + 1,
                reason: reason.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let c = Cell::new(
                f[0].parse().map_err(|_| bad("bad x"))?,
                f[1].parse().map_err(|_| bad("bad y"))?,
            );
            if !map.is_free(c) {
                return Err(bad("cell is not a free map cell"));
            }
            let a: Action = f[2].parse().map_err(|_| bad("bad action"))?;
            let v: i64 = f[3].parse().map_err(|_| bad("bad counter"))?;
            table.counters[map.index(c) * Action::COUNT + a.index()] = Some(v);
        }
        Ok(table)
    }
}

/// Applies the fitness-driven update for `tau`. Returns whether the table
/// changed and how many distinct pairs were written.
pub fn apply_update<R: Rng + ?Sized>(
    table: &mut CounterTable,
    tau: &Trajectory,
    params: &EgtParams,
    rng: &mut R,
) -> (bool, usize) {
    match update_decision(tau, params, rng) {
        Some(delta) => {
            let keys = table.pair_keys(tau);
            table.add(&keys, delta);
            (!keys.is_empty(), keys.len())
        }
        None => (false, 0),
    }
}

/// Per-cell training distribution: uniform when nothing is known or no
/// counter is positive, otherwise proportional to the positive counters.
fn counter_distribution(row: &[Option<i64>]) -> [f64; Action::COUNT] {
    let total: i64 = row.iter().flatten().filter(|&&v| v > 0).sum();
    if total <= 0 {
        return [1.0 / Action::COUNT as f64; Action::COUNT];
    }
    let mut p = [0.0; Action::COUNT];
    for (slot, v) in p.iter_mut().zip(row) {
        if let Some(v) = *v {
            if v > 0 {
                *slot = v as f64 / total as f64;
            }
        }
    }
    p
}

/// Turns counters into a policy mixed with the uniform distribution at
/// weight `epsilon`.
pub fn construct_policy(table: &CounterTable, epsilon: f64, map: &GridMap) -> Policy {
    let uniform = 1.0 / Action::COUNT as f64;
    Policy::from_fn(map, |c| {
        let train = counter_distribution(table.row(map.index(c)));
        train.map(|p| (1.0 - epsilon) * p + epsilon * uniform)
    })
}

/// Largest-counter action per cell with at least one defined counter; ties
/// go to the earlier action in `Up, Down, Left, Right, Stay`.
pub fn greedy_action_map(table: &CounterTable) -> BTreeMap<Cell, Action> {
    let mut out = BTreeMap::new();
    for i in 0..table.width * table.height {
        let row = table.row(i);
        let best = row
            .iter()
            .enumerate()
            .filter_map(|(a, v)| v.map(|v| (a, v)))
            .fold(None, |best: Option<(usize, i64)>, (a, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((a, v)),
            });
        if let Some((a, _)) = best {
            let c = Cell::new((i % table.width) as i32, (i / table.width) as i32);
            out.insert(c, Action::ALL[a]);
        }
    }
    out
}

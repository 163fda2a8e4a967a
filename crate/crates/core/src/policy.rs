use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gridworld::{Action, Cell, GridMap};

const UNIFORM: [f64; Action::COUNT] = [1.0 / Action::COUNT as f64; Action::COUNT];

/// A stationary stochastic policy shared by all agents: one distribution
/// over the five actions per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    width: usize,
    height: usize,
    probs: Vec<[f64; Action::COUNT]>,
}

impl Policy {
    pub fn uniform(map: &GridMap) -> Policy {
        Policy {
            width: map.width(),
            height: map.height(),
            probs: vec![UNIFORM; map.area()],
        }
    }

    /// Builds a policy from a per-cell distribution; obstacle cells keep the
    /// uniform distribution.
    pub fn from_fn<F>(map: &GridMap, mut f: F) -> Policy
    where
        F: FnMut(Cell) -> [f64; Action::COUNT],
    {
        let mut policy = Policy::uniform(map);
        for c in map.free_cells() {
            policy.probs[map.index(c)] = f(c);
        }
        policy
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn slot(&self, c: Cell) -> Option<usize> {
        (c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height)
            .then(|| c.y as usize * self.width + c.x as usize)
    }

    /// Action distribution at `c`; uniform for cells outside the policy.
    pub fn probs(&self, c: Cell) -> &[f64; Action::COUNT] {
        self.slot(c).map_or(&UNIFORM, |i| &self.probs[i])
    }

    pub fn prob(&self, c: Cell, a: Action) -> f64 {
        self.probs(c)[a.index()]
    }

    pub fn sample<R: Rng + ?Sized>(&self, c: Cell, rng: &mut R) -> Action {
        sample_from(self.probs(c), rng)
    }

    /// Most probable action, ties broken by action order.
    pub fn greedy(&self, c: Cell) -> Action {
        argmax(self.probs(c))
    }

    /// One line per free cell: `x y p_up p_down p_left p_right p_stay`.
    pub fn to_snapshot(&self, map: &GridMap) -> String {
        let mut out = String::new();
        for c in map.free_cells() {
            let p = self.probs(c);
            let _ = writeln!(
                out,
                "{} {} {:.6} {:.6} {:.6} {:.6} {:.6}",
                c.x, c.y, p[0], p[1], p[2], p[3], p[4]
            );
        }
        out
    }

    /// Reads a snapshot written by [`Policy::to_snapshot`]. Missing cells
    /// stay uniform; rows are renormalized to absorb rounding.
    pub fn parse_snapshot(text: &str, map: &GridMap) -> Result<Policy> {
        let mut policy = Policy::uniform(map);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let bad = |reason: &str| Error::Snapshot {
                line: n + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 + Action::COUNT {
                return Err(bad("expected 7 fields"));
            }
            let x: i32 = fields[0].parse().map_err(|_| bad("bad x"))?;
            let y: i32 = fields[1].parse().map_err(|_| bad("bad y"))?;
            let c = Cell::new(x, y);
            if !map.is_free(c) {
                return Err(bad("cell is not a free map cell"));
            }
            let mut p = [0.0f64; Action::COUNT];
            for (slot, f) in p.iter_mut().zip(&fields[2..]) {
                *slot = f.parse().map_err(|_| bad("bad probability"))?;
                if !(*slot >= 0.0 && slot.is_finite()) {
                    return Err(bad("probability out of range"));
                }
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-4 {
                return Err(bad("probabilities do not sum to 1"));
            }
            p.iter_mut().for_each(|v| *v /= total);
            policy.probs[map.index(c)] = p;
        }
        Ok(policy)
    }
}

pub(crate) fn sample_from<R: Rng + ?Sized>(p: &[f64; Action::COUNT], rng: &mut R) -> Action {
    let mut u: f64 = rng.gen();
    for (i, &w) in p.iter().enumerate() {
        if u < w {
            return Action::ALL[i];
        }
        u -= w;
    }
    // Rounding left a sliver past the last bucket; take the last positive one.
    let last = p.iter().rposition(|&w| w > 0.0).unwrap_or(Action::COUNT - 1);
    Action::ALL[last]
}

pub(crate) fn argmax(values: &[f64; Action::COUNT]) -> Action {
    let mut best = 0;
    for i in 1..Action::COUNT {
        if values[i] > values[best] {
            best = i;
        }
    }
    Action::ALL[best]
}

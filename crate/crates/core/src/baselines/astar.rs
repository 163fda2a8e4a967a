//! Prioritized space-time A* with a reservation table.
//!
//! Agents are planned one after another in index order. Each search runs
//! over (cell, timestep) nodes and avoids everything earlier agents have
//! reserved. A move from `c` to `n` between `t` and `t + 1` needs `n` free at
//! `t + 1` and `c` free at `t + 1` (nobody earlier steps into the cell being
//! left), which rules out vertex and swap conflicts and keeps plans
//! executable under the environment's index-ordered conflict resolution.
//! Start cells of agents not yet planned are off limits to earlier agents,
//! so a later agent can always fall back to waiting where it stands.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gridworld::{Action, Cell, GridMap};

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// Per-agent cells indexed by timestep, waits included. An agent stays
    /// on its last cell after its path ends.
    pub paths: Vec<Vec<Cell>>,
    pub success: Vec<bool>,
    pub expanded: usize,
}

impl PlanResult {
    /// Lines `agent t x y`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (agent, path) in self.paths.iter().enumerate() {
            for (t, c) in path.iter().enumerate() {
                let _ = writeln!(out, "{agent} {t} {} {}", c.x, c.y);
            }
        }
        out
    }

    /// Moves made by agent `i` before it stops.
    pub fn path_length(&self, agent: usize) -> usize {
        self.paths[agent].len().saturating_sub(1)
    }
}

const NEVER: u32 = u32::MAX;

struct Reservations {
    vertex: HashSet<u64>,
    // Time from which the cell is held forever.
    parked_from: Vec<u32>,
    // Latest reserved time on the cell (excluding parking).
    last: Vec<Option<u32>>,
    // Start cells of agents not planned yet.
    start_blocked: Vec<bool>,
}

fn key(cell: usize, t: u32) -> u64 {
    ((cell as u64) << 32) | u64::from(t)
}

impl Reservations {
    fn occupied(&self, cell: usize, t: u32) -> bool {
        self.start_blocked[cell]
            || t >= self.parked_from[cell]
            || self.last[cell].is_some_and(|lt| t <= lt) && self.vertex.contains(&key(cell, t))
    }

    /// True when nothing is reserved on `cell` at any time after `t`.
    fn clear_after(&self, cell: usize, t: u32) -> bool {
        !self.start_blocked[cell] && self.parked_from[cell] == NEVER && self.last[cell].map_or(true, |lt| lt <= t)
    }

    fn reserve(&mut self, map: &GridMap, path: &[Cell]) {
        for (t, &c) in path.iter().enumerate() {
            let i = map.index(c);
            self.vertex.insert(key(i, t as u32));
            let lt = self.last[i].get_or_insert(t as u32);
            *lt = (*lt).max(t as u32);
        }
        if let Some(&end) = path.last() {
            let i = map.index(end);
            self.parked_from[i] = self.parked_from[i].min(path.len() as u32 - 1);
        }
    }
}

/// Manhattan distance to the nearest goal, ignoring obstacles.
fn goal_heuristic(map: &GridMap) -> Vec<u32> {
    let (w, h) = (map.width(), map.height());
    let far = (w + h) as u32;
    let mut d: Vec<u32> = (0..w * h)
        .map(|i| if map.is_goal(map.cell_at(i)) { 0 } else { far })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x > 0 {
                d[i] = d[i].min(d[i - 1] + 1);
            }
            if y > 0 {
                d[i] = d[i].min(d[i - w] + 1);
            }
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            if x + 1 < w {
                d[i] = d[i].min(d[i + 1] + 1);
            }
            if y + 1 < h {
                d[i] = d[i].min(d[i + w] + 1);
            }
        }
    }
    d
}

pub fn astar_plan(map: &GridMap, starts: &[Cell], horizon: usize) -> Result<PlanResult> {
    let mut start_blocked = vec![false; map.area()];
    for &s in starts {
        if !map.is_free(s) {
            return Err(Error::InvalidState(s));
        }
        let i = map.index(s);
        if start_blocked[i] {
            return Err(Error::InvalidJointState(s));
        }
        start_blocked[i] = true;
    }
    let horizon = horizon.min(u32::MAX as usize - 1) as u32;
    let h = goal_heuristic(map);
    let mut res = Reservations {
        vertex: HashSet::new(),
        parked_from: vec![NEVER; map.area()],
        last: vec![None; map.area()],
        start_blocked,
    };
    let mut result = PlanResult {
        paths: Vec::with_capacity(starts.len()),
        success: Vec::with_capacity(starts.len()),
        expanded: 0,
    };
    for &start in starts {
        res.start_blocked[map.index(start)] = false;
        let (path, expanded) = search(map, &res, &h, start, horizon);
        result.expanded += expanded;
        let ok = path.is_some();
        let path = path.unwrap_or_else(|| vec![start]);
        res.reserve(map, &path);
        result.paths.push(path);
        result.success.push(ok);
    }
    Ok(result)
}

fn search(map: &GridMap, res: &Reservations, h: &[u32], start: Cell, horizon: u32) -> (Option<Vec<Cell>>, usize) {
    let si = map.index(start);
    // Open list ordered by (f, deeper first, insertion) for determinism.
    let mut open: BinaryHeap<Reverse<(u32, Reverse<u32>, u64, u32)>> = BinaryHeap::new();
    let mut parent: HashMap<u64, u64> = HashMap::new();
    // Earliest time from which a cell with no further reservations was reached.
    let mut settled: HashMap<u32, u32> = HashMap::new();
    let mut counter = 0u64;
    let mut expanded = 0usize;

    if h[si] > horizon {
        return (None, 0);
    }
    open.push(Reverse((h[si], Reverse(0), counter, si as u32)));
    parent.insert(key(si, 0), u64::MAX);

    while let Some(Reverse((_, Reverse(t), _, ci))) = open.pop() {
        let ci = ci as usize;
        expanded += 1;
        if map.is_goal(map.cell_at(ci)) {
            // Agents stop on the first goal they touch, so goals are never
            // passed through.
            if !res.clear_after(ci, t) {
                continue;
            }
            let mut path = Vec::with_capacity(t as usize + 1);
            let mut k = key(ci, t);
            while k != u64::MAX {
                path.push(map.cell_at((k >> 32) as usize));
                k = parent[&k];
            }
            path.reverse();
            return (Some(path), expanded);
        }
        if t >= horizon || res.occupied(ci, t + 1) {
            // Waiting is impossible, and so is leaving: someone steps in.
            continue;
        }
        let here = map.cell_at(ci);
        for a in Action::ALL {
            let next = here.offset(a);
            if !map.is_free(next) {
                continue;
            }
            let ni = map.index(next);
            let nt = t + 1;
            if nt + h[ni] > horizon || res.occupied(ni, nt) {
                continue;
            }
            // Arrivals by a move at a cell that is already reachable earlier
            // and stays free are dominated by waiting there.
            if a != Action::Stay && res.clear_after(ni, nt) {
                match settled.entry(ni as u32) {
                    Entry::Occupied(e) if *e.get() <= nt => continue,
                    Entry::Occupied(mut e) => {
                        e.insert(nt);
                    }
                    Entry::Vacant(e) => {
                        e.insert(nt);
                    }
                }
            }
            let k = key(ni, nt);
            if let Entry::Vacant(e) = parent.entry(k) {
                e.insert(key(ci, t));
                counter += 1;
                open.push(Reverse((nt + h[ni], Reverse(nt), counter, ni as u32)));
            }
        }
    }
    (None, expanded)
}

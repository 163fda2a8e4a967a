//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use mapf_egt::{Action, Cell, GridMap, RewardConfig};

const MOVES: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

fn free(map: &GridMap, c: Cell) -> bool {
    c.x >= 0 && c.y >= 0 && (c.x as usize) < map.width() && (c.y as usize) < map.height() && !map.is_obstacle(c)
}

/// Plain BFS over free cells from `start` to the nearest goal.
pub fn bfs_to_goal(map: &GridMap, start: Cell) -> Option<usize> {
    let mut dist: HashMap<Cell, usize> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    dist.insert(start, 0);
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        if map.is_goal(c) {
            return Some(d);
        }
        for (dx, dy) in MOVES {
            let n = Cell::new(c.x + dx, c.y + dy);
            if free(map, n) && !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

/// Sequential conflict resolution written directly from the rule: agents
/// act in index order, a move is blocked by bounds, obstacles, or any agent
/// currently standing on the target.
pub fn resolve(map: &GridMap, cells: &[Cell], actions: &[Action]) -> Vec<Cell> {
    let mut pos = cells.to_vec();
    for i in 0..pos.len() {
        let (dx, dy) = match actions[i] {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => continue,
        };
        let target = Cell::new(pos[i].x + dx, pos[i].y + dy);
        if !free(map, target) {
            continue;
        }
        if (0..pos.len()).any(|j| j != i && pos[j] == target) {
            continue;
        }
        pos[i] = target;
    }
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if pos[i] == cells[j] && pos[j] == cells[i] && pos[i] != cells[i] {
                pos[i] = cells[i];
                pos[j] = cells[j];
            }
        }
    }
    pos
}

/// Vertex and swap conflicts between plans; agents wait on their last cell
/// once their path ends.
pub fn plan_conflicts(paths: &[Vec<Cell>]) -> Vec<String> {
    let at = |p: &Vec<Cell>, t: usize| p[t.min(p.len() - 1)];
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut found = Vec::new();
    for t in 0..horizon {
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                if at(&paths[i], t) == at(&paths[j], t) {
                    found.push(format!("vertex {i}/{j} at t={t}"));
                }
                if t + 1 < horizon
                    && at(&paths[i], t) == at(&paths[j], t + 1)
                    && at(&paths[i], t + 1) == at(&paths[j], t)
                    && at(&paths[i], t) != at(&paths[i], t + 1)
                {
                    found.push(format!("swap {i}/{j} at t={t}"));
                }
            }
        }
    }
    found
}

/// Breadth-first search over the joint configuration of two agents. Agents
/// standing on a goal stay there. Returns the earliest time both are on
/// distinct goals.
pub fn joint_bfs_makespan(map: &GridMap, a: Cell, b: Cell, horizon: usize) -> Option<usize> {
    let mut seen: HashMap<(Cell, Cell), usize> = HashMap::from([((a, b), 0)]);
    let mut queue = VecDeque::from([(a, b)]);
    let options = |c: Cell| -> Vec<Cell> {
        if map.is_goal(c) {
            return vec![c];
        }
        let mut v = vec![c];
        v.extend(
            MOVES
                .iter()
                .map(|&(dx, dy)| Cell::new(c.x + dx, c.y + dy))
                .filter(|&n| free(map, n)),
        );
        v
    };
    while let Some((p, q)) = queue.pop_front() {
        let d = seen[&(p, q)];
        if map.is_goal(p) && map.is_goal(q) {
            return Some(d);
        }
        if d == horizon {
            continue;
        }
        for np in options(p) {
            for nq in options(q) {
                if np == nq || (np == q && nq == p) {
                    continue;
                }
                if !seen.contains_key(&(np, nq)) {
                    seen.insert((np, nq), d + 1);
                    queue.push_back((np, nq));
                }
            }
        }
    }
    None
}

/// Single-agent action values by value iteration. Goals are absorbing and
/// end the episode, so their successors contribute nothing.
pub struct ValueIteration {
    pub q: HashMap<(Cell, Action), f64>,
}

impl ValueIteration {
    pub fn solve(map: &GridMap, rewards: &RewardConfig, gamma: f64, tol: f64) -> ValueIteration {
        let cells: Vec<Cell> = map.free_cells().collect();
        let mut v: HashMap<Cell, f64> = cells.iter().map(|&c| (c, 0.0)).collect();
        let outcome = |c: Cell, a: Action| -> (Cell, f64) {
            let n = c.offset(a);
            if free(map, n) {
                let r = if map.is_goal(n) { rewards.delta3 } else { rewards.delta1 };
                (n, r)
            } else {
                let r = if map.is_goal(c) { rewards.delta3 } else { rewards.delta2 };
                (c, r)
            }
        };
        for _ in 0..1_000_000 {
            let mut residual = 0.0f64;
            for &c in &cells {
                if map.is_goal(c) {
                    continue;
                }
                let best = Action::ALL
                    .iter()
                    .map(|&a| {
                        let (n, r) = outcome(c, a);
                        r + if map.is_goal(n) { 0.0 } else { gamma * v[&n] }
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                residual = residual.max((best - v[&c]).abs());
                v.insert(c, best);
            }
            if residual < tol {
                break;
            }
        }
        let mut q = HashMap::new();
        for &c in &cells {
            for a in Action::ALL {
                let (n, r) = outcome(c, a);
                let value = r + if map.is_goal(n) { 0.0 } else { gamma * v[&n] };
                q.insert((c, a), value);
            }
        }
        ValueIteration { q }
    }

    pub fn value(&self, c: Cell) -> f64 {
        Action::ALL
            .iter()
            .map(|&a| self.q[&(c, a)])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Steps the optimal policy needs from `c`.
    pub fn optimal_length(&self, map: &GridMap, c: Cell, cap: usize) -> Option<usize> {
        follow(map, c, cap, |cell| {
            let best = self.value(cell);
            Action::ALL
                .into_iter()
                .find(|&a| (self.q[&(cell, a)] - best).abs() < 1e-9)
                .unwrap_or(Action::Stay)
        })
    }
}

/// Follows a deterministic controller from `c` until a goal, at most `cap`
/// steps.
pub fn follow(map: &GridMap, mut c: Cell, cap: usize, mut act: impl FnMut(Cell) -> Action) -> Option<usize> {
    for t in 0..=cap {
        if map.is_goal(c) {
            return Some(t);
        }
        let n = c.offset(act(c));
        if free(map, n) {
            c = n;
        }
    }
    None
}

/// Minimum over time of the distance to any obstacle, any cell of the
/// one-cell ring around the map, or any co-temporal other agent.
pub fn brute_min_distance(map: &GridMap, cells: &[Cell], others: &[Vec<Cell>]) -> u32 {
    let (w, h) = (map.width() as i32, map.height() as i32);
    let mut hazards = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            let c = Cell::new(x, y);
            if x < 0 || y < 0 || x == w || y == h || map.is_obstacle(c) {
                hazards.push(c);
            }
        }
    }
    let mut best = u32::MAX;
    for (t, &c) in cells.iter().enumerate() {
        for &o in hazards.iter().chain(others.get(t).into_iter().flatten()) {
            best = best.min(c.x.abs_diff(o.x) + c.y.abs_diff(o.y));
        }
    }
    best
}

/// Open map with one goal and every other free cell as a start.
pub fn open_map(width: usize, height: usize, goal: Cell) -> GridMap {
    let starts: Vec<Cell> = (0..height as i32)
        .flat_map(|y| (0..width as i32).map(move |x| Cell::new(x, y)))
        .filter(|&c| c != goal)
        .collect();
    GridMap::with_uniform_starts(width, height, &[], &[goal], &starts).unwrap()
}

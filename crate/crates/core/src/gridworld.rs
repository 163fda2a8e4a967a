//! The grid-world environment: map representation, permissible actions,
//! joint multi-agent transitions and the reward function used by the
//! reward-driven baselines.
//!
//! Coordinates: `x` is the column (growing rightward), `y` is the row
//! (growing downward). `Up` decrements `y`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, action: Action) -> Cell {
        let (dx, dy) = action.delta();
        Cell::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub fn manhattan(a: Cell, b: Cell) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    /// Fixed action order; also the tie-break order wherever one is needed.
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }

    /// The action that moves `from` onto the 4-neighbour (or same cell) `to`.
    pub fn between(from: Cell, to: Cell) -> Option<Action> {
        Action::ALL
            .into_iter()
            .find(|&a| from.offset(a) == to)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Stay => "stay",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown action {s:?}")))
    }
}

/// A subset of the five actions, stored as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }

    /// The `k`-th member in action order.
    pub fn nth(self, k: usize) -> Option<Action> {
        self.iter().nth(k)
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::default();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

/// An immutable grid map with obstacles, goals and a weighted start set.
#[derive(Clone, Debug)]
pub struct GridMap {
    width: usize,
    height: usize,
    obstacle: Vec<bool>,
    goal: Vec<bool>,
    goals: Vec<Cell>,
    starts: Vec<Cell>,
    start_weights: Vec<f64>,
    uniform_starts: bool,
    // Manhattan distance to the nearest obstacle or out-of-bounds cell.
    hazard: Vec<u32>,
}

impl PartialEq for GridMap {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.obstacle == other.obstacle
            && self.goal == other.goal
            && self.starts == other.starts
            && self.start_weights == other.start_weights
    }
}

impl GridMap {
    /// Builds a map whose start cells carry the given probabilities.
    pub fn new(
        width: usize,
        height: usize,
        obstacles: &[Cell],
        goals: &[Cell],
        starts: &[(Cell, f64)],
    ) -> Result<GridMap> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyMap);
        }
        if width > i32::MAX as usize || height > i32::MAX as usize {
            return Err(Error::config("map dimensions too large"));
        }
        let area = width * height;
        let in_bounds = |c: Cell| c.x >= 0 && c.y >= 0 && (c.x as usize) < width && (c.y as usize) < height;
        let idx = |c: Cell| c.y as usize * width + c.x as usize;

        let mut obstacle = vec![false; area];
        for &c in obstacles {
            if !in_bounds(c) {
                return Err(Error::OutOfBounds(c));
            }
            obstacle[idx(c)] = true;
        }
        let mut goal = vec![false; area];
        let mut goal_cells = Vec::with_capacity(goals.len());
        for &c in goals {
            if !in_bounds(c) {
                return Err(Error::OutOfBounds(c));
            }
            if obstacle[idx(c)] {
                return Err(Error::Overlap { cell: c, what: "goal" });
            }
            if !goal[idx(c)] {
                goal[idx(c)] = true;
                goal_cells.push(c);
            }
        }
        if goal_cells.is_empty() {
            return Err(Error::NoGoals);
        }
        if starts.is_empty() {
            return Err(Error::NoStarts);
        }
        let mut start_cells: Vec<Cell> = Vec::with_capacity(starts.len());
        let mut weights = Vec::with_capacity(starts.len());
        let mut seen = vec![false; area];
        for &(c, p) in starts {
            if !in_bounds(c) {
                return Err(Error::OutOfBounds(c));
            }
            if obstacle[idx(c)] {
                return Err(Error::Overlap { cell: c, what: "start" });
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::StartDistribution(p));
            }
            if seen[idx(c)] {
                return Err(Error::config(format!("start cell {c} listed twice")));
            }
            seen[idx(c)] = true;
            start_cells.push(c);
            weights.push(p);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::StartDistribution(total));
        }
        let uniform_starts = weights.windows(2).all(|w| w[0] == w[1]);

        let mut map = GridMap {
            width,
            height,
            obstacle,
            goal,
            goals: goal_cells,
            starts: start_cells,
            start_weights: weights,
            uniform_starts,
            hazard: Vec::new(),
        };
        let dist = map.goal_distances();
        if let Some(&c) = map.starts.iter().find(|&&c| dist[map.index(c)].is_none()) {
            return Err(Error::Disconnected(c));
        }
        map.hazard = map.hazard_field();
        Ok(map)
    }

    /// Builds a map with a uniform initial distribution over `starts`.
    pub fn with_uniform_starts(
        width: usize,
        height: usize,
        obstacles: &[Cell],
        goals: &[Cell],
        starts: &[Cell],
    ) -> Result<GridMap> {
        let p = 1.0 / starts.len().max(1) as f64;
        let weighted: Vec<(Cell, f64)> = starts.iter().map(|&c| (c, p)).collect();
        GridMap::new(width, height, obstacles, goals, &weighted)
    }

    /// Parses the character-grid format: `.` free, `#` obstacle, `S` start,
    /// `G` goal; lines starting with `;` are comments.
    pub fn parse(text: &str) -> Result<GridMap> {
        let mut rows: Vec<(usize, &str)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.starts_with(';') || line.trim().is_empty() {
                continue;
            }
            rows.push((n + 1, line));
        }
        let Some(&(_, first)) = rows.first() else {
            return Err(Error::EmptyMap);
        };
        let width = first.chars().count();
        let mut obstacles = Vec::new();
        let mut goals = Vec::new();
        let mut starts = Vec::new();
        for (y, &(line_no, line)) in rows.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(Error::NonRectangular {
                    line: line_no,
                    expected: width,
                    found,
                });
            }
            for (x, ch) in line.chars().enumerate() {
                let c = Cell::new(x as i32, y as i32);
                match ch {
                    '.' => {}
                    '#' => obstacles.push(c),
                    'S' => starts.push(c),
                    'G' => goals.push(c),
                    _ => {
                        return Err(Error::UnknownCharacter {
                            ch,
                            line: line_no,
                            column: x + 1,
                        })
                    }
                }
            }
        }
        if starts.is_empty() {
            return Err(Error::NoStarts);
        }
        if goals.is_empty() {
            return Err(Error::NoGoals);
        }
        GridMap::with_uniform_starts(width, rows.len(), &obstacles, &goals, &starts)
    }

    /// Serializes to the character-grid format (start weights are not kept).
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        let mut is_start = vec![false; self.area()];
        for &c in &self.starts {
            is_start[self.index(c)] = true;
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                out.push(if self.obstacle[i] {
                    '#'
                } else if self.goal[i] {
                    'G'
                } else if is_start[i] {
                    'S'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn goals(&self) -> &[Cell] {
        &self.goals
    }

    pub fn starts(&self) -> &[Cell] {
        &self.starts
    }

    pub fn start_weights(&self) -> &[f64] {
        &self.start_weights
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacle.iter().filter(|&&o| o).count()
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| self.obstacle[self.index(c)])
    }

    /// Every in-bounds cell in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x as i32, y as i32)))
    }

    /// Every in-bounds, non-obstacle cell in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| !self.obstacle[self.index(c)])
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major index of an in-bounds cell.
    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.y as usize * self.width + c.x as usize
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.obstacle[self.index(c)]
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.obstacle[self.index(c)]
    }

    pub fn is_goal(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.goal[self.index(c)]
    }

    /// E(s): `Stay` plus every move whose target is in-bounds and free.
    pub fn permissible_actions(&self, s: Cell) -> Result<ActionSet> {
        if !self.is_free(s) {
            return Err(Error::InvalidState(s));
        }
        Ok(self.permissible_unchecked(s))
    }

    #[inline]
    pub(crate) fn permissible_unchecked(&self, s: Cell) -> ActionSet {
        Action::ALL
            .into_iter()
            .filter(|&a| a == Action::Stay || self.is_free(s.offset(a)))
            .collect()
    }

    /// Shortest free-cell path length from every cell to the nearest goal.
    pub fn goal_distances(&self) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.area()];
        let mut queue = VecDeque::new();
        for &g in &self.goals {
            dist[self.index(g)] = Some(0);
            queue.push_back(g);
        }
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].unwrap_or(0);
            for a in [Action::Up, Action::Down, Action::Left, Action::Right] {
                let n = c.offset(a);
                if self.is_free(n) && dist[self.index(n)].is_none() {
                    dist[self.index(n)] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Manhattan distance from `c` to the nearest obstacle or to the ring of
    /// out-of-bounds cells surrounding the map.
    pub fn hazard_distance(&self, c: Cell) -> u32 {
        self.hazard[self.index(c)]
    }

    fn hazard_field(&self) -> Vec<u32> {
        let (w, h) = (self.width, self.height);
        let mut d: Vec<u32> = (0..w * h)
            .map(|i| {
                if self.obstacle[i] {
                    0
                } else {
                    let (x, y) = (i % w, i / w);
                    (x + 1).min(y + 1).min(w - x).min(h - y) as u32
                }
            })
            .collect();
        // Two-pass L1 distance transform.
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
}

impl FromStr for GridMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GridMap::parse(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardConfig {
    /// Per-step reward when the next cell is not a goal.
    pub delta1: f64,
    /// Reward for an impermissible action.
    pub delta2: f64,
    /// Reward for arriving at a goal.
    pub delta3: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            delta1: -1.0,
            delta2: -5.0,
            delta3: 100.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta2 < self.delta1 && self.delta1 < 0.0 && 0.0 < self.delta3;
        if ok && self.delta2.is_finite() && self.delta3.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "rewards must satisfy delta2 < delta1 < 0 < delta3, got {}, {}, {}",
                self.delta2, self.delta1, self.delta3
            )))
        }
    }

    /// Reward of one resolved transition ending in `next`. Agent-agent
    /// blocking earns the ordinary step penalty.
    pub fn reward(&self, map: &GridMap, next: Cell, blocked_by_map: bool) -> f64 {
        if map.is_goal(next) {
            self.delta3
        } else if blocked_by_map {
            self.delta2
        } else {
            self.delta1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldConfig {
    pub n_agents: usize,
    pub horizon: usize,
    /// Probability that a uniformly random permissible action replaces the
    /// chosen one.
    pub action_noise: f64,
}

impl WorldConfig {
    pub fn new(n_agents: usize, horizon: usize) -> Self {
        WorldConfig {
            n_agents,
            horizon,
            action_noise: 0.0,
        }
    }

    /// `4 * max(width, height)` steps.
    pub fn default_horizon(map: &GridMap) -> usize {
        4 * map.width().max(map.height())
    }

    pub fn validate(&self, map: &GridMap) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::config("n_agents must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.action_noise) {
            return Err(Error::config("action_noise must lie in [0, 1]"));
        }
        if self.n_agents > map.starts().len() {
            return Err(Error::Capacity {
                agents: self.n_agents,
                starts: map.starts().len(),
            });
        }
        Ok(())
    }
}

/// What happened to one agent during a joint step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct AgentStep {
    /// Action actually executed after noise, `None` for inactive agents.
    pub executed: Option<Action>,
    pub moved: bool,
    pub blocked_by_map: bool,
    pub blocked_by_agent: bool,
    pub reached_goal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_cells: Vec<Cell>,
    pub events: Vec<AgentStep>,
}

/// Positions of all agents plus an occupancy index over the map.
///
/// Conflicts are resolved agent by agent in ascending index order: a move
/// into a cell currently held (by an agent that already resolved this tick,
/// or one that has not moved yet) is blocked. Swaps therefore block both
/// agents.
#[derive(Clone, Debug)]
pub struct JointState {
    cells: Vec<Cell>,
    occupant: Vec<u32>,
}

impl JointState {
    pub fn new(map: &GridMap, cells: &[Cell]) -> Result<JointState> {
        let mut occupant = vec![0u32; map.area()];
        for (i, &c) in cells.iter().enumerate() {
            if !map.is_free(c) {
                return Err(Error::InvalidState(c));
            }
            let slot = &mut occupant[map.index(c)];
            if *slot != 0 {
                return Err(Error::InvalidJointState(c));
            }
            *slot = i as u32 + 1;
        }
        Ok(JointState {
            cells: cells.to_vec(),
            occupant,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Advances every agent by one tick. `actions[i] == None` keeps agent
    /// `i` in place without acting (it still occupies its cell).
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        map: &GridMap,
        actions: &[Option<Action>],
        action_noise: f64,
        rng: &mut R,
        events: &mut Vec<AgentStep>,
    ) {
        debug_assert_eq!(actions.len(), self.cells.len());
        events.clear();
        for (i, &chosen) in actions.iter().enumerate() {
            let here = self.cells[i];
            let mut ev = AgentStep::default();
            if let Some(mut a) = chosen {
                let allowed = map.permissible_unchecked(here);
                if action_noise > 0.0 && rng.gen::<f64>() < action_noise {
                    a = allowed
                        .nth(rng.gen_range(0..allowed.len()))
                        .unwrap_or(Action::Stay);
                }
                ev.executed = Some(a);
                if a != Action::Stay {
                    if !allowed.contains(a) {
                        ev.blocked_by_map = true;
                    } else {
                        let target = here.offset(a);
                        let ti = map.index(target);
                        if self.occupant[ti] != 0 {
                            ev.blocked_by_agent = true;
                        } else {
                            self.occupant[map.index(here)] = 0;
                            self.occupant[ti] = i as u32 + 1;
                            self.cells[i] = target;
                            ev.moved = true;
                        }
                    }
                }
            }
            ev.reached_goal = map.is_goal(self.cells[i]);
            events.push(ev);
        }
    }
}

/// One joint transition from `cells` under `actions`.
pub fn step<R: Rng + ?Sized>(
    map: &GridMap,
    cells: &[Cell],
    actions: &[Action],
    action_noise: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    if actions.len() != cells.len() {
        return Err(Error::config("one action per agent required"));
    }
    let mut joint = JointState::new(map, cells)?;
    let chosen: Vec<Option<Action>> = actions.iter().copied().map(Some).collect();
    let mut events = Vec::with_capacity(cells.len());
    joint.advance(map, &chosen, action_noise, rng, &mut events);
    Ok(StepOutcome {
        next_cells: joint.cells,
        events,
    })
}

/// Draws `n_agents` distinct start cells, weighted by the initial
/// distribution, without replacement.
pub fn sample_initial<R: Rng + ?Sized>(map: &GridMap, n_agents: usize, rng: &mut R) -> Result<Vec<Cell>> {
    let starts = map.starts();
    if n_agents > starts.len() {
        return Err(Error::Capacity {
            agents: n_agents,
            starts: starts.len(),
        });
    }
    if map.uniform_starts {
        return Ok(index::sample(rng, starts.len(), n_agents)
            .into_iter()
            .map(|i| starts[i])
            .collect());
    }
    let indices: Vec<usize> = (0..starts.len()).collect();
    let chosen = indices
        .choose_multiple_weighted(rng, n_agents, |&i| map.start_weights[i])
        .map_err(|e| Error::config(format!("start weights: {e}")))?;
    let picked: Vec<Cell> = chosen.map(|&i| starts[i]).collect();
    if picked.len() < n_agents {
        // Zero-weight starts are never drawn.
        return Err(Error::Capacity {
            agents: n_agents,
            starts: picked.len(),
        });
    }
    Ok(picked)
}

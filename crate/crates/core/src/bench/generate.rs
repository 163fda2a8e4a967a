//! Random instance generation.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gridworld::{Action, Cell, GridMap};
use crate::seed::{self, stream};

/// Attempts made before giving up on a parameter set.
pub const MAX_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSpec {
    pub width: usize,
    pub height: usize,
    pub density: f64,
    /// Start cell count; `None` uses every reachable free cell left over.
    pub n_starts: Option<usize>,
    /// Goal count; `None` uses `default_goal_count`.
    pub n_goals: Option<usize>,
    pub seed: u64,
}

impl MapSpec {
    pub fn square(side: usize, density: f64, seed: u64) -> MapSpec {
        MapSpec {
            width: side,
            height: side,
            density,
            n_starts: None,
            n_goals: None,
            seed,
        }
    }

    pub fn goal_count(&self) -> usize {
        self.n_goals
            .unwrap_or_else(|| default_goal_count(self.width, self.height))
    }

    pub fn generate(&self) -> Result<GridMap> {
        gen_map(
            self.width,
            self.height,
            self.density,
            self.n_starts,
            self.goal_count(),
            self.seed,
        )
    }
}

/// One goal per twenty cells of the longer side, at least one.
pub fn default_goal_count(width: usize, height: usize) -> usize {
    width.max(height).div_ceil(20).max(1)
}

/// Draws obstacles independently with probability `density`, then places
/// goals and starts on distinct free cells. Starts are drawn only from cells
/// that can reach a goal; an attempt is redrawn when too few exist.
pub fn gen_map(
    width: usize,
    height: usize,
    density: f64,
    n_starts: Option<usize>,
    n_goals: usize,
    seed: u64,
) -> Result<GridMap> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyMap);
    }
    if !(0.0..1.0).contains(&density) {
        return Err(Error::config("obstacle density must lie in [0, 1)"));
    }
    if n_goals == 0 {
        return Err(Error::NoGoals);
    }
    if n_starts == Some(0) {
        return Err(Error::NoStarts);
    }
    let area = width * height;
    let needed = n_goals + n_starts.unwrap_or(1);
    if needed > area {
        return Err(Error::Generation {
            attempts: 0,
            reason: format!("{needed} starts and goals do not fit in {area} cells"),
        });
    }
    let mut last_reason = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seed::rng_from(seed, &[stream::MAP, attempt as u64]);
        let obstacle: Vec<bool> = (0..area).map(|_| rng.gen::<f64>() < density).collect();
        let free: Vec<usize> = (0..area).filter(|&i| !obstacle[i]).collect();
        if free.len() < needed {
            last_reason = format!("only {} free cells for {needed} starts and goals", free.len());
            continue;
        }
        let mut goal_idx: Vec<usize> = index::sample(&mut rng, free.len(), n_goals)
            .into_iter()
            .map(|k| free[k])
            .collect();
        goal_idx.sort_unstable();
        let reach = reachable_from(width, height, &obstacle, &goal_idx);
        let candidates: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&i| reach[i] && goal_idx.binary_search(&i).is_err())
            .collect();
        let start_idx: Vec<usize> = match n_starts {
            None if !candidates.is_empty() => candidates,
            Some(k) if k <= candidates.len() => {
                let mut s: Vec<usize> = index::sample(&mut rng, candidates.len(), k)
                    .into_iter()
                    .map(|j| candidates[j])
                    .collect();
                s.sort_unstable();
                s
            }
            _ => {
                last_reason = format!("only {} free cells reach a goal", candidates.len());
                continue;
            }
        };
        let cell = |i: usize| Cell::new((i % width) as i32, (i / width) as i32);
        let obstacles: Vec<Cell> = (0..area).filter(|&i| obstacle[i]).map(cell).collect();
        let goals: Vec<Cell> = goal_idx.into_iter().map(cell).collect();
        let starts: Vec<Cell> = start_idx.into_iter().map(cell).collect();
        return GridMap::with_uniform_starts(width, height, &obstacles, &goals, &starts);
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn reachable_from(width: usize, height: usize, obstacle: &[bool], sources: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; obstacle.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in sources {
        seen[s] = true;
        queue.push_back(s);
    }
    while let Some(i) = queue.pop_front() {
        let c = Cell::new((i % width) as i32, (i / width) as i32);
        for a in Action::ALL {
            let n = c.offset(a);
            if n.x < 0 || n.y < 0 || n.x as usize >= width || n.y as usize >= height {
                continue;
            }
            let j = n.y as usize * width + n.x as usize;
            if !obstacle[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

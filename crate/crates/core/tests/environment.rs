mod common;

use proptest::prelude::*;
use rand::Rng;

use mapf_egt::bench::gen_map;
use mapf_egt::gridworld::{manhattan, step};
use mapf_egt::metrics::{min_obstacle_distance, rollout};
use mapf_egt::seed::rng_from;
use mapf_egt::{Action, Cell, GridMap, Policy, RewardConfig, WorldConfig};

use common::{brute_min_distance, resolve};

fn small_map(w: usize, h: usize, density: f64, seed: u64) -> Option<GridMap> {
    gen_map(w, h, density, None, 1, seed).ok()
}

fn action_of(i: u8) -> Action {
    Action::ALL[i as usize % Action::COUNT]
}

/// Every free map produced for the exhaustive check: sizes up to 4x4, a few
/// obstacle layouts each.
fn exhaustive_maps() -> Vec<GridMap> {
    let mut maps = Vec::new();
    for w in 1..=4 {
        for h in 1..=4 {
            if w * h < 3 {
                continue;
            }
            for seed in 0..4 {
                let density = if seed == 0 { 0.0 } else { 0.25 };
                if let Some(m) = small_map(w, h, density, seed) {
                    maps.push(m);
                }
            }
        }
    }
    maps
}

#[test]
fn step_matches_brute_force_resolver_exhaustively() {
    let mut checked = 0usize;
    let mut rng = rng_from(0, &[]);
    for map in exhaustive_maps() {
        let free: Vec<Cell> = map.free_cells().collect();
        for &a in &free {
            for &b in &free {
                if a == b {
                    continue;
                }
                for x in Action::ALL {
                    for y in Action::ALL {
                        let out = step(&map, &[a, b], &[x, y], 0.0, &mut rng).unwrap();
                        let expected = resolve(&map, &[a, b], &[x, y]);
                        assert_eq!(out.next_cells, expected, "{a} {b} {x:?} {y:?}\n{}", map.to_text());
                        assert!(out.next_cells.iter().all(|&c| map.is_free(c)));
                        assert_ne!(out.next_cells[0], out.next_cells[1]);
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 10_000, "{checked}");
}

#[test]
fn uniform_walk_two_by_two_matches_chain_enumeration() {
    let map = GridMap::with_uniform_starts(2, 2, &[], &[Cell::new(1, 0)], &[Cell::new(0, 0)]).unwrap();
    let horizon = 3;

    // Enumerate all 5^3 action sequences; the walk stops once on the goal.
    let mut exact = 0.0f64;
    for code in 0..125usize {
        let mut c = Cell::new(0, 0);
        let mut k = code;
        for _ in 0..horizon {
            if map.is_goal(c) {
                break;
            }
            c = resolve(&map, &[c], &[Action::ALL[k % 5]])[0];
            k /= 5;
        }
        if map.is_goal(c) {
            exact += 1.0 / 125.0;
        }
    }
    assert!((exact - 51.0 / 125.0).abs() < 1e-12);

    let world = WorldConfig::new(1, horizon);
    let policy = Policy::uniform(&map);
    let n = 20_000;
    let hits = (0..n)
        .filter(|&k| {
            let mut rng = rng_from(11, &[k]);
            rollout(&map, &world, &RewardConfig::default(), &policy, &mut rng).unwrap().trajectories[0].reached_goal
        })
        .count();
    let p = hits as f64 / n as f64;
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((p - exact).abs() <= 4.0 * se, "{p} vs {exact}");
}

#[test]
fn corner_and_centre_distances() {
    let map = GridMap::with_uniform_starts(5, 5, &[], &[Cell::new(4, 4)], &[Cell::new(2, 2)]).unwrap();
    let still = mapf_egt::egt::Trajectory {
        steps: vec![(Cell::new(2, 2), Action::Stay); 4],
        final_cell: Cell::new(2, 2),
        reached_goal: false,
    };
    assert_eq!(min_obstacle_distance(&still, &map, &[]), 3);
    assert_eq!(brute_min_distance(&map, &[Cell::new(2, 2)], &[]), 3);
    assert_eq!(brute_min_distance(&map, &[Cell::new(0, 0)], &[]), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn permissible_actions_match_target_cells(w in 1usize..8, h in 1usize..8, seed in any::<u64>()) {
        let map = small_map(w, h, 0.3, seed);
        prop_assume!(map.is_some());
        let map = map.unwrap();
        for c in map.free_cells() {
            let set = map.permissible_actions(c).unwrap();
            prop_assert!(set.contains(Action::Stay));
            for a in [Action::Up, Action::Down, Action::Left, Action::Right] {
                let t = c.offset(a);
                let ok = t.x >= 0 && t.y >= 0 && (t.x as usize) < w && (t.y as usize) < h && !map.is_obstacle(t);
                prop_assert_eq!(set.contains(a), ok);
            }
        }
    }

    #[test]
    fn reward_positive_exactly_at_goals(
        seed in any::<u64>(),
        d1 in -50.0f64..-0.01,
        gap in 0.01f64..50.0,
        d3 in 0.01f64..500.0,
        blocked in any::<bool>(),
    ) {
        let map = small_map(6, 6, 0.2, seed);
        prop_assume!(map.is_some());
        let map = map.unwrap();
        let rewards = RewardConfig { delta1: d1, delta2: d1 - gap, delta3: d3 };
        prop_assert!(rewards.validate().is_ok());
        for c in map.free_cells() {
            let r = rewards.reward(&map, c, blocked && !map.is_goal(c));
            prop_assert_eq!(r > 0.0, map.is_goal(c));
        }
    }

    #[test]
    fn manhattan_symmetric(ax in -50i32..50, ay in -50i32..50, bx in -50i32..50, by in -50i32..50) {
        let (a, b) = (Cell::new(ax, ay), Cell::new(bx, by));
        prop_assert_eq!(manhattan(a, b), manhattan(b, a));
        prop_assert_eq!(manhattan(a, a), 0);
    }

    #[test]
    fn joint_step_invariants(
        w in 2usize..9,
        h in 2usize..9,
        seed in any::<u64>(),
        n in 1usize..6,
        codes in prop::collection::vec(any::<u8>(), 6),
    ) {
        let map = small_map(w, h, 0.2, seed);
        prop_assume!(map.is_some());
        let map = map.unwrap();
        let free: Vec<Cell> = map.free_cells().collect();
        prop_assume!(free.len() >= n);
        let mut rng = rng_from(seed, &[1]);
        let cells: Vec<Cell> = rand::seq::index::sample(&mut rng, free.len(), n).into_iter().map(|i| free[i]).collect();
        let actions: Vec<Action> = codes[..n].iter().map(|&c| action_of(c)).collect();

        let a = step(&map, &cells, &actions, 0.0, &mut rng_from(1, &[])).unwrap();
        let b = step(&map, &cells, &actions, 0.0, &mut rng_from(2, &[])).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.next_cells, &resolve(&map, &cells, &actions));
        let mut seen = std::collections::HashSet::new();
        let probe = Cell::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
        for (i, &c) in a.next_cells.iter().enumerate() {
            prop_assert!(map.is_free(c));
            prop_assert!(seen.insert(c));
            prop_assert!(manhattan(c, probe).abs_diff(manhattan(cells[i], probe)) <= 1);
        }

        let noisy = step(&map, &cells, &actions, 0.5, &mut rng).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &c in &noisy.next_cells {
            prop_assert!(map.is_free(c));
            prop_assert!(seen.insert(c));
        }
    }

    #[test]
    fn episode_records_are_consistent(
        size in 3usize..10,
        seed in any::<u64>(),
        n in 1usize..5,
    ) {
        let map = small_map(size, size, 0.2, seed);
        prop_assume!(map.is_some());
        let map = map.unwrap();
        prop_assume!(map.starts().len() >= n);
        let rewards = RewardConfig::default();
        let world = WorldConfig::new(n, 3 * size);
        let record = rollout(&map, &world, &rewards, &Policy::uniform(&map), &mut rng_from(seed, &[9])).unwrap();

        let total: f64 = record.returns.iter().sum();
        prop_assert_eq!(record.cumulative_return, total);
        for (tau, &c) in record.trajectories.iter().zip(&record.returns) {
            let steps = tau.steps.len() as f64;
            if tau.reached_goal && !tau.steps.is_empty() {
                prop_assert!(c >= rewards.delta3 + (steps - 1.0) * rewards.delta2 - 1e-9);
                prop_assert!(c <= rewards.delta3 + (steps - 1.0) * rewards.delta1 + 1e-9);
            }
            if c > 0.0 {
                prop_assert!(tau.reached_goal);
            }
        }

        // Per-agent minima against the brute-force double loop.
        let positions: Vec<Vec<Cell>> = record.trajectories.iter().map(|t| t.cells().collect()).collect();
        let at = |j: usize, t: usize| positions[j][t.min(positions[j].len() - 1)];
        for (i, tau) in record.trajectories.iter().enumerate() {
            let others: Vec<Vec<Cell>> = (0..positions[i].len())
                .map(|t| (0..n).filter(|&j| j != i).map(|j| at(j, t)).collect())
                .collect();
            let brute = brute_min_distance(&map, &positions[i], &others);
            prop_assert_eq!(record.min_obstacle_distance[i], brute);
            prop_assert_eq!(min_obstacle_distance(tau, &map, &others), brute);
        }
    }
}

mod common;

use proptest::prelude::*;
use rand::Rng;

use mapf_egt::baselines::{mc_train, q_train, LearnParams, QTable, ReturnsAccumulator};
use mapf_egt::egt::{
    self, apply_update, construct_policy, fitness, update_decision, update_probability, CounterTable, EgtParams,
    Trajectory, TrainingStats,
};
use mapf_egt::gridworld::step;
use mapf_egt::metrics::rollout;
use mapf_egt::seed::rng_from;
use mapf_egt::{Action, Cell, GridMap, Policy, RewardConfig, WorldConfig};

use common::{bfs_to_goal, follow, open_map, ValueIteration};

fn same_stats(a: &TrainingStats, b: &TrainingStats) -> bool {
    a.episodes_run == b.episodes_run && a.policy_updates == b.policy_updates && a.goal_reach_count == b.goal_reach_count
}

fn straight(from: Cell, moves: &[Action]) -> (Vec<(Cell, Action)>, Cell) {
    let mut c = from;
    let mut steps = Vec::new();
    for &a in moves {
        steps.push((c, a));
        c = c.offset(a);
    }
    (steps, c)
}

fn random_table(map: &GridMap, seed: u64, density: f64) -> CounterTable {
    let mut rng = rng_from(seed, &[]);
    let mut text = String::new();
    for c in map.free_cells() {
        for a in Action::ALL {
            if rng.gen::<f64>() < density {
                text.push_str(&format!("{} {} {} {}\n", c.x, c.y, a, rng.gen_range(-20i64..20)));
            }
        }
    }
    CounterTable::parse_snapshot(&text, map).unwrap()
}

#[test]
fn egt_learns_short_paths_on_open_grid() {
    let goal = Cell::new(4, 4);
    let map = open_map(5, 5, goal);
    let params = EgtParams {
        episodes: 2000,
        reconstruct_interval: 250,
        ..EgtParams::default()
    };
    let run = egt::train(&map, WorldConfig::new(1, 50), params, 7, 1).unwrap();
    for c in map.free_cells().filter(|&c| c != goal) {
        let optimal = bfs_to_goal(&map, c).unwrap();
        let taken = follow(&map, c, 4 * optimal, |cell| run.policy.greedy(cell));
        assert!(taken.is_some_and(|t| t <= 2 * optimal), "{c}: {taken:?} vs {optimal}");
    }
}

#[test]
fn egt_training_is_deterministic_and_thread_independent() {
    let map = open_map(6, 6, Cell::new(5, 5));
    let params = EgtParams {
        episodes: 600,
        reconstruct_interval: 100,
        ..EgtParams::default()
    };
    let world = WorldConfig::new(3, 24);
    let a = egt::train(&map, world, params, 3, 1).unwrap();
    let b = egt::train(&map, world, params, 3, 1).unwrap();
    let c = egt::train(&map, world, params, 3, 4).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.table, b.table);
    assert!(same_stats(&a.stats, &b.stats));
    assert_eq!(a.table, c.table);
    assert!(same_stats(&a.stats, &c.stats));
}

#[test]
fn expected_increment_is_update_probability_times_nu() {
    let params = EgtParams::default();
    let start = Cell::new(0, 0);
    let cases: [&[Action]; 3] = [
        &[Action::Right, Action::Right, Action::Down, Action::Down, Action::Down],
        &[Action::Right, Action::Down, Action::Left, Action::Right, Action::Right, Action::Down],
        &[Action::Right, Action::Right, Action::Down, Action::Down],
    ];
    for (k, moves) in cases.iter().enumerate() {
        let (steps, end) = straight(start, moves);
        let tau = Trajectory {
            steps,
            final_cell: end,
            reached_goal: true,
        };
        let u = fitness(&tau);
        let p = update_probability(u, params.eta, params.alpha);
        let nu = f64::from(params.nu);
        let n = 20_000;
        let mut rng = rng_from(k as u64, &[]);
        let total: i64 = (0..n).map(|_| update_decision(&tau, &params, &mut rng).unwrap_or(0)).sum();
        let mean = total as f64 / n as f64;
        let se = nu * (p * (1.0 - p) / n as f64).sqrt();
        assert!((mean - p * nu).abs() <= 3.0 * se.max(1e-12), "u={u} mean={mean} expected={}", p * nu);
    }
}

#[test]
fn positive_then_negative_update_cancels() {
    let map = open_map(5, 5, Cell::new(4, 4));
    let params = EgtParams {
        nu: 3,
        mu: 3,
        ..EgtParams::default()
    };
    let (steps, end) = straight(
        Cell::new(0, 0),
        &[Action::Right, Action::Right, Action::Down, Action::Right, Action::Down],
    );
    let good = Trajectory {
        steps: steps.clone(),
        final_cell: end,
        reached_goal: true,
    };
    let bad = Trajectory {
        steps,
        final_cell: Cell::new(0, 0),
        reached_goal: false,
    };
    assert_eq!(fitness(&good), 1.0);
    for seed in 0..20 {
        let before = random_table(&map, seed, 0.6);
        let mut table = before.clone();
        let mut rng = rng_from(seed, &[1]);
        assert!(apply_update(&mut table, &good, &params, &mut rng).0);
        assert!(apply_update(&mut table, &bad, &params, &mut rng).0);
        for (c, a) in good.steps.iter().copied() {
            assert_eq!(table.get(c, a), Some(before.get(c, a).unwrap_or(0)));
        }
        for c in map.free_cells() {
            for a in Action::ALL {
                if !good.steps.contains(&(c, a)) {
                    assert_eq!(table.get(c, a), before.get(c, a));
                }
            }
        }
    }
}

#[test]
fn q_values_at_the_fixed_point_do_not_move() {
    let map = open_map(3, 3, Cell::new(2, 2));
    let rewards = RewardConfig::default();
    let gamma = 0.9;
    let vi = ValueIteration::solve(&map, &rewards, gamma, 1e-12);
    let mut q = QTable::new(&map);
    for c in map.free_cells() {
        for a in Action::ALL {
            q.set(c, a, vi.q[&(c, a)]);
        }
    }
    let behaviour = q.epsilon_greedy(&map, 0.3);
    let mut rng = rng_from(5, &[]);
    let mut drift = 0.0;
    let mut n = 0;
    for _ in 0..2000 {
        let mut c = map.starts()[rng.gen_range(0..map.starts().len())];
        for _ in 0..12 {
            if map.is_goal(c) {
                break;
            }
            let a = behaviour.sample(c, &mut rng);
            let out = step(&map, &[c], &[a], 0.0, &mut rng).unwrap();
            let next = out.next_cells[0];
            let r = rewards.reward(&map, next, out.events[0].blocked_by_map);
            let old = q.get(c, a);
            let new = q.backup(c, a, r, next, map.is_goal(next), 0.01, gamma);
            drift += (new - old).abs();
            n += 1;
            c = next;
        }
    }
    assert!(drift / (n as f64) < 1e-9, "{}", drift / n as f64);
}

#[test]
fn tabular_learners_are_seed_deterministic() {
    let map = open_map(4, 4, Cell::new(3, 3));
    let world = WorldConfig::new(2, 16);
    let params = LearnParams {
        episodes: 300,
        ..LearnParams::default()
    };
    let rewards = RewardConfig::default();
    for learner in [q_train, mc_train] {
        let a = learner(&map, &world, &rewards, &params, 9).unwrap();
        let b = learner(&map, &world, &rewards, &params, 9).unwrap();
        assert_eq!(a.q.to_snapshot(&map), b.q.to_snapshot(&map));
        assert_eq!(a.policy, b.policy);
        assert!(same_stats(&a.stats, &b.stats));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn update_probability_is_a_probability(u in 1.0f64..1e6, eta in 1.0f64..=2.0, alpha in 1.0001f64..=8.0) {
        let p = update_probability(u, eta, alpha);
        prop_assert!((0.0..=1.0).contains(&p), "{}", p);
    }

    #[test]
    fn constructed_policies_are_distributions(seed in any::<u64>(), density in 0.0f64..1.0, eps in 0.0f64..=1.0) {
        let map = open_map(5, 4, Cell::new(4, 3));
        let table = random_table(&map, seed, density);
        let policy = construct_policy(&table, eps, &map);
        for c in map.free_cells() {
            let p = policy.probs(c);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for &v in p {
                prop_assert!(v >= eps / 5.0 - 1e-12);
            }
        }
    }

    #[test]
    fn successful_rollouts_have_stretch_at_least_one(size in 3usize..9, seed in any::<u64>(), n in 1usize..4) {
        let map = mapf_egt::bench::gen_map(size, size, 0.15, None, 2, seed);
        prop_assume!(map.is_ok());
        let map = map.unwrap();
        prop_assume!(map.starts().len() >= n);
        let world = WorldConfig::new(n, 6 * size);
        let record = rollout(&map, &world, &RewardConfig::default(), &Policy::uniform(&map), &mut rng_from(seed, &[])).unwrap();
        for tau in record.trajectories.iter().filter(|t| t.reached_goal) {
            prop_assert!(fitness(tau) >= 1.0);
        }
    }

    #[test]
    fn returns_average_is_exact_mean(returns in prop::collection::vec(-500.0f64..500.0, 1..200)) {
        let map = open_map(2, 2, Cell::new(1, 1));
        let mut acc = ReturnsAccumulator::new(&map);
        let c = Cell::new(0, 0);
        for &g in &returns {
            acc.add(c, Action::Down, g);
        }
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let got = acc.average(c, Action::Down).unwrap();
        prop_assert!((got - mean).abs() <= 1e-9 * (1.0 + mean.abs()), "{} vs {}", got, mean);
        prop_assert_eq!(acc.count(c, Action::Down), returns.len() as u64);
    }
}

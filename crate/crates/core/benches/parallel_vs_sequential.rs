use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mapf_egt::bench::{evaluate, gen_map, train_model, Algorithm, ExperimentConfig, RawConfig};
use mapf_egt::egt::{self, EgtParams};
use mapf_egt::parallel::with_threads;
use mapf_egt::WorldConfig;

fn thread_counts() -> Vec<usize> {
    let cores = std::thread::available_parallelism().map_or(2, |n| n.get()).max(2);
    vec![1, cores]
}

fn egt_training(c: &mut Criterion) {
    let map = gen_map(30, 30, 0.2, None, 2, 1).unwrap();
    let world = WorldConfig::new(4, WorldConfig::default_horizon(&map));
    let params = EgtParams {
        episodes: 4000,
        ..EgtParams::default()
    };
    let mut group = c.benchmark_group("egt_train_30x30");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || egt::train(&map, world, params, black_box(7), t).unwrap()))
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let raw = RawConfig::parse("map.size = 40\nworld.agents = 8\nbudget.episodes_per_cell = 5\neval.episodes = 100\n")
        .unwrap();
    let mut group = c.benchmark_group("evaluate_40x40");
    group.sample_size(10);
    for algorithm in [Algorithm::Egt, Algorithm::Astar] {
        let base = ExperimentConfig {
            algorithm,
            ..ExperimentConfig::from_raw(&raw).unwrap()
        };
        let map = base.load_map().unwrap();
        let trained = train_model(&base, &map).unwrap();
        for threads in thread_counts() {
            let cfg = ExperimentConfig { threads, ..base.clone() };
            group.bench_with_input(BenchmarkId::new(algorithm.name(), threads), &cfg, |b, cfg| {
                b.iter(|| {
                    with_threads(cfg.threads, || evaluate(cfg, &map, &trained.model, &trained.stats, 0.0).unwrap())
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, egt_training, evaluation);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fedbandit::agents::{Schedule, ScheduleOptions};
use fedbandit::env::{make_activated_bernoulli, ActivatedBernoulliSpec, LossTensor};
use fedbandit::gossip::GossipMatrix;
use fedbandit::graph::make_grid;
use fedbandit::par::Execution;
use fedbandit::sim::{aggregate, Algorithm, EnvSeed, EnvironmentSpec, Exp3Network, SimConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("aggregate_runs");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = SimConfig::new(
            make_grid(6).unwrap(),
            EnvironmentSpec::ActivatedBernoulli {
                seed: EnvSeed::PerRun,
            },
            Algorithm::FedExp3,
            20,
            500,
        )
        .unwrap();
        cfg.runs = 8;
        cfg.execution = exec;
        group.bench_function(BenchmarkId::new(name, "grid6_k20_t500_x8"), |b| {
            b.iter(|| black_box(aggregate(&cfg).unwrap().final_mean()))
        });
    }
    group.finish();
}

fn rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("network_round");
    group.sample_size(20);
    for side in [16, 32] {
        let n = side * side;
        let k = 20;
        let graph = make_grid(side).unwrap();
        let gossip = GossipMatrix::max_degree(&graph).unwrap();
        let schedule = Schedule::tuned(
            k,
            1000,
            gossip.second_singular_value(),
            n,
            ScheduleOptions::default(),
        )
        .unwrap();
        let env = make_activated_bernoulli(ActivatedBernoulliSpec {
            horizon: 1000,
            agent_count: n,
            arm_count: k,
            seed: 1,
        })
        .unwrap();
        let mut losses = vec![0.0; n * k];
        env.fill_round(0, &mut losses);
        for (name, exec) in MODES {
            let net = Exp3Network::new(gossip.clone(), schedule.clone(), 7, exec);
            group.bench_function(BenchmarkId::new(name, format!("grid{side}_k{k}")), |b| {
                b.iter_batched_ref(
                    || net.clone(),
                    |net| {
                        for _ in 0..10 {
                            net.step(&losses).unwrap();
                        }
                    },
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

criterion_group!(benches, runs, rounds);
criterion_main!(benches);

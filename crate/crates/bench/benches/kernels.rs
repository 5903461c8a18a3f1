use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;

use poropinn::harness::{build_problem, oracle_table, Oracle, RunConfig};
use poropinn::nn::{Network, NetworkConfig};
use poropinn::oracle::{sample_sensors, thm_forward_fd, StratumFd, TerzaghiSeries};
use poropinn::physics::presets::{Benchmark, Stratum, Terzaghi};
use poropinn::train::{fit_network, function_comps, network_comps, FitSchedule, Model, Need, Trainer};

fn points(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((2, n), |(r, k)| {
        let s = (k as f64 + 0.5) / n as f64;
        if r == 0 {
            s
        } else {
            (7.0 * s).fract()
        }
    })
}

fn network(c: &mut Criterion) {
    let net = Network::new(NetworkConfig::new(2, 50, 4, 0)).unwrap();
    let w = net.init().values;
    let x = points(500);
    for (name, need) in [("value", Need::Value), ("hess", Need::Hess), ("full", Need::Full)] {
        c.bench_function(&format!("network 50x4, 500 points, {name}"), |b| {
            b.iter(|| network_comps(&net, black_box(&w), x.view(), need, 1.0, 0.0))
        });
    }
    // one Adam step of a regression onto a smooth field: forward and backward
    let target = function_comps(
        &|p: &[f64]| poropinn::physics::FieldDerivs::line(p[0].sin() * p[1], p[0].sin(), p[0].cos() * p[1], -p[0].sin() * p[1], p[0].cos()),
        x.view(),
    );
    let sched = FitSchedule {
        epochs: 1,
        batch: 500,
        ..Default::default()
    };
    c.bench_function("network 50x4, one training step on 500 points, hess", |b| {
        b.iter_batched(
            || w.clone(),
            |mut p| fit_network(&net, &mut p, 1.0, 0.0, x.view(), target.view(), Need::Hess, &sched).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn oracles(c: &mut Criterion) {
    let pre = Terzaghi::default();
    c.bench_function("terzaghi series, 200 terms, 41x101 grid", |b| {
        b.iter(|| {
            let s = TerzaghiSeries::new(&pre, 200).unwrap();
            let mut acc = 0.0;
            for i in 0..41 {
                for j in 0..101 {
                    acc += s.eval(i as f64 / 40.0, j as f64 / 100.0).0;
                }
            }
            acc
        })
    });
    let st = Stratum::default();
    let fd = StratumFd {
        nodes: 51,
        steps: 400,
        ..Default::default()
    };
    let mut g = c.benchmark_group("stratum");
    g.sample_size(10);
    g.bench_function("finite differences, 51 nodes, 400 steps", |b| b.iter(|| thm_forward_fd(&st, &fd).unwrap()));
    g.finish();
}

fn training(c: &mut Criterion) {
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    for bench in Benchmark::ALL {
        let mut cfg = RunConfig::preset(bench);
        cfg.schedule.epochs = 10;
        cfg.schedule.iterations = 1;
        let oracle = Oracle::solve(&cfg).unwrap();
        let table = oracle_table(&cfg, &oracle).unwrap();
        let sensors = sample_sensors(&table, 0.0, 0).unwrap();
        let model = Model::new(build_problem(&cfg, &sensors).unwrap(), 2.0).unwrap();
        g.bench_function(format!("{bench} first stage, 10 epochs"), |b| {
            b.iter_batched(
                || Trainer::new(model.clone(), cfg.schedule.clone(), 0).unwrap(),
                |mut t| t.run_stage(0, 0).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, network, oracles, training);
criterion_main!(benches);

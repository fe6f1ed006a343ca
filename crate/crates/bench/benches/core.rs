use std::hint::black_box;

use cagetool::cmaes::Benchmark;
use cagetool::dataset::{generate, LabelParams};
use cagetool::escape::{estimate_mee, oracle_mee, EscapeQuery, PlannerParams};
use cagetool::fixtures;
use cagetool::sim::{rollout, settle};
use cagetool::surrogate::{train, MetricKind, TrainParams};
use cagetool::trajopt::ViaTrajectory;
use cagetool::{ObjectConfig, Pose2};
use criterion::{criterion_group, criterion_main, Criterion};

fn geometry(c: &mut Criterion) {
    let s = fixtures::u_cup();
    let tool = s.place_tool(0, &fixtures::u_cup_tool_pose());
    let inside = s.place_object(&s.start);
    let touching = s.place_object(&ObjectConfig::new(0.0, 0.005, 0.3));
    c.bench_function("collide/disk_in_cup", |b| b.iter(|| black_box(&inside).collides(black_box(&tool))));
    c.bench_function("collide/disk_on_floor", |b| {
        b.iter(|| black_box(&touching).collides(black_box(s.statics_body())))
    });
}

fn escape(c: &mut Criterion) {
    let s = fixtures::u_cup();
    let q = EscapeQuery::new(&s, 0, fixtures::u_cup_tool_pose(), s.start);
    let mut g = c.benchmark_group("escape");
    g.sample_size(10);
    g.bench_function("oracle_u_cup", |b| b.iter(|| oracle_mee(&q, &[0.01, 0.01, 0.05]).unwrap()));
    let p = PlannerParams { max_batches: 2, ..Default::default() };
    g.bench_function("sampler_u_cup_2_batches", |b| b.iter(|| estimate_mee(&q, &p).unwrap()));
    g.finish();
}

fn sim(c: &mut Criterion) {
    let s = fixtures::u_cup();
    let t = fixtures::u_cup_tool_pose();
    let dropped = ObjectConfig::new(0.3, 0.4, 0.2);
    c.bench_function("sim/settle_drop", |b| b.iter(|| settle(&s, black_box(&dropped), &t, 0, 500).unwrap()));
    let traj = ViaTrajectory::straight(t, Pose2::new(0.25, 0.2, 0.0), 5, s.task.duration).unwrap();
    let mut g = c.benchmark_group("sim");
    g.sample_size(20);
    g.bench_function("rollout_cup_carry_50", |b| b.iter(|| rollout(&s, &traj, 0, 50).unwrap()));
    g.finish();
}

fn surrogate(c: &mut Criterion) {
    let s = fixtures::u_cup();
    let data = generate(&s, 0, 200, &LabelParams::oracle(&s), 1).unwrap();
    let (model, _) = train(&data, MetricKind::Mee, &TrainParams { epochs: 5, ..Default::default() }).unwrap();
    let o = ObjectConfig::new(0.05, 0.12, 0.3);
    let t = Pose2::new(0.0, 0.02, 0.1);
    c.bench_function("surrogate/forward", |b| b.iter(|| model.forward(black_box(&o), black_box(&t)).unwrap()));
    let mut g = c.benchmark_group("surrogate");
    g.sample_size(10);
    g.bench_function("train_200x5", |b| {
        b.iter(|| train(&data, MetricKind::Mee, &TrainParams { epochs: 5, ..Default::default() }).unwrap())
    });
    g.finish();
}

fn cmaes(c: &mut Criterion) {
    let mut g = c.benchmark_group("cmaes");
    g.sample_size(10);
    for b in Benchmark::ALL {
        g.bench_function(format!("{b:?}"), |bench| bench.iter(|| b.run(0).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, geometry, escape, sim, surrogate, cmaes);
criterion_main!(benches);

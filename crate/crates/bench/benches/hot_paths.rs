use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use offroad_core::learner::{featurize, PolicyParams, FEATURE_LEN};
use offroad_core::metrics::{ate, gt};
use offroad_core::render::{render, RandomizationConfig};
use offroad_core::vehicle::{get_traj, TrajPoint};
use offroad_core::world::generate_world;
use offroad_core::{
    ActionSequence, ActionTuple, CameraModel, EnvConfig, EnvTemplate, Pose2, Preset, RolloutConfig, Trajectory,
    WorldSpec,
};

fn past() -> Trajectory {
    Trajectory::ego((0..10).map(|i| TrajPoint::new(0.4 * (i as f64 - 9.0), 0.0, 0.0)).collect())
}

fn rollout(c: &mut Criterion) {
    let p = past();
    let acts = vec![ActionTuple::new(0.3, 0.1); 10];
    let cfg = RolloutConfig::default();
    c.bench_function("get_traj l=11", |b| b.iter(|| get_traj(11, black_box(&p), black_box(&acts), &cfg).unwrap()));
}

fn rendering(c: &mut Criterion) {
    let world = generate_world(&WorldSpec::new(Preset::Landscape, 3)).unwrap();
    let s = world.start_position();
    let pose = Pose2::new(s[0], s[1], 0.4);
    let rand = RandomizationConfig::default();
    for n in [32, 64] {
        let cam = CameraModel::with_resolution(n);
        c.bench_function(&format!("render {n}x{n}"), |b| b.iter(|| render(&world, black_box(&pose), &cam, &rand, 7)));
    }
    c.bench_function("generate landscape world", |b| b.iter(|| generate_world(black_box(&WorldSpec::new(Preset::Landscape, 3)))));
}

fn env_and_policy(c: &mut Criterion) {
    let t = EnvTemplate::new(EnvConfig::default(), &[WorldSpec::new(Preset::Meadow, 1)]).unwrap();
    let mut env = t.instance();
    env.reset(3).unwrap();
    let acts = ActionSequence::repeat(ActionTuple::new(0.1, 0.2), 5);
    c.bench_function("env step (A=5)", |b| {
        b.iter(|| {
            if env.is_done() {
                env.reset(3).unwrap();
            }
            env.step(black_box(&acts)).unwrap()
        })
    });
    env.reset(3).unwrap();
    let obs = env.observe().unwrap();
    c.bench_function("featurize", |b| b.iter(|| featurize(black_box(&obs))));
    let params = PolicyParams::zeros(5, FEATURE_LEN, 8);
    let f = featurize(&obs);
    c.bench_function("policy forward", |b| b.iter(|| params.act_features(black_box(&f)).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let a = Trajectory::ego((0..6).map(|i| TrajPoint::new(i as f64, 0.1 * (i * i) as f64, 0.0)).collect());
    let b2 = Trajectory::ego((0..11).map(|i| TrajPoint::new(0.6 * i as f64, 0.0, 0.0)).collect());
    c.bench_function("gt + ate", |b| b.iter(|| (gt(black_box(&a), &b2).unwrap(), ate(black_box(&a), &b2).unwrap())));
}

criterion_group!(benches, rollout, rendering, env_and_policy, metrics);
criterion_main!(benches);

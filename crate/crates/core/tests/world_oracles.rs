use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use offroad_core::dataset::{read_offline_dataset, write_offline_dataset};
use offroad_core::metrics::{build_offline_dataset, evaluate_offline, OfflineConfig, ReplayOracle};
use offroad_core::world::generate_world;
use offroad_core::{scenes, ClassId, Preset, WorldSpec};

// Rock placement redone from scratch: Poisson count with mean density * area / 100, then up to
// 20 uniform draws per rock, rejecting any that would touch the cleared disc around the start.
fn oracle_rocks(seed: u64, extent: f64, density: f64) -> (usize, Vec<[f64; 3]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(103);
    let count = Poisson::new(density * extent * extent / 100.0).unwrap().sample(&mut rng) as usize;
    let start = [extent / 2.0, extent / 2.0];
    let mut out = Vec::new();
    for _ in 0..count {
        for _ in 0..20 {
            let c = [rng.random::<f64>() * extent, rng.random::<f64>() * extent];
            let r = rng.random_range(0.4..1.2);
            let _h: f64 = rng.random_range(0.4..1.5);
            let d = ((c[0] - start[0]).powi(2) + (c[1] - start[1]).powi(2)).sqrt();
            if d >= r + 3.0 + 1.5 {
                out.push([c[0], c[1], r]);
                break;
            }
        }
    }
    (count, out)
}

#[test]
fn rock_placement_matches_oracle() {
    let mut spec = WorldSpec::new(Preset::Canyon, 3);
    spec.road = None;
    spec.densities.rocks = 2.0;
    let world = generate_world(&spec).unwrap();
    let rocks: Vec<[f64; 3]> = world
        .obstacles()
        .iter()
        .filter(|o| o.class == ClassId::Rocks)
        .map(|o| [o.center[0], o.center[1], o.radius])
        .collect();
    let (drawn, want) = oracle_rocks(3, 100.0, 2.0);
    assert_eq!(rocks, want);
    // Poisson(200): 4 sigma is about 57.
    assert!((143..=257).contains(&drawn), "{drawn}");
    assert!(rocks.len() <= drawn && rocks.len() + 5 >= drawn);
}

#[test]
fn rock_count_scales_with_density() {
    let count = |d: f64, seed: u64| {
        let mut spec = WorldSpec::new(Preset::Meadow, seed);
        spec.road = None;
        spec.densities.rocks = d;
        generate_world(&spec).unwrap().obstacles().iter().filter(|o| o.class == ClassId::Rocks).count()
    };
    let low: usize = (0..5).map(|s| count(0.5, s)).sum();
    let high: usize = (0..5).map(|s| count(2.0, s)).sum();
    // Means 250 and 1000 over five worlds.
    assert!((180..=320).contains(&low), "{low}");
    assert!((880..=1120).contains(&high), "{high}");
}

#[test]
fn offline_pipeline_round_trip_scores_zero_for_the_driven_path() {
    let logs = scenes::scripted_drive_logs(scenes::goal_reaching_config(5), 6, 42).unwrap();
    let built =
        build_offline_dataset(&logs, &OfflineConfig { horizon_s: 2.0, anchor_stride: 4, ..Default::default() })
            .unwrap();
    assert!(built.records.len() >= 5);
    let dir = tempfile::tempdir().unwrap();
    write_offline_dataset(dir.path(), &built.records).unwrap();
    let back = read_offline_dataset(dir.path()).unwrap();
    assert_eq!(back.len(), built.records.len());
    for m in evaluate_offline(&ReplayOracle, None, &back, 0).unwrap() {
        assert_eq!((m.gt, m.ate), (0.0, 0.0));
    }
}

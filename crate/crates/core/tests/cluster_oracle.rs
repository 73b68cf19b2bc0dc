mod common;

use boolperc::connectivity::{connected_restricted, intersecting_pairs};
use boolperc::estimators::{passage_intensity, Query};
use boolperc::sampler::{restrict_to, sample_config, sample_marked, Ball, BallConfig};
use boolperc::{ClusterIndex, ModelSpec, RadiusLaw};
use proptest::prelude::*;

fn models() -> Vec<(ModelSpec, f64)> {
    let c1 = RadiusLaw::power_law_c1(1.0, 2).unwrap();
    let c2 = RadiusLaw::stretched_exp_c2(2.0, 0.5).unwrap();
    vec![
        (ModelSpec::new(2, 0.35, RadiusLaw::dirac(1.0).unwrap()).unwrap(), 10.0),
        (ModelSpec::new(2, 0.8, RadiusLaw::dirac(0.5).unwrap()).unwrap(), 8.0),
        (ModelSpec::new(2, 0.1, c1).unwrap(), 12.0),
        (ModelSpec::new(2, 0.3, c2).unwrap(), 10.0),
        (ModelSpec::new(3, 0.15, RadiusLaw::dirac(1.0).unwrap()).unwrap(), 5.0),
        (ModelSpec::new(3, 0.05, RadiusLaw::exp_tail(1.0).unwrap()).unwrap(), 6.0),
    ]
}

fn capped(model: &ModelSpec, window: f64, seed: u64) -> BallConfig {
    let mut cfg = sample_config(model, window, seed).unwrap();
    cfg.balls.truncate(500);
    cfg
}

#[test]
fn partitions_match_pairwise_search() {
    let models = models();
    let mut nontrivial = 0;
    for seed in 0..100u64 {
        let (model, window) = &models[seed as usize % models.len()];
        let cfg = capped(model, *window, seed);
        let index = ClusterIndex::build(&cfg);
        let expect = common::partition(&cfg.balls);
        assert_eq!(index.partition(), expect, "seed {seed}");
        nontrivial += usize::from(expect.iter().any(|c| c.len() > 1));
        for &s in &[0.5 * window, *window] {
            let covers = |b: &Ball| common::norm(&b.center) <= b.radius;
            let origin = expect.iter().any(|c| {
                c.iter().any(|&i| covers(&cfg.balls[i]))
                    && c.iter().any(|&i| common::norm(&cfg.balls[i].center) + cfg.balls[i].radius >= s)
            });
            assert_eq!(index.connected_origin_to_sphere(s).unwrap(), origin, "seed {seed} s {s}");
            let inner = 0.25 * s;
            assert_eq!(
                index.connected_ball_to_sphere(inner, s).unwrap(),
                common::ball_to_sphere(&cfg.balls, inner, s),
                "seed {seed} s {s}"
            );
        }
    }
    assert!(nontrivial > 50, "only {nontrivial} configurations had a merged component");
}

#[test]
fn pair_list_matches_all_pairs() {
    for (k, (model, window)) in models().iter().enumerate() {
        let cfg = capped(model, *window, 1000 + k as u64);
        let mut got = intersecting_pairs(&cfg.balls, cfg.d);
        got.sort_unstable();
        let mut want = Vec::new();
        for i in 0..cfg.balls.len() {
            for j in i + 1..cfg.balls.len() {
                if common::touch(&cfg.balls[i], &cfg.balls[j]) {
                    want.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(got, want, "model {k}");
    }
}

#[test]
fn restricted_connection_matches_filter() {
    let (model, window) = &models()[0];
    for seed in 0..30u64 {
        let cfg = capped(model, *window, 500 + seed);
        let center = [1.0, -0.5];
        let kept: Vec<Ball> = cfg
            .balls
            .iter()
            .filter(|b| common::dist(&b.center, &center) + b.radius <= 7.0)
            .cloned()
            .collect();
        assert_eq!(restrict_to(&cfg, &center, 7.0).balls, kept);
        let want = common::ball_to_sphere(&kept, 1.0, 5.0);
        assert_eq!(connected_restricted(&cfg, &center, 7.0, 1.0, 5.0).unwrap(), want, "seed {seed}");
    }
}

#[test]
fn coupled_connectivity_radius_is_monotone() {
    let model = ModelSpec::new(2, 0.0, RadiusLaw::dirac(1.0).unwrap()).unwrap();
    let lambdas = [0.1, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5];
    let mut pairs = 0;
    for seed in 0..100u64 {
        let marked = sample_marked(&model, 12.0, seed).unwrap();
        let radii: Vec<Option<f64>> =
            lambdas.iter().map(|&l| ClusterIndex::build(&marked.at(l)).connectivity_radius()).collect();
        for w in radii.windows(2) {
            pairs += 1;
            match (w[0], w[1]) {
                (Some(a), Some(b)) => assert!(a <= b, "seed {seed}: {a} > {b}"),
                (Some(_), None) => panic!("seed {seed}: origin uncovered after adding balls"),
                _ => {}
            }
        }
        for &r in &[4.0, 8.0, 12.0] {
            let t = passage_intensity(&marked, Query::Origin { r });
            for &l in &lambdas {
                let direct = ClusterIndex::build(&marked.at(l)).connected_origin_to_sphere(r).unwrap();
                assert_eq!(t.is_some_and(|t| t <= l), direct, "seed {seed} r {r} lambda {l}");
            }
        }
    }
    assert_eq!(pairs, 600);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_balls_partition(balls in prop::collection::vec(
        ((-6.0f64..6.0, -6.0f64..6.0), 0.05f64..2.5), 0..120)) {
        let balls: Vec<Ball> = balls.iter().map(|&((x, y), r)| Ball::new(&[x, y], r)).collect();
        let cfg = BallConfig::from_balls(2, 10.0, balls);
        prop_assert_eq!(ClusterIndex::build(&cfg).partition(), common::partition(&cfg.balls));
    }

    #[test]
    fn partition_ignores_input_order(seed in 0u64..1000, rot in 0usize..50) {
        let (model, window) = &models()[seed as usize % 6];
        let cfg = capped(model, *window, seed);
        let n = cfg.balls.len();
        prop_assume!(n > 0);
        let mut shifted = cfg.balls.clone();
        shifted.rotate_left(rot % n);
        let a = ClusterIndex::build(&cfg);
        let b = ClusterIndex::build(&BallConfig { balls: shifted, ..cfg.clone() });
        for i in 0..n {
            for j in [0, n / 2, n - 1] {
                let (bi, bj) = ((i + n - rot % n) % n, (j + n - rot % n) % n);
                prop_assert_eq!(a.label(i) == a.label(j), b.label(bi) == b.label(bj));
            }
        }
    }
}

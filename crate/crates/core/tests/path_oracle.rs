//! Connection events against a pixel flood fill of the occupied set.

mod common;

use std::collections::VecDeque;

use boolperc::sampler::{sample_config, Ball};
use boolperc::{ClusterIndex, ModelSpec, RadiusLaw};

const H: f64 = 0.02;

/// Flood fill of occupied pixel centers from the pixel at the origin;
/// true when a reached pixel lies within one pitch of `dB_r`.
fn raster_origin_to_sphere(balls: &[Ball], r: f64) -> bool {
    let m = (r / H).ceil() as i64 + 1;
    let side = (2 * m + 1) as usize;
    let at = |i: i64, j: i64| [i as f64 * H, j as f64 * H];
    let occupied = |p: [f64; 2]| balls.iter().any(|b| common::dist(&b.center, &p) <= b.radius);
    let mut seen = vec![false; side * side];
    let slot = |i: i64, j: i64| ((i + m) as usize) * side + (j + m) as usize;
    if !occupied([0.0, 0.0]) {
        return false;
    }
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    seen[slot(0, 0)] = true;
    while let Some((i, j)) = queue.pop_front() {
        if common::norm(&at(i, j)) >= r - H {
            return true;
        }
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (a, b) = (i + di, j + dj);
            if a.abs() > m || b.abs() > m || seen[slot(a, b)] {
                continue;
            }
            let p = at(a, b);
            if common::norm(&p) <= r && occupied(p) {
                seen[slot(a, b)] = true;
                queue.push_back((a, b));
            }
        }
    }
    false
}

fn pairwise_origin_to_sphere(balls: &[Ball], r: f64) -> bool {
    common::partition(balls).iter().any(|c| {
        c.iter().any(|&i| common::norm(&balls[i].center) <= balls[i].radius)
            && c.iter().any(|&i| common::norm(&balls[i].center) + balls[i].radius >= r)
    })
}

/// Configurations whose answer changes when every radius moves by a few
/// pixel pitches cannot be resolved by the raster.
fn ambiguous(balls: &[Ball], r: f64) -> bool {
    let margin = 3.0 * H;
    let scaled = |dr: f64| -> Vec<Ball> {
        balls.iter().map(|b| Ball::new(&b.center, (b.radius + dr).max(0.0))).collect()
    };
    pairwise_origin_to_sphere(&scaled(-margin), r) != pairwise_origin_to_sphere(&scaled(margin), r)
}

fn run(model: &ModelSpec, r: f64, seeds: std::ops::Range<u64>) -> (usize, usize) {
    let (mut checked, mut positive) = (0, 0);
    for seed in seeds {
        let cfg = sample_config(model, r, seed).unwrap();
        if ambiguous(&cfg.balls, r) {
            continue;
        }
        let got = ClusterIndex::build(&cfg).connected_origin_to_sphere(r).unwrap();
        assert_eq!(got, raster_origin_to_sphere(&cfg.balls, r), "seed {seed}");
        checked += 1;
        positive += usize::from(got);
    }
    (checked, positive)
}

#[test]
fn dirac_connections_match_raster() {
    let model = ModelSpec::new(2, 0.45, RadiusLaw::dirac(1.0).unwrap()).unwrap();
    let (checked, positive) = run(&model, 5.0, 0..120);
    assert!(checked >= 30 && positive >= 5 && positive < checked, "{checked} {positive}");
}

#[test]
fn mixed_radii_connections_match_raster() {
    let law = RadiusLaw::truncated(RadiusLaw::power_law_c1(1.0, 2).unwrap(), 3.0).unwrap();
    let model = ModelSpec::new(2, 0.2, law).unwrap();
    let (checked, positive) = run(&model, 5.0, 0..120);
    assert!(checked >= 30 && positive >= 5 && positive < checked, "{checked} {positive}");
}

//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use boolperc::sampler::Ball;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn touch(a: &Ball, b: &Ball) -> bool {
    dist(&a.center, &b.center) <= a.radius + b.radius
}

/// Components by depth-first search over all pairs, each sorted, listed by smallest member.
pub fn partition(balls: &[Ball]) -> Vec<Vec<usize>> {
    let n = balls.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if !seen[j] && touch(&balls[i], &balls[j]) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `B_inner <-> dB_outer` through the pairwise graph: some component has a
/// member meeting `B_inner` and a member reaching distance `outer`.
pub fn ball_to_sphere(balls: &[Ball], inner: f64, outer: f64) -> bool {
    partition(balls).iter().any(|c| {
        c.iter().any(|&i| norm(&balls[i].center) - balls[i].radius <= inner)
            && c.iter().any(|&i| norm(&balls[i].center) + balls[i].radius >= outer)
    })
}

/// Some ball meets both `B_{2 delta r}` and `dB_{(1 - 2 delta) r}`.
pub fn pi_event(balls: &[Ball], r: f64, delta: f64) -> bool {
    let (a, b) = (2.0 * delta * r, (1.0 - 2.0 * delta) * r);
    balls.iter().any(|ball| {
        let n = norm(&ball.center);
        n - ball.radius <= a && (n - b).abs() <= ball.radius
    })
}

/// `|x - p| <= z sigma`.
pub fn within(x: f64, p: f64, sigma: f64, z: f64) -> bool {
    (x - p).abs() <= z * sigma
}

/// `1[0 <-> dB_r]` by pairwise search over the balls meeting `B_r`.
pub fn origin_to_sphere(balls: &[Ball], r: f64) -> bool {
    let near: Vec<Ball> = balls.iter().filter(|b| norm(&b.center) - b.radius <= r).cloned().collect();
    partition(&near).iter().any(|c| {
        c.iter().any(|&i| norm(&near[i].center) <= near[i].radius)
            && c.iter().any(|&i| norm(&near[i].center) + near[i].radius >= r)
    })
}

/// Run the exploration algorithm on one cell configuration, resample every
/// coordinate it left unrevealed, and check the outcome is unchanged.
/// Returns the number of coordinates resampled.
pub fn determination_check(
    model: &boolperc::ModelSpec,
    s: f64,
    l: f64,
    r: f64,
    seed: u64,
) -> Result<usize, String> {
    use boolperc::osss_lab::run_algorithm;
    use boolperc::sampler::{resample_cell, sample_cells};
    use boolperc::CellCoord;
    use std::collections::BTreeSet;

    let cells = sample_cells(model, l, r, seed).map_err(|e| e.to_string())?;
    let trace = run_algorithm(&cells, s, l, r).map_err(|e| e.to_string())?;
    if trace.revealed.first() != Some(&CellCoord::Ghost) {
        return Err(format!("seed {seed}: g not revealed first"));
    }
    if trace.f_value != origin_to_sphere(&cells.balls, r) || !trace.halted_determined {
        return Err(format!("seed {seed}: trace value disagrees with the configuration"));
    }
    let revealed: BTreeSet<_> = trace.revealed.iter().cloned().collect();
    if revealed.len() != trace.revealed.len() {
        return Err(format!("seed {seed}: a coordinate was revealed twice"));
    }
    let layout = cells.layout.clone().expect("cell layout");
    let mut fresh = cells.clone();
    let mut resampled = 0;
    for (k, coord) in layout.coordinates().into_iter().enumerate() {
        if revealed.contains(&coord) {
            continue;
        }
        fresh = resample_cell(&fresh, &coord, seed ^ (0x9e37_79b9 + k as u64)).map_err(|e| e.to_string())?;
        resampled += 1;
    }
    if origin_to_sphere(&fresh.balls, r) != trace.f_value {
        return Err(format!("seed {seed}: resampling unrevealed coordinates changed f"));
    }
    Ok(resampled)
}

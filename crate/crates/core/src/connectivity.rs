//! Clusters of the occupied set and the connection events built on them.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry;
use crate::grid::HierGrid;
use crate::sampler::{restrict_to, Ball, BallConfig};
use crate::union_find::UnionFind;

/// Slack allowed when comparing a query radius to the sampled window.
const WINDOW_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Component {
    pub size: usize,
    pub covers_origin: bool,
    /// max over members of `|z| + R`
    pub reach: f64,
    /// min over members of `|z| - R` (negative when a member covers the origin)
    pub min_dist: f64,
}

impl Component {
    pub(crate) fn of_ball(b: &Ball) -> Self {
        let n = geometry::norm(&b.center);
        Self {
            size: 1,
            covers_origin: geometry::norm_sq(&b.center) <= b.radius * b.radius,
            reach: n + b.radius,
            min_dist: n - b.radius,
        }
    }

    pub(crate) fn merge(&mut self, o: &Component) {
        self.size += o.size;
        self.covers_origin |= o.covers_origin;
        self.reach = self.reach.max(o.reach);
        self.min_dist = self.min_dist.min(o.min_dist);
    }

    pub(crate) fn reaches_sphere(&self, inner: f64, outer: f64) -> bool {
        self.min_dist <= inner && self.reach >= outer
    }
}

/// Every intersecting pair `(i, j)`, `i < j`, by the closed predicate.
pub fn intersecting_pairs(balls: &[Ball], d: usize) -> Vec<(u32, u32)> {
    let centers: Vec<&[f64]> = balls.iter().map(|b| &b.center[..]).collect();
    let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
    let grid = HierGrid::build(d, &centers, &radii);
    let mut out = Vec::new();
    grid.for_each_candidate(&centers, &radii, |i, j| {
        if geometry::balls_intersect(centers[i], radii[i], centers[j], radii[j]) {
            out.push((i.min(j) as u32, i.max(j) as u32));
        }
    });
    out
}

/// Connected components of the union of balls, with per-component aggregates.
#[derive(Clone, Debug)]
pub struct ClusterIndex {
    window_radius: f64,
    labels: Vec<u32>,
    components: Vec<Component>,
}

/// Cluster a configuration.
pub fn build_clusters(config: &BallConfig) -> ClusterIndex {
    ClusterIndex::build(config)
}

impl ClusterIndex {
    pub fn build(config: &BallConfig) -> Self {
        let n = config.balls.len();
        let mut uf = UnionFind::new(n);
        for (i, j) in intersecting_pairs(&config.balls, config.d) {
            uf.union(i as usize, j as usize);
        }
        let mut root_label = vec![u32::MAX; n];
        let mut labels = Vec::with_capacity(n);
        let mut components: Vec<Component> = Vec::new();
        for (i, b) in config.balls.iter().enumerate() {
            let root = uf.find(i);
            let c = Component::of_ball(b);
            if root_label[root] == u32::MAX {
                root_label[root] = components.len() as u32;
                components.push(c);
            } else {
                components[root_label[root] as usize].merge(&c);
            }
            labels.push(root_label[root]);
        }
        Self { window_radius: config.window_radius, labels, components }
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Component label of ball `i`; labels are numbered by first member.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Components as sorted lists of ball indices, ordered by least member.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.components.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    fn check_window(&self, radius: f64) -> Result<()> {
        if radius > self.window_radius + WINDOW_SLACK {
            return Err(Error::OutsideWindow { radius, window: self.window_radius });
        }
        Ok(())
    }

    /// `0 <-> dB_r`: a component covers the origin and reaches distance `r`.
    pub fn connected_origin_to_sphere(&self, r: f64) -> Result<bool> {
        self.check_window(r)?;
        Ok(self.components.iter().any(|c| c.covers_origin && c.reach >= r))
    }

    /// `B_inner <-> dB_outer`.
    pub fn connected_ball_to_sphere(&self, inner: f64, outer: f64) -> Result<bool> {
        if !(inner >= 0.0 && inner < outer) {
            return Err(crate::error::invalid("inner", format!("need 0 <= inner < outer, got {inner}, {outer}")));
        }
        self.check_window(outer)?;
        Ok(self.components.iter().any(|c| c.reaches_sphere(inner, outer)))
    }

    /// Largest `s` with `0 <-> dB_s`, or `None` when the origin is vacant.
    /// Only meaningful for `s` up to the window radius.
    pub fn connectivity_radius(&self) -> Option<f64> {
        self.components.iter().filter(|c| c.covers_origin).map(|c| c.reach).reduce(f64::max)
    }
}

/// Connection `B_inner <-> dB_outer` using only the balls inside `B_{z_radius}^{z_center}`.
pub fn connected_restricted(
    config: &BallConfig,
    z_center: &[f64],
    z_radius: f64,
    inner: f64,
    outer: f64,
) -> Result<bool> {
    let kept = restrict_to(config, z_center, z_radius);
    if kept.is_empty() {
        return Ok(false);
    }
    ClusterIndex::build(&kept).connected_ball_to_sphere(inner, outer)
}

/// Approximate vacant crossing `0 <-> dB_r` in the complement of the occupied
/// set, on a square raster of pitch `h`. A raster cell counts as vacant when
/// its center lies strictly outside every ball; paths use 4-neighbours inside
/// the cells meeting `B_r`. Converges only as `h -> 0`, with no error bound.
pub fn vacant_connected(config: &BallConfig, r: f64, h: f64) -> Result<bool> {
    if config.d != 2 {
        return Err(Error::Unsupported(format!("vacant set raster needs d = 2, got d = {}", config.d)));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(crate::error::invalid("h", format!("must be finite and > 0, got {h}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(crate::error::invalid("r", format!("must be finite and > 0, got {r}")));
    }
    let m = (r / h).ceil() as i64 + 1;
    let side = (2 * m + 1) as usize;
    let idx = |i: i64, j: i64| ((i + m) as usize) * side + (j + m) as usize;
    let mut covered = vec![false; side * side];
    for b in &config.balls {
        let (cx, cy, rad) = (b.center[0], b.center[1], b.radius);
        let i0 = (((cx - rad) / h).floor() as i64).max(-m);
        let i1 = (((cx + rad) / h).ceil() as i64).min(m);
        let j0 = (((cy - rad) / h).floor() as i64).max(-m);
        let j1 = (((cy + rad) / h).ceil() as i64).min(m);
        for i in i0..=i1 {
            for j in j0..=j1 {
                let (dx, dy) = (i as f64 * h - cx, j as f64 * h - cy);
                if dx * dx + dy * dy <= rad * rad {
                    covered[idx(i, j)] = true;
                }
            }
        }
    }
    // distance range from the origin to the closed cell around (ih, jh)
    let range = |i: i64, j: i64| {
        let axis = |k: i64| {
            let (a, b) = ((k as f64 - 0.5) * h, (k as f64 + 0.5) * h);
            let near = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
            (near, a.abs().max(b.abs()))
        };
        let ((ni, fi), (nj, fj)) = (axis(i), axis(j));
        ((ni * ni + nj * nj).sqrt(), (fi * fi + fj * fj).sqrt())
    };
    if covered[idx(0, 0)] {
        return Ok(false);
    }
    let mut seen = vec![false; side * side];
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    seen[idx(0, 0)] = true;
    while let Some((i, j)) = queue.pop_front() {
        let (near, far) = range(i, j);
        if near <= r && far >= r {
            return Ok(true);
        }
        for (a, b) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
            if a.abs() > m || b.abs() > m {
                continue;
            }
            let k = idx(a, b);
            if seen[k] || covered[k] || range(a, b).0 > r {
                continue;
            }
            seen[k] = true;
            queue.push_back((a, b));
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(balls: &[([f64; 2], f64)], window: f64) -> BallConfig {
        BallConfig::from_balls(2, window, balls.iter().map(|(c, r)| Ball::new(c, *r)).collect())
    }

    #[test]
    fn empty_config() {
        let c = cfg(&[], 10.0);
        let idx = build_clusters(&c);
        assert_eq!(idx.num_components(), 0);
        assert!(!idx.connected_origin_to_sphere(3.0).unwrap());
        assert!(!idx.connected_ball_to_sphere(1.0, 3.0).unwrap());
        assert_eq!(idx.connectivity_radius(), None);
    }

    #[test]
    fn pair_threshold() {
        assert_eq!(build_clusters(&cfg(&[([0.0, 0.0], 1.0), ([1.9, 0.0], 1.0)], 5.0)).num_components(), 1);
        assert_eq!(build_clusters(&cfg(&[([0.0, 0.0], 1.0), ([2.1, 0.0], 1.0)], 5.0)).num_components(), 2);
        // tangent balls touch under the closed predicate
        assert_eq!(build_clusters(&cfg(&[([0.0, 0.0], 1.0), ([2.0, 0.0], 1.0)], 5.0)).num_components(), 1);
    }

    #[test]
    fn single_ball_reach() {
        let idx = build_clusters(&cfg(&[([0.0, 0.0], 5.0)], 10.0));
        assert!(idx.connected_origin_to_sphere(4.0).unwrap());
        assert!(!idx.connected_origin_to_sphere(6.0).unwrap());
        assert_eq!(idx.connectivity_radius(), Some(5.0));
    }

    #[test]
    fn chain_reach() {
        let c = cfg(&[([0.0, 0.0], 1.0), ([0.0, 1.0], 1.0), ([1.5, 1.0], 1.0), ([3.0, 1.0], 1.0)], 5.0);
        let idx = build_clusters(&c);
        assert!(idx.connected_origin_to_sphere(3.5).unwrap());
        let expect = 10f64.sqrt() + 1.0;
        assert!((idx.connectivity_radius().unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn window_is_enforced() {
        let idx = build_clusters(&cfg(&[([0.0, 0.0], 5.0)], 4.0));
        assert!(matches!(idx.connected_origin_to_sphere(4.5), Err(Error::OutsideWindow { .. })));
        assert!(idx.connected_ball_to_sphere(1.0, 5.0).is_err());
        assert!(idx.connected_ball_to_sphere(2.0, 2.0).is_err());
    }

    #[test]
    fn touching_both_spheres() {
        let (inner, outer) = (2.0, 7.0);
        let c = cfg(&[([(inner + outer) / 2.0, 0.0], (outer - inner) / 2.0)], 8.0);
        assert!(build_clusters(&c).connected_ball_to_sphere(inner, outer).unwrap());
    }

    #[test]
    fn restriction_cuts_chain() {
        // middle ball pokes outside Z = B_5
        let c = cfg(&[([0.0, 0.0], 1.5), ([2.5, 0.0], 2.6), ([4.0, 0.0], 0.9)], 10.0);
        assert!(build_clusters(&c).connected_ball_to_sphere(0.5, 4.5).unwrap());
        assert!(!connected_restricted(&c, &[0.0, 0.0], 5.0, 0.5, 4.5).unwrap());
        assert_eq!(
            connected_restricted(&c, &[0.0, 0.0], 100.0, 0.5, 4.5).unwrap(),
            build_clusters(&c).connected_ball_to_sphere(0.5, 4.5).unwrap()
        );
        assert!(!connected_restricted(&c, &[50.0, 0.0], 1.0, 0.5, 4.5).unwrap());
    }

    #[test]
    fn vacant_cases() {
        assert!(vacant_connected(&cfg(&[], 5.0), 5.0, 0.1).unwrap());
        let ring: Vec<([f64; 2], f64)> = (0..40)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 40.0;
                ([3.0 * t.cos(), 3.0 * t.sin()], 0.5)
            })
            .collect();
        assert!(!vacant_connected(&cfg(&ring, 5.0), 5.0, 0.05).unwrap());
        let gap: Vec<_> = ring[..36].to_vec();
        assert!(vacant_connected(&cfg(&gap, 5.0), 5.0, 0.05).unwrap());
        let c3 = BallConfig::from_balls(3, 5.0, vec![]);
        assert!(matches!(vacant_connected(&c3, 2.0, 0.1), Err(Error::Unsupported(_))));
    }
}

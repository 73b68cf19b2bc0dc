//! The exploration algorithm `T_{s,L}` for `f = 1[0 <-> dB_r]`, its
//! revealments, resampling influences, and empirical checks of the OSSS
//! inequality and of Russo's formula.
//!
//! Coordinates are densely numbered: `g` is 0 and `(x, n)` follows in the
//! canonical order (ascending `n`, then lexicographic `x`), which is also the
//! order in which ties between eligible coordinates are broken.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connectivity::{ClusterIndex, Component};
use crate::error::{invalid, Error, Result};
use crate::estimators::{passage_intensities, replicates, Query};
use crate::geometry::{self, LatticePoint};
use crate::rng::{self, tag};
use crate::sampler::{
    lattice_norm, resample_cell, sample_cells, sample_config, Ball, BallConfig, CellCoord, CellLayout, ModelSpec,
};
use crate::stats::Estimate;

/// Dense numbering of `{g} ∪ I_L`.
#[derive(Clone, Debug)]
pub struct CoordIndex {
    d: usize,
    m: i64,
    bands: u32,
    boxes: Vec<LatticePoint>,
    /// cube cell -> box index, `u32::MAX` outside `|x| <= L`
    cube: Vec<u32>,
}

impl CoordIndex {
    pub fn new(layout: &CellLayout) -> Self {
        let d = layout.model.d;
        let m = layout.l.floor() as i64;
        let side = (2 * m + 1) as usize;
        let mut cube = vec![u32::MAX; side.pow(d as u32)];
        let mut boxes = Vec::new();
        for (k, x) in geometry::lattice_cube(d, m).enumerate() {
            if lattice_norm(&x) <= layout.l {
                cube[k] = boxes.len() as u32;
                boxes.push(x);
            }
        }
        Self { d, m, bands: layout.max_band(), boxes, cube }
    }

    /// Number of coordinates including `g`.
    pub fn len(&self) -> usize {
        1 + self.boxes.len() * self.bands as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn cube_slot(&self, x: &[i64]) -> Option<usize> {
        let side = 2 * self.m + 1;
        let mut k = 0i64;
        for &v in x {
            if v.abs() > self.m {
                return None;
            }
            k = k * side + (v + self.m);
        }
        Some(k as usize)
    }

    fn box_index(&self, x: &[i64]) -> Option<usize> {
        let b = self.cube[self.cube_slot(x)?];
        (b != u32::MAX).then_some(b as usize)
    }

    pub fn dense(&self, coord: &CellCoord) -> Option<usize> {
        match coord {
            CellCoord::Ghost => Some(0),
            CellCoord::Cell { x, n } => {
                if *n == 0 || *n > self.bands || x.len() != self.d {
                    return None;
                }
                Some(1 + (*n as usize - 1) * self.boxes.len() + self.box_index(x)?)
            }
        }
    }

    pub fn coord(&self, i: usize) -> CellCoord {
        if i == 0 {
            return CellCoord::Ghost;
        }
        let (band, b) = ((i - 1) / self.boxes.len(), (i - 1) % self.boxes.len());
        CellCoord::Cell { x: self.boxes[b].clone(), n: band as u32 + 1 }
    }

    fn dense_of(&self, box_idx: usize, n: u32) -> usize {
        1 + (n as usize - 1) * self.boxes.len() + box_idx
    }

    /// Contiguous ball range of every dense coordinate in a sorted cell config.
    fn ranges(&self, cfg: &BallConfig) -> Vec<(u32, u32)> {
        let mut out = vec![(0u32, 0u32); self.len()];
        let mut i = 0;
        while i < cfg.balls.len() {
            let c = cfg.balls[i].coord.as_ref().expect("cell configs tag every ball");
            let mut j = i + 1;
            while j < cfg.balls.len() && cfg.balls[j].coord.as_ref() == Some(c) {
                j += 1;
            }
            if let Some(k) = self.dense(c) {
                out[k] = (i as u32, j as u32);
            }
            i = j;
        }
        out
    }
}

/// Outcome of one run of the exploration algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmTrace {
    /// coordinates in the order they were revealed, `g` first
    pub revealed: Vec<CellCoord>,
    /// `f` evaluated on the revealed balls
    pub f_value: bool,
    /// `f` on the revealed balls agrees with `f` on the whole configuration
    pub halted_determined: bool,
}

fn check_layout(cells: &BallConfig, l: f64, r: f64) -> Result<&CellLayout> {
    let layout = cells.layout.as_ref().ok_or(Error::NoCellLayout)?;
    if layout.l != l || layout.r != r {
        return Err(Error::LayoutMismatch { config_l: layout.l, config_r: layout.r, call_l: l, call_r: r });
    }
    Ok(layout)
}

fn check_params(s: f64, l: f64, r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be finite and > 0, got {r}")));
    }
    if !(l >= 2.0 * r && l.is_finite()) {
        return Err(invalid("L", format!("must satisfy L >= 2r, got L={l}, r={r}")));
    }
    if !(0.0..=r).contains(&s) {
        return Err(invalid("s", format!("must lie in [0, r], got {s}")));
    }
    Ok(())
}

/// `1[0 <-> dB_r]` on the given balls.
fn f_of<'a>(d: usize, r: f64, balls: impl IntoIterator<Item = &'a Ball>) -> bool {
    let near: Vec<Ball> = balls.into_iter().filter(|b| b.meets_origin_ball(r)).cloned().collect();
    let cfg = BallConfig::from_balls(d, r, near);
    ClusterIndex::build(&cfg).connected_origin_to_sphere(r).expect("query at the window radius")
}

fn touches_sphere(b: &Ball, s: f64) -> bool {
    let n = geometry::norm(&b.center);
    n - b.radius <= s && s <= n + b.radius
}

struct Explorer<'a> {
    idx: &'a CoordIndex,
    cfg: &'a BallConfig,
    ranges: Vec<(u32, u32)>,
    s: f64,
    revealed: Vec<bool>,
    queued: Vec<bool>,
    heap: BinaryHeap<Reverse<u32>>,
    attached: Vec<usize>,
    pending: Vec<usize>,
    order: Vec<u32>,
}

impl<'a> Explorer<'a> {
    fn new(idx: &'a CoordIndex, cfg: &'a BallConfig, s: f64) -> Self {
        let n = idx.len();
        Self {
            idx,
            cfg,
            ranges: idx.ranges(cfg),
            s,
            revealed: vec![false; n],
            queued: vec![false; n],
            heap: BinaryHeap::new(),
            attached: Vec::new(),
            pending: Vec::new(),
            order: Vec::new(),
        }
    }

    fn enqueue(&mut self, k: usize) {
        if !self.queued[k] && !self.revealed[k] {
            self.queued[k] = true;
            self.heap.push(Reverse(k as u32));
        }
    }

    /// Coordinates within distance `< n` of the sphere.
    fn seed_sphere(&mut self) {
        for (bi, x) in self.idx.boxes.iter().enumerate() {
            let gap = geometry::box_sphere_dist(x, self.s);
            for n in 1..=self.idx.bands {
                if gap < n as f64 {
                    self.enqueue(self.idx.dense_of(bi, n));
                }
            }
        }
    }

    /// Coordinates within distance `< n` of ball `bi`.
    fn seed_ball(&mut self, bi: usize) {
        let b = &self.cfg.balls[bi];
        let reach = b.radius + self.idx.bands as f64 + 1.0;
        let m = self.idx.m;
        let lo: LatticePoint = b.center.iter().map(|&c| ((c - reach).floor() as i64).max(-m)).collect();
        let hi: LatticePoint = b.center.iter().map(|&c| ((c + reach).ceil() as i64).min(m)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return;
        }
        let mut cur = lo.clone();
        loop {
            if let Some(box_idx) = self.idx.box_index(&cur) {
                let gap = geometry::dist_point_to_box(&b.center, &cur) - b.radius;
                for n in 1..=self.idx.bands {
                    if gap < n as f64 {
                        self.enqueue(self.idx.dense_of(box_idx, n));
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == cur.len() {
                    return;
                }
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
                k += 1;
            }
        }
    }

    fn attach(&mut self, first: usize) {
        let mut stack = vec![first];
        while let Some(bi) = stack.pop() {
            self.attached.push(bi);
            self.seed_ball(bi);
            let b = &self.cfg.balls[bi];
            let mut k = 0;
            while k < self.pending.len() {
                let p = &self.cfg.balls[self.pending[k]];
                if geometry::balls_intersect(&b.center, b.radius, &p.center, p.radius) {
                    stack.push(self.pending.swap_remove(k));
                } else {
                    k += 1;
                }
            }
        }
    }

    fn reveal(&mut self, k: usize) {
        self.revealed[k] = true;
        self.order.push(k as u32);
        let (a, b) = self.ranges[k];
        for bi in a as usize..b as usize {
            let ball = &self.cfg.balls[bi];
            let joins = touches_sphere(ball, self.s)
                || self.attached.iter().any(|&j| {
                    let o = &self.cfg.balls[j];
                    geometry::balls_intersect(&ball.center, ball.radius, &o.center, o.radius)
                });
            if joins {
                self.attach(bi);
            } else {
                self.pending.push(bi);
            }
        }
    }

    fn run(mut self) -> (Vec<u32>, Vec<bool>) {
        self.reveal(0);
        self.seed_sphere();
        while let Some(Reverse(k)) = self.heap.pop() {
            self.reveal(k as usize);
        }
        (self.order, self.revealed)
    }
}

/// Dense revealed set and `f` for one configuration.
fn explore(idx: &CoordIndex, cells: &BallConfig, s: f64, r: f64) -> (Vec<u32>, Vec<bool>, bool) {
    let (order, revealed) = Explorer::new(idx, cells, s).run();
    let ranges = idx.ranges(cells);
    let f = f_of(
        cells.d,
        r,
        order.iter().flat_map(|&k| {
            let (a, b) = ranges[k as usize];
            &cells.balls[a as usize..b as usize]
        }),
    );
    (order, revealed, f)
}

/// Run `T_{s,L}` on a configuration from [`sample_cells`] with the same `L` and `r`.
pub fn run_algorithm(cells: &BallConfig, s: f64, l: f64, r: f64) -> Result<AlgorithmTrace> {
    check_params(s, l, r)?;
    let layout = check_layout(cells, l, r)?;
    let idx = CoordIndex::new(layout);
    let (order, _, f_value) = explore(&idx, cells, s, r);
    let full = f_of(cells.d, r, &cells.balls);
    Ok(AlgorithmTrace {
        revealed: order.iter().map(|&k| idx.coord(k as usize)).collect(),
        f_value,
        halted_determined: f_value == full,
    })
}

/// Offsets `o` such that the box `S^{x+o}` contains a point at distance exactly `n` from `S^x`.
fn shell_offsets(d: usize, n: u32) -> Vec<LatticePoint> {
    let nf = n as f64;
    geometry::lattice_cube(d, n as i64 + 1)
        .filter(|o| {
            let zero: LatticePoint = smallvec::smallvec![0; d];
            let (lo, _) = geometry::box_box_range(&zero, o);
            // the farthest point of S^{x+o} from S^x is at distance |o|
            lo <= nf && nf <= lattice_norm(o)
        })
        .collect()
}

/// Boxes met by `dB_s` together with every cluster touching it.
struct ShellProbe {
    m: i64,
    side: usize,
    met: Vec<bool>,
}

impl ShellProbe {
    fn new(cells: &BallConfig, s: f64, reach: i64) -> Self {
        let d = cells.d;
        let m = reach;
        let side = (2 * m + 1) as usize;
        let mut met = vec![false; side.pow(d as u32)];
        let slot = |x: &[i64]| x.iter().fold(0usize, |k, &v| k * side + (v + m) as usize);
        for x in geometry::lattice_cube(d, m) {
            if geometry::box_sphere_dist(&x, s) == 0.0 {
                met[slot(&x)] = true;
            }
        }
        let index = ClusterIndex::build(&BallConfig { window_radius: f64::INFINITY, ..cells.clone() });
        let touching: Vec<bool> =
            index.components().iter().map(|c| c.min_dist <= s && c.reach >= s).collect();
        for (i, b) in cells.balls.iter().enumerate() {
            if !touching[index.label(i)] {
                continue;
            }
            let lo: Vec<i64> = b.center.iter().map(|&c| ((c - b.radius).floor() as i64).max(-m)).collect();
            let hi: Vec<i64> = b.center.iter().map(|&c| ((c + b.radius).ceil() as i64).min(m)).collect();
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                continue;
            }
            let mut cur: LatticePoint = lo.iter().copied().collect();
            'cells: loop {
                if geometry::dist_point_to_box(&b.center, &cur) <= b.radius {
                    met[slot(&cur)] = true;
                }
                for k in 0..d {
                    if cur[k] < hi[k] {
                        cur[k] += 1;
                        continue 'cells;
                    }
                    cur[k] = lo[k];
                }
                break;
            }
        }
        Self { m, side, met }
    }

    fn hits(&self, x: &[i64], ring: &[LatticePoint]) -> bool {
        ring.iter().any(|o| {
            let mut k = 0usize;
            for (a, b) in x.iter().zip(o) {
                let v = a + b;
                if v.abs() > self.m {
                    return false;
                }
                k = k * self.side + (v + self.m) as usize;
            }
            self.met[k]
        })
    }
}

/// Whether the shell bound `delta_(x,n) <= P[S^x_n <-> dB_s]` applies pathwise:
/// the sphere must contain a point at distance at least `n` from `S^x`.
fn shell_bound_applies(x: &[i64], n: u32, s: f64) -> bool {
    let half_diag = (x.len() as f64).sqrt() / 2.0;
    lattice_norm(x) + s - half_diag >= n as f64
}

struct AlgorithmRep {
    revealed: Vec<u32>,
    f: bool,
    /// dense coordinates whose shell is connected to `dB_s`
    shell_hits: Vec<u32>,
}

struct InfluenceRep {
    flips: Vec<u32>,
}

fn algorithm_reps(model: &ModelSpec, s: f64, l: f64, r: f64, n_reps: u64, seed: u64) -> Result<(CoordIndex, Vec<AlgorithmRep>)> {
    check_params(s, l, r)?;
    let layout = CellLayout { model: model.clone(), l, r };
    let idx = CoordIndex::new(&layout);
    let rings: Vec<Vec<LatticePoint>> = (1..=idx.bands).map(|n| shell_offsets(model.d, n)).collect();
    let reach = idx.m + idx.bands as i64 + 2;
    let reps = replicates(n_reps, rng::derive(seed, &[tag::ALGORITHM]), |rs| {
        let cells = sample_cells(model, l, r, rs)?;
        let (mut revealed, _, f) = explore(&idx, &cells, s, r);
        revealed.sort_unstable();
        let probe = ShellProbe::new(&cells, s, reach);
        let mut shell_hits = Vec::new();
        for k in 1..idx.len() {
            let CellCoord::Cell { x, n } = idx.coord(k) else { unreachable!() };
            if shell_bound_applies(&x, n, s) && probe.hits(&x, &rings[n as usize - 1]) {
                shell_hits.push(k as u32);
            }
        }
        Ok(AlgorithmRep { revealed, f, shell_hits })
    })?;
    Ok((idx, reps))
}

fn influence_reps(model: &ModelSpec, l: f64, r: f64, n_reps: u64, seed: u64) -> Result<(CoordIndex, Vec<InfluenceRep>)> {
    check_params(0.0, l, r)?;
    let layout = CellLayout { model: model.clone(), l, r };
    let idx = CoordIndex::new(&layout);
    let band_mass: Vec<f64> =
        (1..=idx.bands).map(|n| model.law.band_mass((n - 1) as f64, n as f64)).collect();
    let base = rng::derive(seed, &[tag::INFLUENCE]);
    let out = (0..n_reps)
        .into_par_iter()
        .map(|j| {
            let cells = sample_cells(model, l, r, rng::derive(base, &[j]))?;
            let f = f_of(cells.d, r, &cells.balls);
            let ranges = idx.ranges(&cells);
            let resample_seed = rng::derive(seed, &[tag::RESAMPLE, j]);
            let mut flips = Vec::new();
            for (k, &(a, b)) in ranges.iter().enumerate() {
                let coord = idx.coord(k);
                if let CellCoord::Cell { n, .. } = &coord {
                    if band_mass[*n as usize - 1] <= 0.0 {
                        continue;
                    }
                }
                let old = &cells.balls[a as usize..b as usize];
                let fresh = resample_cell(&cells, &coord, resample_seed)?;
                let new = &fresh.balls[fresh.coord_range(&coord)];
                // balls missing B_r cannot change the event
                if !old.iter().chain(new).any(|b| b.meets_origin_ball(r)) {
                    continue;
                }
                if f_of(cells.d, r, &fresh.balls) != f {
                    flips.push(k as u32);
                }
            }
            Ok(InfluenceRep { flips })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((idx, out))
}

/// Per-coordinate revealment with the shell bound estimated on the same replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Revealment {
    pub coord: CellCoord,
    pub delta: f64,
    /// frequency of `S^x_n <-> dB_s`; `None` where the bound is not pathwise
    pub shell_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealmentMap {
    pub n: u64,
    pub entries: Vec<Revealment>,
    /// coordinates with `delta` above the shell bound by more than 4 combined standard errors
    pub bound_violations: usize,
}

fn bernoulli_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

fn revealment_map(idx: &CoordIndex, reps: &[AlgorithmRep], s: f64) -> RevealmentMap {
    let n = reps.len() as u64;
    let mut revealed = vec![0u64; idx.len()];
    let mut shell = vec![0u64; idx.len()];
    for rep in reps {
        for &k in &rep.revealed {
            revealed[k as usize] += 1;
        }
        for &k in &rep.shell_hits {
            shell[k as usize] += 1;
        }
    }
    let nf = n.max(1) as f64;
    let mut violations = 0;
    let entries = (0..idx.len())
        .map(|k| {
            let coord = idx.coord(k);
            let delta = revealed[k] as f64 / nf;
            let shell_bound = match &coord {
                CellCoord::Cell { x, n: band } if shell_bound_applies(x, *band, s) => Some(shell[k] as f64 / nf),
                _ => None,
            };
            if let Some(p) = shell_bound {
                let se = bernoulli_se(delta, n).hypot(bernoulli_se(p, n));
                if delta > p + 4.0 * se {
                    violations += 1;
                }
            }
            Revealment { coord, delta, shell_bound }
        })
        .collect();
    RevealmentMap { n, entries, bound_violations: violations }
}

/// Reveal frequencies of `T_{s,L}` for every coordinate of `{g} ∪ I_L`.
pub fn estimate_revealments(model: &ModelSpec, s: f64, l: f64, r: f64, n_reps: u64, seed: u64) -> Result<RevealmentMap> {
    let (idx, reps) = algorithm_reps(model, s, l, r, n_reps, seed)?;
    Ok(revealment_map(&idx, &reps, s))
}

/// Frequency with which resampling a coordinate flips `f`.
pub fn estimate_influences(model: &ModelSpec, l: f64, r: f64, n_reps: u64, seed: u64) -> Result<Vec<(CellCoord, f64)>> {
    let (idx, reps) = influence_reps(model, l, r, n_reps, seed)?;
    let mut counts = vec![0u64; idx.len()];
    for rep in &reps {
        for &k in &rep.flips {
            counts[k as usize] += 1;
        }
    }
    let nf = reps.len().max(1) as f64;
    Ok((0..idx.len()).map(|k| (idx.coord(k), counts[k] as f64 / nf)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordStat {
    pub coord: CellCoord,
    pub delta: f64,
    pub inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsssReport {
    pub r: f64,
    pub s: f64,
    pub l: f64,
    pub model: ModelSpec,
    pub n_reps: u64,
    pub seed: u64,
    pub theta: Estimate,
    /// `theta (1 - theta)` with a delta-method standard error
    pub var_f: Estimate,
    /// `sum_i delta_i Inf_i`
    pub sum_delta_inf: Estimate,
    /// `var_f` exceeds the sum by more than 4 combined standard errors
    pub violated: bool,
    /// coordinates with a nonzero revealment or influence
    pub coords: Vec<CoordStat>,
    pub shell_bound_violations: usize,
}

/// Compare `Var f` with `sum_i delta_i Inf_i` for `T_{s,L}`.
///
/// Replicate `j` of the algorithm and replicate `j` of the influence
/// estimator are independent, so `Y_j = sum_i 1[i revealed] 1[i flips]`
/// are iid with mean `sum_i delta_i Inf_i`.
pub fn osss_check(model: &ModelSpec, s: f64, l: f64, r: f64, n_reps: u64, seed: u64) -> Result<OsssReport> {
    let (idx, alg) = algorithm_reps(model, s, l, r, n_reps, seed)?;
    let (_, inf) = influence_reps(model, l, r, n_reps, seed)?;
    osss_from_parts(model, s, l, r, n_reps, seed, &idx, &alg, &inf)
}

/// Several sphere radii sharing one set of influence replicates.
pub fn osss_check_many(model: &ModelSpec, s_list: &[f64], l: f64, r: f64, n_reps: u64, seed: u64) -> Result<Vec<OsssReport>> {
    let (_, inf) = influence_reps(model, l, r, n_reps, seed)?;
    s_list
        .iter()
        .map(|&s| {
            let (idx, alg) = algorithm_reps(model, s, l, r, n_reps, seed)?;
            osss_from_parts(model, s, l, r, n_reps, seed, &idx, &alg, &inf)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn osss_from_parts(
    model: &ModelSpec,
    s: f64,
    l: f64,
    r: f64,
    n_reps: u64,
    seed: u64,
    idx: &CoordIndex,
    alg: &[AlgorithmRep],
    inf: &[InfluenceRep],
) -> Result<OsssReport> {
    let n = alg.len() as u64;
    let hits = alg.iter().filter(|a| a.f).count() as u64;
    let theta = Estimate::bernoulli(hits, n, seed, format!("theta r={r} lambda={}", model.lambda));
    let p = theta.mean;
    let nf = n.max(1) as f64;
    let var = p * (1.0 - p);
    // first-order delta method plus the second-order term that survives at p = 1/2
    let var_se = ((1.0 - 2.0 * p).powi(2) * var / nf + 2.0 * var * var / (nf * nf)).sqrt();
    let var_f = Estimate { mean: var, stderr: var_se, n, seed, meta: "var f".into() };

    let ys: Vec<f64> = alg
        .iter()
        .zip(inf)
        .map(|(a, i)| sorted_overlap(&a.revealed, &i.flips) as f64)
        .collect();
    let sum_delta_inf = Estimate::from_samples(&ys, seed, "sum delta inf");
    let violated = var_f.mean > sum_delta_inf.mean + 4.0 * var_f.stderr.hypot(sum_delta_inf.stderr);

    let rmap = revealment_map(idx, alg, s);
    let mut flips = vec![0u64; idx.len()];
    for rep in inf {
        for &k in &rep.flips {
            flips[k as usize] += 1;
        }
    }
    let ninf = inf.len().max(1) as f64;
    let coords = rmap
        .entries
        .iter()
        .zip(&flips)
        .filter(|(e, &c)| e.delta > 0.0 || c > 0)
        .map(|(e, &c)| CoordStat { coord: e.coord.clone(), delta: e.delta, inf: c as f64 / ninf })
        .collect();
    Ok(OsssReport {
        r,
        s,
        l,
        model: model.clone(),
        n_reps,
        seed,
        theta,
        var_f,
        sum_delta_inf,
        violated,
        coords,
        shell_bound_violations: rmap.bound_violations,
    })
}

fn sorted_overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Lattice points whose box lies within `reach` of the origin.
pub fn boxes_within(d: usize, reach: f64) -> Vec<LatticePoint> {
    let m = reach.ceil() as i64 + 1;
    geometry::lattice_cube(d, m).filter(|x| geometry::box_origin_range(x).0 <= reach).collect()
}

/// Per-replicate sum over `xs` of the inserted-ball pivotal fractions for `A = {0 <-> dB_r}`.
fn pivotal_samples(model: &ModelSpec, xs: &[LatticePoint], r: f64, n_reps: u64, k: u32, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(invalid("K", "must be >= 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be finite and > 0, got {r}")));
    }
    replicates(n_reps, seed, |rs| {
        let cfg = sample_config(model, r, rs)?;
        let index = ClusterIndex::build(&cfg);
        if index.connected_origin_to_sphere(r)? {
            return Ok(0.0);
        }
        let mut rng = rng::stream(rng::derive(rs, &[tag::INSERT]));
        let mut total = 0.0;
        let mut touched: Vec<usize> = Vec::new();
        for x in xs {
            let mut hits = 0u32;
            for _ in 0..k {
                let center: crate::geometry::Point =
                    x.iter().map(|&c| c as f64 + rng.random::<f64>() - 0.5).collect();
                let radius = model.law.sample(&mut rng);
                let probe = Ball { center, radius, coord: None };
                if !probe.meets_origin_ball(r) {
                    continue;
                }
                let mut merged = Component::of_ball(&probe);
                touched.clear();
                for (i, b) in cfg.balls.iter().enumerate() {
                    if geometry::balls_intersect(&b.center, b.radius, &probe.center, probe.radius) {
                        let l = index.label(i);
                        if !touched.contains(&l) {
                            touched.push(l);
                            merged.merge(&index.components()[l]);
                        }
                    }
                }
                if merged.covers_origin && merged.reach >= r {
                    hits += 1;
                }
            }
            total += hits as f64 / k as f64;
        }
        Ok(total)
    })
}

/// `E[Piv_{x,A}]` for `A = {0 <-> dB_r}` with `K` insertions per replicate.
pub fn estimate_pivotal(model: &ModelSpec, x: &[i64], r: f64, n_reps: u64, k: u32, seed: u64) -> Result<Estimate> {
    let xs = vec![x.iter().copied().collect::<LatticePoint>()];
    let ys = pivotal_samples(model, &xs, r, n_reps, k, seed)?;
    Ok(Estimate::from_samples(&ys, seed, format!("pivotal r={r} lambda={}", model.lambda)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RussoReport {
    pub r: f64,
    pub lambda0: f64,
    pub d_lambda: f64,
    pub finite_difference: Estimate,
    pub pivotal_sum: Estimate,
    pub boxes: usize,
    /// `|fd - piv|` in units of the combined standard error
    pub z: f64,
    pub agree: bool,
}

/// Compare the common-random-number central difference of `theta_r` at
/// `lambda0` with the pivotal integral summed over every box within reach.
pub fn russo_check(
    model: &ModelSpec,
    r: f64,
    lambda0: f64,
    d_lambda: f64,
    n_reps: u64,
    k: u32,
    seed: u64,
) -> Result<RussoReport> {
    if !(d_lambda > 0.0 && d_lambda < lambda0) {
        return Err(invalid("d_lambda", format!("must lie in (0, lambda0), got {d_lambda}")));
    }
    let hi = lambda0 + d_lambda;
    let lo = lambda0 - d_lambda;
    let passages = passage_intensities(model, hi, Query::Origin { r }, n_reps, rng::derive(seed, &[1]))?;
    let ds: Vec<f64> = passages
        .iter()
        .map(|t| if t.is_some_and(|t| t > lo && t <= hi) { 1.0 / (2.0 * d_lambda) } else { 0.0 })
        .collect();
    let finite_difference = Estimate::from_samples(&ds, seed, format!("fd theta' r={r} lambda={lambda0}"));
    let at = model.with_lambda(lambda0);
    let n_max = at.n_max(r)? as f64;
    let xs = boxes_within(model.d, r + n_max);
    let ys = pivotal_samples(&at, &xs, r, n_reps, k, rng::derive(seed, &[2]))?;
    let pivotal_sum = Estimate::from_samples(&ys, seed, format!("pivotal sum r={r} lambda={lambda0}"));
    let se = finite_difference.stderr.hypot(pivotal_sum.stderr);
    let diff = (finite_difference.mean - pivotal_sum.mean).abs();
    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(RussoReport { r, lambda0, d_lambda, finite_difference, pivotal_sum, boxes: xs.len(), z, agree: z <= 4.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radius_laws::RadiusLaw;

    fn dirac(lambda: f64) -> ModelSpec {
        ModelSpec::new(2, lambda, RadiusLaw::dirac(1.0).unwrap()).unwrap()
    }

    #[test]
    fn dense_numbering_round_trips() {
        let layout = CellLayout { model: dirac(0.3), l: 8.0, r: 4.0 };
        let idx = CoordIndex::new(&layout);
        for k in 0..idx.len() {
            assert_eq!(idx.dense(&idx.coord(k)), Some(k));
        }
        for k in 1..idx.len() {
            assert!(idx.coord(k - 1) < idx.coord(k));
        }
    }

    #[test]
    fn empty_model_reveals_sphere_neighbourhood() {
        let m = dirac(0.0);
        let cells = sample_cells(&m, 8.0, 4.0, 1).unwrap();
        let s = 2.0;
        let t = run_algorithm(&cells, s, 8.0, 4.0).unwrap();
        assert_eq!(t.revealed[0], CellCoord::Ghost);
        assert!(!t.f_value && t.halted_determined);
        let layout = cells.layout.clone().unwrap();
        let expect: Vec<CellCoord> = layout
            .coordinates()
            .into_iter()
            .filter(|c| match c {
                CellCoord::Cell { x, n } => geometry::box_sphere_dist(x, s) < *n as f64,
                _ => false,
            })
            .collect();
        assert_eq!(&t.revealed[1..], &expect[..]);
    }

    #[test]
    fn giant_ghost_ball_decides_immediately() {
        let m = dirac(0.3);
        let mut cells = sample_cells(&m, 8.0, 4.0, 5).unwrap();
        cells.balls.retain(|b| b.coord != Some(CellCoord::Ghost));
        cells.balls.insert(0, Ball { center: smallvec::smallvec![0.0, 0.0], radius: 20.0, coord: Some(CellCoord::Ghost) });
        let t = run_algorithm(&cells, 2.0, 8.0, 4.0).unwrap();
        assert!(t.f_value && t.halted_determined);
    }

    #[test]
    fn mismatched_layout_errors() {
        let cells = sample_cells(&dirac(0.3), 8.0, 4.0, 1).unwrap();
        assert!(matches!(run_algorithm(&cells, 1.0, 9.0, 4.0), Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn shell_offsets_small() {
        // n = 1 in d = 2: neighbours whose far corner is at least 1 away
        let ring = shell_offsets(2, 1);
        assert!(ring.iter().all(|o| lattice_norm(o) >= 1.0));
        assert!(ring.contains(&smallvec::smallvec![1, 0]));
        assert!(!ring.contains(&smallvec::smallvec![0, 0]));
        assert!(!ring.contains(&smallvec::smallvec![3, 0]));
    }

    #[test]
    fn zero_intensity_osss_is_trivial() {
        let rep = osss_check(&dirac(0.0), 2.0, 8.0, 4.0, 20, 3).unwrap();
        assert_eq!(rep.var_f.mean, 0.0);
        assert_eq!(rep.sum_delta_inf.mean, 0.0);
        assert!(!rep.violated);
    }

    #[test]
    fn russo_rejects_zero_step() {
        assert!(russo_check(&dirac(0.3), 4.0, 0.3, 0.0, 10, 2, 1).is_err());
    }
}

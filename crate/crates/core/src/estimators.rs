//! Monte Carlo estimators of connection probabilities and critical intensities.
//!
//! Replicate `j` under global seed `s` always uses the stream
//! `replicate_seed(s, j)`, and replicates are collected in index order, so
//! every estimate is a pure function of `(model, query, seed, n_reps)`
//! whatever the worker count.
//!
//! Intensity sweeps run on birth-marked configurations (see
//! [`sample_marked`]): each replicate is grown ball by ball in birth order and
//! the intensity at which the event first occurs is recorded. The empirical
//! law of these passage intensities is the whole coupled probability curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::coverage_prob;
use crate::connectivity::{intersecting_pairs, ClusterIndex, Component};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::sampler::{sample_config, sample_marked, MarkedConfig, ModelSpec};
use crate::stats::{wilson, Estimate, Tally};
use crate::union_find::UnionFind;

/// Bisection step cap.
pub const MAX_BISECTION_STEPS: usize = 30;
/// Width, in standard deviations, of the Wilson intervals that bound critical estimates.
pub const BRACKET_Z: f64 = 2.0;

/// Run `f` on replicates `0..n_reps` in parallel, returning results in index order.
pub fn replicates<T: Send>(n_reps: u64, seed: u64, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n_reps).into_par_iter().map(|j| f(rng::replicate_seed(seed, j))).collect()
}

/// A connection event about the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Query {
    /// `0 <-> dB_r`
    Origin { r: f64 },
    /// `B_inner <-> dB_outer`
    BallToSphere { inner: f64, outer: f64 },
}

impl Query {
    pub fn crossing(r: f64) -> Self {
        Query::BallToSphere { inner: r, outer: 2.0 * r }
    }

    /// Radius of the window that decides the event.
    pub fn window(&self) -> f64 {
        match *self {
            Query::Origin { r } => r,
            Query::BallToSphere { outer, .. } => outer,
        }
    }

    pub fn holds(&self, index: &ClusterIndex) -> Result<bool> {
        match *self {
            Query::Origin { r } => index.connected_origin_to_sphere(r),
            Query::BallToSphere { inner, outer } => index.connected_ball_to_sphere(inner, outer),
        }
    }

    fn holds_for(&self, c: &Component) -> bool {
        match *self {
            Query::Origin { r } => c.covers_origin && c.reach >= r,
            Query::BallToSphere { inner, outer } => c.reaches_sphere(inner, outer),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Query::Origin { r } if !(r > 0.0 && r.is_finite()) => Err(invalid("r", format!("must be > 0, got {r}"))),
            Query::BallToSphere { inner, outer } if !(inner >= 0.0 && inner < outer && outer.is_finite()) => {
                Err(invalid("inner", format!("need 0 <= inner < outer, got {inner}, {outer}")))
            }
            _ => Ok(()),
        }
    }

    fn label(&self) -> String {
        match *self {
            Query::Origin { r } => format!("origin-to-sphere r={r}"),
            Query::BallToSphere { inner, outer } => format!("ball-to-sphere inner={inner} outer={outer}"),
        }
    }
}

/// Bernoulli estimate of a single event.
pub fn estimate_event(model: &ModelSpec, query: Query, n_reps: u64, seed: u64) -> Result<Estimate> {
    estimate_events(model, &[query], n_reps, seed).map(|mut v| v.remove(0))
}

/// Several events estimated on shared replicates sampled on the largest window.
pub fn estimate_events(model: &ModelSpec, queries: &[Query], n_reps: u64, seed: u64) -> Result<Vec<Estimate>> {
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    for q in queries {
        q.validate()?;
    }
    let window = queries.iter().map(Query::window).fold(0.0, f64::max);
    let hits = replicates(n_reps, seed, |s| {
        let cfg = sample_config(model, window, s)?;
        let idx = ClusterIndex::build(&cfg);
        queries.iter().map(|q| q.holds(&idx)).collect::<Result<Vec<bool>>>()
    })?;
    Ok(queries
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let t: Tally = hits.iter().map(|h| h[k]).collect();
            t.estimate(seed, format!("{} lambda={}", q.label(), model.lambda))
        })
        .collect())
}

pub fn estimate_theta(model: &ModelSpec, r: f64, n_reps: u64, seed: u64) -> Result<Estimate> {
    estimate_event(model, Query::Origin { r }, n_reps, seed)
}

/// `P[B_{alpha r} <-> dB_r]`.
pub fn estimate_theta_alpha(model: &ModelSpec, r: f64, alpha: f64, n_reps: u64, seed: u64) -> Result<Estimate> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1), got {alpha}")));
    }
    estimate_event(model, Query::BallToSphere { inner: alpha * r, outer: r }, n_reps, seed)
}

/// `P[B_r <-> dB_{2r}]`.
pub fn estimate_crossing(model: &ModelSpec, r: f64, n_reps: u64, seed: u64) -> Result<Estimate> {
    estimate_event(model, Query::crossing(r), n_reps, seed)
}

/// `s -> theta_s` on a grid, every point computed from the same replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaCurve {
    pub s_grid: Vec<f64>,
    pub values: Vec<Estimate>,
    /// all grid points come from one connectivity radius per replicate
    pub shared_replicates: bool,
    /// value at `s = 0` (coverage probability)
    pub theta_0: f64,
}

impl ThetaCurve {
    /// Curve from given means, e.g. synthetic inputs; standard errors are zero.
    pub fn from_means(s_grid: Vec<f64>, means: &[f64], theta_0: f64) -> Result<Self> {
        check_grid(&s_grid)?;
        if means.len() != s_grid.len() {
            return Err(invalid("means", "length differs from s_grid"));
        }
        let values = means
            .iter()
            .map(|&m| Estimate { mean: m, stderr: 0.0, n: 0, seed: 0, meta: "given".into() })
            .collect();
        Ok(Self { s_grid, values, shared_replicates: false, theta_0 })
    }

    pub fn means(&self) -> Vec<f64> {
        self.values.iter().map(|e| e.mean).collect()
    }
}

fn check_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() {
        return Err(invalid("s_grid", "must not be empty"));
    }
    if !(s_grid[0] > 0.0) || s_grid.windows(2).any(|w| !(w[0] < w[1])) || !s_grid.iter().all(|s| s.is_finite()) {
        return Err(invalid("s_grid", "must be finite, positive and strictly increasing"));
    }
    Ok(())
}

/// Connectivity radius of every replicate sampled on `B_window`.
pub fn connectivity_radii(model: &ModelSpec, window: f64, n_reps: u64, seed: u64) -> Result<Vec<Option<f64>>> {
    replicates(n_reps, seed, |s| {
        let cfg = sample_config(model, window, s)?;
        Ok(ClusterIndex::build(&cfg).connectivity_radius())
    })
}

/// `theta_s` for every `s` in the grid, sampled on the window `max(s_grid)`.
pub fn estimate_theta_curve(model: &ModelSpec, s_grid: &[f64], n_reps: u64, seed: u64) -> Result<ThetaCurve> {
    check_grid(s_grid)?;
    let window = *s_grid.last().unwrap();
    let radii = connectivity_radii(model, window, n_reps, seed)?;
    let values = s_grid
        .iter()
        .map(|&s| {
            let t: Tally = radii.iter().map(|r| r.is_some_and(|r| r >= s)).collect();
            t.estimate(seed, format!("theta s={s} lambda={}", model.lambda))
        })
        .collect();
    let theta_0 = coverage_prob(&model.law, model.lambda, model.d)?.value;
    Ok(ThetaCurve { s_grid: s_grid.to_vec(), values, shared_replicates: true, theta_0 })
}

/// `int_0^r theta_s ds` by the trapezoid rule through `(0, theta_0)` and the grid.
pub fn sigma_r(curve: &ThetaCurve, r: f64) -> Result<f64> {
    let last = *curve.s_grid.last().ok_or_else(|| invalid("curve", "empty"))?;
    if !(r >= 0.0 && r <= last) {
        return Err(invalid("r", format!("must lie in [0, {last}], got {r}")));
    }
    let mut total = 0.0;
    let (mut s0, mut t0) = (0.0, curve.theta_0);
    for (&s1, e) in curve.s_grid.iter().zip(&curve.values) {
        let t1 = e.mean;
        if s1 >= r {
            let tr = if s1 > s0 { t0 + (t1 - t0) * (r - s0) / (s1 - s0) } else { t1 };
            total += 0.5 * (t0 + tr) * (r - s0);
            return Ok(total);
        }
        total += 0.5 * (t0 + t1) * (s1 - s0);
        s0 = s1;
        t0 = t1;
    }
    Ok(total)
}

/// Intensity at which the event first holds as balls are added in birth
/// order, or `None` if it fails at `lambda_max`.
pub fn passage_intensity(marked: &MarkedConfig, query: Query) -> Option<f64> {
    let balls = &marked.config.balls;
    let n = balls.len();
    if n == 0 {
        return None;
    }
    // CSR lists of earlier-born neighbours
    let pairs = intersecting_pairs(balls, marked.config.d);
    let mut start = vec![0u32; n + 1];
    for &(_, j) in &pairs {
        start[j as usize + 1] += 1;
    }
    for k in 0..n {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut earlier = vec![0u32; pairs.len()];
    for &(i, j) in &pairs {
        earlier[fill[j as usize] as usize] = i;
        fill[j as usize] += 1;
    }
    let mut uf = UnionFind::new(n);
    let mut agg: Vec<Component> = Vec::with_capacity(n);
    for (k, b) in balls.iter().enumerate() {
        agg.push(Component::of_ball(b));
        for &i in &earlier[start[k] as usize..start[k + 1] as usize] {
            if let Some((root, absorbed)) = uf.union(k, i as usize) {
                let a = agg[absorbed];
                agg[root].merge(&a);
            }
        }
        let root = uf.find(k);
        if query.holds_for(&agg[root]) {
            return Some(marked.births[k]);
        }
    }
    None
}

/// Passage intensities of `n_reps` replicates sampled at `lambda_max`.
pub fn passage_intensities(
    model: &ModelSpec,
    lambda_max: f64,
    query: Query,
    n_reps: u64,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    query.validate()?;
    let top = model.with_lambda(lambda_max);
    top.validate()?;
    replicates(n_reps, seed, |s| Ok(passage_intensity(&sample_marked(&top, query.window(), s)?, query)))
}

/// Empirical coupled curve `lambda -> P[event at lambda]` from passage intensities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageCurve {
    /// finite passage intensities, sorted
    times: Vec<f64>,
    n: u64,
    pub lambda_max: f64,
}

impl PassageCurve {
    pub fn new(passages: &[Option<f64>], lambda_max: f64) -> Self {
        let mut times: Vec<f64> = passages.iter().flatten().copied().collect();
        times.sort_by(f64::total_cmp);
        Self { times, n: passages.len() as u64, lambda_max }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Replicates in which the event holds at `lambda`.
    pub fn count(&self, lambda: f64) -> u64 {
        self.times.partition_point(|&t| t <= lambda) as u64
    }

    pub fn probability(&self, lambda: f64) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.count(lambda) as f64 / self.n as f64
        }
    }

    pub fn estimate(&self, lambda: f64, seed: u64, meta: impl Into<String>) -> Estimate {
        Estimate::bernoulli(self.count(lambda), self.n, seed, meta)
    }

    /// Smallest intensity at which at least `k` replicates hold, capped at `lambda_max`.
    fn kth(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.times.get(k as usize - 1).copied().unwrap_or(self.lambda_max)
    }

    /// Bisection for `p(lambda) = target` on `[lo, hi]`, then the Wilson
    /// bracket: intensities below `lo` are significantly under the target,
    /// above `hi` significantly over it.
    fn solve(&self, target: f64, lo: f64, hi: f64) -> (f64, (f64, f64)) {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (a + b);
            if self.probability(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let hat = 0.5 * (a + b);
        let k_lo = (0..=self.n).find(|&k| wilson(k, self.n, BRACKET_Z).1 >= target).unwrap_or(self.n);
        let k_hi = (0..=self.n).find(|&k| wilson(k, self.n, BRACKET_Z).0 > target).unwrap_or(self.n);
        let b_lo = self.kth(k_lo).clamp(lo, hi).min(hat);
        let b_hi = self.kth(k_hi).clamp(lo, hi).max(hat);
        (hat, (b_lo, b_hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalMethod {
    /// `P[B_r <-> dB_{2r}] = 1/2` at the largest scale
    CrossingBisection,
    /// `theta_r = threshold` at a fixed large scale
    ThetaThreshold,
}

/// Probability-versus-intensity curve at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleCurve {
    pub r: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<Estimate>,
    /// intensity where this scale alone hits the target
    pub lambda_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub lambda_hat: f64,
    pub bracket: (f64, f64),
    pub method: CriticalMethod,
    pub target: f64,
    pub diagnostics: Vec<ScaleCurve>,
}

/// Points of the diagnostic curves.
const CURVE_POINTS: usize = 17;

fn check_bracket(bracket: (f64, f64)) -> Result<()> {
    let (lo, hi) = bracket;
    if !(lo >= 0.0 && hi.is_finite()) {
        return Err(invalid("bracket", format!("need finite 0 <= lo, hi, got ({lo}, {hi})")));
    }
    if !(lo < hi) {
        return Err(invalid("bracket", format!("degenerate bracket ({lo}, {hi})")));
    }
    Ok(())
}

fn scale_curve(curve: &PassageCurve, r: f64, target: f64, bracket: (f64, f64), seed: u64) -> ScaleCurve {
    let (lo, hi) = bracket;
    let lambdas: Vec<f64> = (0..CURVE_POINTS).map(|k| lo + (hi - lo) * k as f64 / (CURVE_POINTS - 1) as f64).collect();
    let values = lambdas.iter().map(|&l| curve.estimate(l, seed, format!("r={r} lambda={l}"))).collect();
    ScaleCurve { r, lambdas, values, lambda_hat: curve.solve(target, lo, hi).0 }
}

fn critical_search(
    model: &ModelSpec,
    queries: &[(f64, Query)],
    bracket: (f64, f64),
    n_reps: u64,
    seed: u64,
    target: f64,
    method: CriticalMethod,
) -> Result<CriticalEstimate> {
    check_bracket(bracket)?;
    if n_reps == 0 {
        return Err(invalid("n_reps", "must be >= 1"));
    }
    let (lo, hi) = bracket;
    let mut curves = Vec::with_capacity(queries.len());
    let mut diagnostics = Vec::with_capacity(queries.len());
    for (k, &(r, q)) in queries.iter().enumerate() {
        let passages = passage_intensities(model, hi, q, n_reps, rng::derive(seed, &[k as u64]))?;
        let curve = PassageCurve::new(&passages, hi);
        diagnostics.push(scale_curve(&curve, r, target, bracket, seed));
        curves.push(curve);
    }
    let main = curves.last().expect("at least one scale");
    let (p_lo, p_hi) = (main.probability(lo), main.probability(hi));
    let straddles = match method {
        CriticalMethod::CrossingBisection => p_lo < 0.1 && p_hi > 0.9,
        CriticalMethod::ThetaThreshold => p_lo < target && p_hi > target,
    };
    if !straddles {
        return Err(Error::BracketNotStraddling { lo, hi, p_lo, p_hi });
    }
    let (lambda_hat, bracket) = main.solve(target, lo, hi);
    Ok(CriticalEstimate { lambda_hat, bracket, method, target, diagnostics })
}

/// Intensity at which `P[B_r <-> dB_{2r}] = 1/2` at the largest `r` of `r_list`.
/// Diagnostics hold the coupled crossing curves of every scale. The law,
/// dimension and truncation budget are taken from `model`; its intensity is
/// ignored.
pub fn find_lambda_tilde(
    model: &ModelSpec,
    r_list: &[f64],
    bracket: (f64, f64),
    n_reps: u64,
    seed: u64,
) -> Result<CriticalEstimate> {
    if r_list.is_empty() {
        return Err(invalid("r_list", "must not be empty"));
    }
    let mut rs = r_list.to_vec();
    rs.sort_by(f64::total_cmp);
    let queries: Vec<(f64, Query)> = rs.iter().map(|&r| (r, Query::crossing(r))).collect();
    critical_search(model, &queries, bracket, n_reps, seed, 0.5, CriticalMethod::CrossingBisection)
}

/// Intensity at which `theta_r` equals `threshold`, a finite-scale proxy for
/// the onset of `theta > 0`.
pub fn find_lambda_c(
    model: &ModelSpec,
    r: f64,
    bracket: (f64, f64),
    n_reps: u64,
    seed: u64,
    threshold: f64,
) -> Result<CriticalEstimate> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid("threshold", format!("must lie in (0, 1), got {threshold}")));
    }
    critical_search(model, &[(r, Query::Origin { r })], bracket, n_reps, seed, threshold, CriticalMethod::ThetaThreshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radius_laws::RadiusLaw;

    fn dirac(lambda: f64) -> ModelSpec {
        ModelSpec::new(2, lambda, RadiusLaw::dirac(1.0).unwrap()).unwrap()
    }

    #[test]
    fn sigma_synthetic() {
        let grid: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let ones = ThetaCurve::from_means(grid.clone(), &[1.0; 10], 1.0).unwrap();
        assert!((sigma_r(&ones, 7.5).unwrap() - 7.5).abs() < 1e-12);
        let zeros = ThetaCurve::from_means(grid.clone(), &[0.0; 10], 0.0).unwrap();
        assert_eq!(sigma_r(&zeros, 10.0).unwrap(), 0.0);
        let lin: Vec<f64> = grid.iter().map(|s| 1.0 - s / 10.0).collect();
        let c = ThetaCurve::from_means(grid, &lin, 1.0).unwrap();
        assert!((sigma_r(&c, 10.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(sigma_r(&c, 11.0).is_err());
    }

    #[test]
    fn zero_intensity_curve() {
        let c = estimate_theta_curve(&dirac(0.0), &[1.0, 2.0, 4.0], 50, 1).unwrap();
        assert!(c.values.iter().all(|e| e.mean == 0.0));
        assert_eq!(estimate_crossing(&dirac(0.0), 3.0, 20, 1).unwrap().mean, 0.0);
        assert_eq!(estimate_theta_alpha(&dirac(0.0), 3.0, 0.2, 20, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn passage_matches_direct_evaluation() {
        let top = dirac(0.6);
        for seed in 0..30 {
            let mc = sample_marked(&top, 6.0, seed).unwrap();
            let q = Query::crossing(3.0);
            let t = passage_intensity(&mc, q);
            for lam in [0.2, 0.3, 0.35, 0.4, 0.5, 0.6] {
                let direct = q.holds(&ClusterIndex::build(&mc.at(lam))).unwrap();
                assert_eq!(direct, t.is_some_and(|t| t <= lam), "seed {seed} lambda {lam}");
            }
        }
    }

    #[test]
    fn bracket_errors() {
        let m = dirac(0.0);
        assert!(find_lambda_tilde(&m, &[4.0], (0.3, 0.3), 20, 1).is_err());
        assert!(find_lambda_c(&m, 4.0, (0.1, 0.8), 20, 1, 1.0).is_err());
        assert!(matches!(
            find_lambda_tilde(&m, &[4.0], (0.0, 0.01), 50, 1),
            Err(Error::BracketNotStraddling { .. })
        ));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let m = dirac(0.4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_theta_curve(&m, &[1.0, 3.0, 5.0], 200, 9).unwrap());
        let b = four.install(|| estimate_theta_curve(&m, &[1.0, 3.0, 5.0], 200, 9).unwrap());
        assert_eq!(a, b);
    }
}

//! Poisson-Boolean configurations restricted to a window.
//!
//! Radii are stratified into bands `[n-1, n)`; per band the balls that can
//! reach the window `B_w` are drawn by thinning a Poisson cloud on
//! `B_{w+n}`. Above [`UNIT_BAND_LIMIT`] the integer bands are merged into
//! dyadic groups `[2^k, 2^{k+1})`, which keeps the cost logarithmic in the
//! truncation radius for heavy tails while leaving the law unchanged.
//!
//! [`sample_cells`] instead draws each product coordinate `(x, n)` (unit box
//! `S^x` times radius band) from its own stream, so a single coordinate can be
//! resampled without touching the rest.

use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytic::{truncation_intensity, GeometryConstants};
use crate::error::{invalid, Error, Result};
use crate::geometry::{self, LatticePoint, Point};
use crate::radius_laws::RadiusLaw;
use crate::rng::{self, tag, Stream};

/// Integer radius bands are used individually up to this radius.
pub const UNIT_BAND_LIMIT: u64 = 64;

pub const DEFAULT_EPS_TRUNC: f64 = 1e-6;

fn default_eps() -> f64 {
    DEFAULT_EPS_TRUNC
}

/// Dimension, intensity, radius law and truncation budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: usize,
    pub lambda: f64,
    pub law: RadiusLaw,
    #[serde(default = "default_eps")]
    pub eps_trunc: f64,
}

impl ModelSpec {
    pub fn new(d: usize, lambda: f64, law: RadiusLaw) -> Result<Self> {
        let m = Self { d, lambda, law, eps_trunc: DEFAULT_EPS_TRUNC };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d", "dimension must be >= 1"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(invalid("eps_trunc", format!("must lie in (0, 1), got {}", self.eps_trunc)));
        }
        self.law.validate()
    }

    /// Same model at another intensity.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    /// Least integer `N >= 1` such that the expected number of balls with
    /// radius `>= N` meeting `B_window` is at most `eps_trunc`.
    pub fn n_max(&self, window: f64) -> Result<u64> {
        if self.lambda == 0.0 {
            return Ok(1);
        }
        if !self.law.moment_is_finite(self.d as f64) {
            return Err(Error::HallSaturation);
        }
        let fits = |n: u64| -> Result<bool> {
            let t = truncation_intensity(&self.law, self.lambda, self.d, window, n as f64)?;
            Ok(t.value <= self.eps_trunc)
        };
        let mut hi = match self.law.support_max() {
            Some(m) => m.floor() as u64 + 1,
            None => {
                let mut n = 1u64;
                while !fits(n)? {
                    n = n.checked_mul(2).ok_or_else(|| invalid("eps_trunc", "truncation radius overflow"))?;
                }
                n
            }
        };
        let mut lo = 0u64;
        // invariant: fits(hi), !fits(lo) (lo = 0 is a sentinel)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if fits(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.max(1))
    }
}

/// Product-space coordinate: a unit box times a radius band, or the
/// aggregate `g` of everything outside the finite index set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "CoordRepr", try_from = "CoordRepr")]
pub enum CellCoord {
    Ghost,
    Cell { x: LatticePoint, n: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoordRepr {
    Tag(String),
    Cell { x: Vec<i64>, n: u32 },
}

impl From<CellCoord> for CoordRepr {
    fn from(c: CellCoord) -> Self {
        match c {
            CellCoord::Ghost => CoordRepr::Tag("g".into()),
            CellCoord::Cell { x, n } => CoordRepr::Cell { x: x.to_vec(), n },
        }
    }
}

impl TryFrom<CoordRepr> for CellCoord {
    type Error = String;
    fn try_from(r: CoordRepr) -> std::result::Result<Self, String> {
        match r {
            CoordRepr::Tag(t) if t == "g" => Ok(CellCoord::Ghost),
            CoordRepr::Tag(t) => Err(format!("unknown coordinate tag {t:?}")),
            CoordRepr::Cell { x, n } => Ok(CellCoord::Cell { x: x.into_iter().collect(), n }),
        }
    }
}

impl Ord for CellCoord {
    /// `g` first, then ascending band, then lexicographic box.
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CellCoord::Ghost, CellCoord::Ghost) => Ordering::Equal,
            (CellCoord::Ghost, _) => Ordering::Less,
            (_, CellCoord::Ghost) => Ordering::Greater,
            (CellCoord::Cell { x: xa, n: na }, CellCoord::Cell { x: xb, n: nb }) => {
                na.cmp(nb).then_with(|| xa.cmp(xb))
            }
        }
    }
}

impl PartialOrd for CellCoord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellCoord::Ghost => write!(f, "g"),
            CellCoord::Cell { x, n } => {
                write!(f, "(")?;
                for (i, v) in x.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ";{n})")
            }
        }
    }
}

impl CellCoord {
    fn stream_key(&self, seed: u64) -> u64 {
        match self {
            CellCoord::Ghost => rng::derive(seed, &[tag::GHOST]),
            CellCoord::Cell { x, n } => {
                let mut path: Vec<u64> = Vec::with_capacity(x.len() + 2);
                path.push(tag::CELL);
                path.push(*n as u64);
                path.extend(x.iter().map(|&v| v as u64));
                rng::derive(seed, &path)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<CellCoord>,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Self { center: center.iter().copied().collect(), radius, coord: None }
    }

    /// `B_R^z` meets the closed ball `B_r` about the origin.
    pub fn meets_origin_ball(&self, r: f64) -> bool {
        let s = r + self.radius;
        geometry::norm_sq(&self.center) <= s * s
    }
}

/// Parameters of a cell-stratified configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub model: ModelSpec,
    /// index-set radius `L`
    pub l: f64,
    /// query radius `r`
    pub r: f64,
}

impl CellLayout {
    pub fn max_band(&self) -> u32 {
        self.l.floor() as u32
    }

    pub fn contains(&self, coord: &CellCoord) -> bool {
        match coord {
            CellCoord::Ghost => true,
            CellCoord::Cell { x, n } => {
                x.len() == self.model.d && *n >= 1 && *n <= self.max_band() && lattice_norm(x) <= self.l
            }
        }
    }

    /// Every coordinate of `I_L` in canonical order (without `g`).
    pub fn coordinates(&self) -> Vec<CellCoord> {
        let m = self.l.floor() as i64;
        let boxes: Vec<LatticePoint> =
            geometry::lattice_cube(self.model.d, m).filter(|x| lattice_norm(x) <= self.l).collect();
        let mut out = Vec::with_capacity(boxes.len() * self.max_band() as usize);
        for n in 1..=self.max_band() {
            out.extend(boxes.iter().map(|x| CellCoord::Cell { x: x.clone(), n }));
        }
        out
    }
}

pub(crate) fn lattice_norm(x: &[i64]) -> f64 {
    x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

/// One sampled realization restricted to what a window query can see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallConfig {
    pub d: usize,
    pub balls: Vec<Ball>,
    pub window_radius: f64,
    /// radius truncation actually applied: all radii are `< n_max`
    pub n_max: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<CellLayout>,
}

impl BallConfig {
    pub fn empty(d: usize, window_radius: f64) -> Self {
        Self { d, balls: Vec::new(), window_radius, n_max: 0.0, seed: 0, layout: None }
    }

    pub fn from_balls(d: usize, window_radius: f64, balls: Vec<Ball>) -> Self {
        Self { d, balls, window_radius, n_max: f64::INFINITY, seed: 0, layout: None }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Balls with the given coordinate (contiguous, configs from [`sample_cells`] are sorted).
    pub fn coord_range(&self, coord: &CellCoord) -> std::ops::Range<usize> {
        let key = |b: &Ball| b.coord.as_ref().map_or(Ordering::Less, |c| c.cmp(coord));
        let lo = self.balls.partition_point(|b| key(b) == Ordering::Less);
        let hi = lo + self.balls[lo..].partition_point(|b| key(b) == Ordering::Equal);
        lo..hi
    }

    /// One JSON record per ball.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for b in &self.balls {
            serde_json::to_writer(&mut w, b)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<Ball>> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Ok(out)
    }
}

/// Radius groups `[lo, hi)` covering `[0, n_max)`.
pub fn radius_groups(n_max: u64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let unit = n_max.min(UNIT_BAND_LIMIT);
    for n in 1..=unit {
        out.push(((n - 1) as f64, n as f64));
    }
    let mut lo = unit;
    while lo < n_max {
        let hi = (2 * lo).min(n_max);
        out.push((lo as f64, hi as f64));
        lo = hi;
    }
    out
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Uniform point in the ball of radius `radius` about the origin.
pub(crate) fn uniform_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Point {
    if d <= 3 {
        loop {
            let p: Point = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if geometry::norm_sq(&p) <= 1.0 {
                return p.into_iter().map(|v| v * radius).collect();
            }
        }
    }
    let g: Point = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = geometry::norm(&g);
    let scale = radius * rng.random::<f64>().powf(1.0 / d as f64) / n;
    g.into_iter().map(|v| v * scale).collect()
}

/// Draw every ball that meets `B_window`, with radius below `n_max`.
fn draw_window<R: Rng + ?Sized>(
    model: &ModelSpec,
    window: f64,
    n_max: u64,
    rng: &mut R,
    mut keep: impl FnMut(&Point, f64) -> bool,
    out: &mut Vec<Ball>,
) {
    let v = GeometryConstants::new(model.d).ball_volume;
    for (lo, hi) in radius_groups(n_max) {
        let mass = model.law.band_mass(lo, hi);
        if mass <= 0.0 {
            continue;
        }
        let reach = window + hi;
        let count = poisson(model.lambda * v * reach.powi(model.d as i32) * mass, rng);
        for _ in 0..count {
            let center = uniform_in_ball(model.d, reach, rng);
            let radius = model.law.sample_in_band(lo, hi, rng);
            let s = window + radius;
            if geometry::norm_sq(&center) <= s * s && keep(&center, radius) {
                out.push(Ball { center, radius, coord: None });
            }
        }
    }
}

/// All balls of a Poisson realization meeting `B_window`, up to the truncation radius.
pub fn sample_config(model: &ModelSpec, window_radius: f64, seed: u64) -> Result<BallConfig> {
    model.validate()?;
    if !(window_radius.is_finite() && window_radius > 0.0) {
        return Err(invalid("window_radius", format!("must be finite and > 0, got {window_radius}")));
    }
    let n_max = model.n_max(window_radius)?;
    let mut balls = Vec::new();
    if model.lambda > 0.0 {
        let mut rng = rng::stream(rng::derive(seed, &[tag::WINDOW]));
        draw_window(model, window_radius, n_max, &mut rng, |_, _| true, &mut balls);
    }
    Ok(BallConfig { d: model.d, balls, window_radius, n_max: n_max as f64, seed, layout: None })
}

/// A configuration sampled at `lambda_max` whose balls carry birth marks
/// uniform on `[0, lambda_max]`. Keeping the balls born by `lambda` gives a
/// configuration at intensity `lambda`, and the views are nested in `lambda`.
#[derive(Clone, Debug)]
pub struct MarkedConfig {
    /// balls sorted by birth
    pub config: BallConfig,
    pub births: Vec<f64>,
    pub lambda_max: f64,
}

impl MarkedConfig {
    /// Number of balls present at intensity `lambda`.
    pub fn count_at(&self, lambda: f64) -> usize {
        self.births.partition_point(|&b| b <= lambda)
    }

    /// The configuration at intensity `lambda <= lambda_max`.
    pub fn at(&self, lambda: f64) -> BallConfig {
        let k = self.count_at(lambda);
        BallConfig { balls: self.config.balls[..k].to_vec(), ..self.config.clone() }
    }
}

pub fn sample_marked(model: &ModelSpec, window_radius: f64, seed: u64) -> Result<MarkedConfig> {
    let mut config = sample_config(model, window_radius, rng::derive(seed, &[tag::MARKED]))?;
    config.seed = seed;
    let mut rng = rng::stream(rng::derive(seed, &[tag::MARKED, 1]));
    let mut marked: Vec<(f64, Ball)> =
        config.balls.drain(..).map(|b| (rng.random::<f64>() * model.lambda, b)).collect();
    marked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let births = marked.iter().map(|m| m.0).collect();
    config.balls = marked.into_iter().map(|m| m.1).collect();
    Ok(MarkedConfig { config, births, lambda_max: model.lambda })
}

fn draw_coord(layout: &CellLayout, coord: &CellCoord, seed: u64) -> Result<Vec<Ball>> {
    let model = &layout.model;
    let mut rng: Stream = rng::stream(coord.stream_key(seed));
    let mut out = Vec::new();
    if model.lambda == 0.0 {
        return Ok(out);
    }
    match coord {
        CellCoord::Cell { x, n } => {
            let (lo, hi) = ((*n - 1) as f64, *n as f64);
            let mass = model.law.band_mass(lo, hi);
            let count = poisson(model.lambda * mass, &mut rng);
            for _ in 0..count {
                let center: Point = x.iter().map(|&c| c as f64 + rng.random::<f64>() - 0.5).collect();
                let radius = model.law.sample_in_band(lo, hi, &mut rng);
                out.push(Ball { center, radius, coord: Some(coord.clone()) });
            }
        }
        CellCoord::Ghost => {
            let n_max = model.n_max(layout.r)?;
            let max_band = layout.max_band();
            draw_window(
                model,
                layout.r,
                n_max,
                &mut rng,
                |c, radius| {
                    let band = radius.floor() as u64 + 1;
                    let x = geometry::cell_of(c);
                    !(band <= max_band as u64 && lattice_norm(&x) <= layout.l)
                },
                &mut out,
            );
            for b in &mut out {
                b.coord = Some(CellCoord::Ghost);
            }
        }
    }
    Ok(out)
}

/// Cell-stratified configuration: every coordinate `(x, n)` with `|x| <= L`,
/// `1 <= n <= L` holds all its balls; balls of other coordinates that meet
/// `B_r` are aggregated under `g`. Balls are sorted by coordinate.
///
/// Cell balls are kept whole, so they need not meet `B_r`; `window_radius`
/// is `r` and only `g` balls obey the window invariant.
pub fn sample_cells(model: &ModelSpec, l: f64, r: f64, seed: u64) -> Result<BallConfig> {
    model.validate()?;
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid("r", format!("must be finite and > 0, got {r}")));
    }
    if !(l.is_finite() && l >= 2.0 * r) {
        return Err(invalid("L", format!("must satisfy L >= 2r, got L={l}, r={r}")));
    }
    let layout = CellLayout { model: model.clone(), l, r };
    let n_max = if model.lambda == 0.0 { 1 } else { model.n_max(r)? };
    let mut balls = draw_coord(&layout, &CellCoord::Ghost, seed)?;
    let band_mass: Vec<f64> = (1..=layout.max_band())
        .map(|n| model.law.band_mass((n - 1) as f64, n as f64))
        .collect();
    for coord in layout.coordinates() {
        let CellCoord::Cell { n, .. } = &coord else { unreachable!() };
        if band_mass[*n as usize - 1] > 0.0 {
            balls.extend(draw_coord(&layout, &coord, seed)?);
        }
    }
    Ok(BallConfig { d: model.d, balls, window_radius: r, n_max: n_max as f64, seed, layout: Some(layout) })
}

/// Replace the balls of one coordinate by the draw of that coordinate under `seed`.
pub fn resample_cell(config: &BallConfig, coord: &CellCoord, seed: u64) -> Result<BallConfig> {
    let layout = config.layout.as_ref().ok_or(Error::NoCellLayout)?;
    if !layout.contains(coord) {
        return Err(Error::UnknownCoordinate(coord.clone()));
    }
    let fresh = draw_coord(layout, coord, seed)?;
    let range = config.coord_range(coord);
    let mut balls = Vec::with_capacity(config.balls.len() - range.len() + fresh.len());
    balls.extend_from_slice(&config.balls[..range.start]);
    balls.extend(fresh);
    balls.extend_from_slice(&config.balls[range.end..]);
    Ok(BallConfig { balls, ..config.clone() })
}

/// Keep exactly the balls contained in `B_rho^center`: `|z - center| + R <= rho`.
pub fn restrict_to(config: &BallConfig, center: &[f64], rho: f64) -> BallConfig {
    let balls = config
        .balls
        .iter()
        .filter(|b| {
            let room = rho - b.radius;
            room >= 0.0 && geometry::dist_sq(&b.center, center) <= room * room
        })
        .cloned()
        .collect();
    BallConfig { balls, ..config.clone() }
}

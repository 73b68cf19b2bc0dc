//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite pieces and on
//! a half-line tail mapped through `u = 1/x`.
//!
//! Integrands here are piecewise smooth with kinks at known positions, so
//! callers pass those positions as breakpoints; the adaptive loop then only
//! has to resolve smooth pieces and the singular end of the inverted tail.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_41,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: 1e-14, max_intervals: 4000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOutcome {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Map {
    /// integrate `f(x)` on `[a, b]`
    Direct,
    /// integrate `f(1/u) / u^2` on `[a, b]` (in `u`)
    Inverted,
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval<F: Fn(f64) -> f64>(f: &F, map: Map, t: f64) -> f64 {
    match map {
        Map::Direct => f(t),
        Map::Inverted => {
            let x = 1.0 / t;
            if x.is_finite() {
                f(x) / (t * t)
            } else {
                0.0
            }
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, map, center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, slot) in fv.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = eval(f, map, center - dx);
        let f2 = eval(f, map, center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
        *slot = (f1, f2);
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, seeds: Vec<(f64, f64, Map)>, tol: Tolerance) -> QuadOutcome {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (a, b, map) in seeds {
        if b <= a {
            continue;
        }
        let (value, error) = gk15(f, map, a, b);
        total += value;
        total_err += error;
        heap.push(Piece { a, b, map, value, error });
    }
    let mut intervals = heap.len();
    loop {
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            return QuadOutcome { value: total, error: total_err, converged: true, intervals };
        }
        if intervals >= tol.max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in f64
            heap.push(Piece { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gk15(f, worst.map, worst.a, mid);
        let (v2, e2) = gk15(f, worst.map, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, map: worst.map, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, map: worst.map, value: v2, error: e2 });
        intervals += 1;
    }
    // recompute sums to shed accumulated cancellation before reporting
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    QuadOutcome { value, error, converged: false, intervals }
}

fn pieces(points: &[f64]) -> Vec<(f64, f64, Map)> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| (w[0], w[1], Map::Direct)).collect()
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadOutcome {
    adapt(&f, vec![(a, b, Map::Direct)], tol)
}

/// Integrate `f` over `[min(points), max(points)]`, splitting at every point.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> QuadOutcome {
    adapt(&f, pieces(points), tol)
}

/// Integrate `f` over `[min(points), inf)`. Pieces between consecutive points
/// are integrated directly; `[max(points), inf)` is mapped by `u = 1/x`, so
/// `max(points)` must be positive.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> QuadOutcome {
    let mut seeds = pieces(points);
    let last = seeds
        .last()
        .map(|p| p.1)
        .or_else(|| points.iter().copied().find(|p| p.is_finite()))
        .expect("at least one finite point");
    assert!(last > 0.0, "tail start must be positive for the inverted map");
    // split the inverted piece once so the singular end at u=0 is isolated
    let u_end = 1.0 / last;
    seeds.push((0.0, 0.5 * u_end, Map::Inverted));
    seeds.push((0.5 * u_end, u_end, Map::Inverted));
    adapt(&f, seeds, tol)
}

//! Harnesses that turn inequalities with unknown constants into checkable
//! statements: implied constants, decay fits, ratio trends and slopes.

use serde::{Deserialize, Serialize};

use crate::analytic::{phi, pi_delta};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    estimate_events, estimate_theta_curve, passage_intensities, sigma_r, PassageCurve, Query, ThetaCurve,
};
use crate::rng;
use crate::sampler::ModelSpec;
use crate::stats::{linear_fit, Estimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormReport {
    pub r: f64,
    pub alpha: f64,
    pub delta: f64,
    pub lambda: f64,
    pub theta_alpha_r: Estimate,
    pub pi_delta_r: f64,
    /// the `(u, v)` grid, `u + v = 1 - alpha`, both `>= delta`
    pub u_grid: Vec<f64>,
    pub theta_alpha_u: Vec<Estimate>,
    pub max_product: f64,
    /// `(theta - pi) / max_product` when the numerator is positive
    pub implied_constant: Option<f64>,
    /// the same with the entropic factor `(delta^2 alpha)^d` restored
    pub implied_c1: Option<f64>,
}

/// Evaluate both sides of the renormalization inequality at one scale and
/// report the smallest constant that would make it hold.
pub fn renorm_report(
    model: &ModelSpec,
    r: f64,
    alpha: f64,
    delta: f64,
    u_grid_size: usize,
    n_reps: u64,
    seed: u64,
) -> Result<RenormReport> {
    if !(alpha > 0.0 && alpha <= delta && delta < 0.25) {
        return Err(invalid("alpha", format!("need 0 < alpha <= delta < 1/4, got alpha={alpha}, delta={delta}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be finite and > 0, got {r}")));
    }
    if u_grid_size < 2 {
        return Err(invalid("u_grid_size", "need at least 2 points"));
    }
    let span = 1.0 - alpha - 2.0 * delta;
    let u_grid: Vec<f64> =
        (0..u_grid_size).map(|k| delta + span * k as f64 / (u_grid_size - 1) as f64).collect();
    let mut queries: Vec<Query> =
        u_grid.iter().map(|&u| Query::BallToSphere { inner: alpha * u * r, outer: u * r }).collect();
    queries.push(Query::BallToSphere { inner: alpha * r, outer: r });
    let mut ests = estimate_events(model, &queries, n_reps, seed)?;
    let theta_alpha_r = ests.pop().expect("query list is non-empty");
    let g = u_grid.len();
    // u_k + u_{g-1-k} = 1 - alpha by symmetry of the grid
    let max_product = (0..g).map(|k| ests[k].mean * ests[g - 1 - k].mean).fold(0.0, f64::max);
    let pi = pi_delta(&model.law, model.lambda, model.d, r, delta)?.value;
    let excess = theta_alpha_r.mean - pi;
    let implied_constant = (excess > 0.0).then(|| excess / max_product);
    let entropic = (delta * delta * alpha).powi(model.d as i32);
    Ok(RenormReport {
        r,
        alpha,
        delta,
        lambda: model.lambda,
        theta_alpha_r,
        pi_delta_r: pi,
        u_grid,
        theta_alpha_u: ests,
        max_product,
        implied_constant,
        implied_c1: implied_constant.map(|c| c * entropic),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionPoint {
    pub s: f64,
    pub value: f64,
    pub stderr: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailReport {
    pub alpha: f64,
    pub eta_exp: f64,
    pub epsilon: f64,
    pub r0: f64,
    pub r: f64,
    pub pi_alpha_r: f64,
    /// `theta^alpha_s <= eps (pi^alpha_r)^{(s/r)^eta}` on `[r0, r0/alpha]`
    pub f1: Vec<ConditionPoint>,
    pub f1_holds: bool,
    /// `pi^alpha_s <= eps (pi^alpha_r)^{(s/r)^eta}` on `[r0, (1-alpha) r]`
    pub f2: Vec<ConditionPoint>,
    pub f2_holds: bool,
    pub theta_alpha_r: Estimate,
    pub conclusion_bound: f64,
    /// `theta^alpha_r <= (1 + eps) pi^alpha_r`, not rejected at 4 standard errors
    pub conclusion_holds: bool,
    /// `(conclusion_bound - theta) / stderr`
    pub conclusion_margin_sigma: f64,
}

const CONDITION_POINTS: usize = 9;

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Evaluate both hypotheses of the heavy-tail lemma and its conclusion.
/// Hypotheses hold when the point estimate is at most the bound; the
/// conclusion holds unless it is exceeded by more than 4 standard errors.
#[allow(clippy::too_many_arguments)]
pub fn verify_heavy_tail_lemma(
    model: &ModelSpec,
    alpha: f64,
    eta_exp: f64,
    epsilon: f64,
    r0: f64,
    r: f64,
    n_reps: u64,
    seed: u64,
) -> Result<HeavyTailReport> {
    if !(alpha > 0.0 && alpha < 0.25) {
        return Err(Error::Precondition(format!("alpha must lie in (0, 1/4), got {alpha}")));
    }
    if !(eta_exp > 0.0 && eta_exp < 1.0) {
        return Err(Error::Precondition(format!("eta must lie in (0, 1), got {eta_exp}")));
    }
    if alpha.powf(eta_exp) + (1.0 - alpha).powf(eta_exp) < 1.0 {
        return Err(Error::Precondition(format!(
            "alpha^eta + (1 - alpha)^eta >= 1 fails for alpha={alpha}, eta={eta_exp}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(r0 > 0.0 && r0 <= alpha * r) {
        return Err(Error::Precondition(format!("r0 <= alpha r fails: r0={r0}, alpha r={}", alpha * r)));
    }
    let (law, lambda, d) = (&model.law, model.lambda, model.d);
    let pi_r = pi_delta(law, lambda, d, r, alpha)?.value;
    let bound = |s: f64| epsilon * pi_r.powf((s / r).powf(eta_exp));

    let f1_s = grid(r0, r0 / alpha, CONDITION_POINTS);
    let mut queries: Vec<Query> =
        f1_s.iter().map(|&s| Query::BallToSphere { inner: alpha * s, outer: s }).collect();
    queries.push(Query::BallToSphere { inner: alpha * r, outer: r });
    let mut ests = estimate_events(model, &queries, n_reps, seed)?;
    let theta_alpha_r = ests.pop().expect("non-empty");
    let f1: Vec<ConditionPoint> = f1_s
        .iter()
        .zip(&ests)
        .map(|(&s, e)| ConditionPoint { s, value: e.mean, stderr: e.stderr, bound: bound(s) })
        .collect();
    let f1_holds = f1.iter().all(|p| p.value <= p.bound);

    let f2 = grid(r0, (1.0 - alpha) * r, CONDITION_POINTS)
        .into_iter()
        .map(|s| Ok(ConditionPoint { s, value: pi_delta(law, lambda, d, s, alpha)?.value, stderr: 0.0, bound: bound(s) }))
        .collect::<Result<Vec<_>>>()?;
    let f2_holds = f2.iter().all(|p| p.value <= p.bound);

    let conclusion_bound = (1.0 + epsilon) * pi_r;
    let gap = conclusion_bound - theta_alpha_r.mean;
    let conclusion_margin_sigma = if theta_alpha_r.stderr > 0.0 {
        gap / theta_alpha_r.stderr
    } else if gap >= 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    Ok(HeavyTailReport {
        alpha,
        eta_exp,
        epsilon,
        r0,
        r,
        pi_alpha_r: pi_r,
        f1,
        f1_holds,
        f2,
        f2_holds,
        conclusion_holds: conclusion_margin_sigma >= -4.0,
        theta_alpha_r,
        conclusion_bound,
        conclusion_margin_sigma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `c` in `theta_s ~ A exp(-c s)`
    pub rate: f64,
    pub log_prefactor: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `ln theta_s` against `s` on `[s_min, max]`.
pub fn fit_exponential_decay(curve: &ThetaCurve, s_min: f64) -> Result<DecayFit> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&s, e) in curve.s_grid.iter().zip(&curve.values) {
        if s < s_min {
            continue;
        }
        if !(e.mean > 0.0) {
            return Err(Error::Degenerate(format!(
                "theta at s={s} is {}; trim the fit range to positive values",
                e.mean
            )));
        }
        xs.push(s);
        ys.push(e.mean.ln());
    }
    let (a, b, r2) =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Degenerate("need at least two distinct points".into()))?;
    Ok(DecayFit { rate: -b, log_prefactor: a, r2, points: xs.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub r: f64,
    pub theta: Estimate,
    pub phi: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

/// `theta_r / phi_r` on a grid, `theta` from one shared curve.
pub fn ratio_curve(model: &ModelSpec, r_grid: &[f64], n_reps: u64, seed: u64) -> Result<Vec<RatioPoint>> {
    if model.lambda == 0.0 {
        return Err(Error::Degenerate("lambda = 0 gives theta = phi = 0".into()));
    }
    let phis = r_grid
        .iter()
        .map(|&r| phi(&model.law, model.lambda, model.d, r).map(|c| c.value))
        .collect::<Result<Vec<_>>>()?;
    if let Some(k) = phis.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Degenerate(format!(
            "phi_r = 0 at r={}: no single ball reaches; use fit_exponential_decay for this law",
            r_grid[k]
        )));
    }
    let curve = estimate_theta_curve(model, r_grid, n_reps, seed)?;
    Ok(r_grid
        .iter()
        .zip(phis)
        .zip(curve.values)
        .map(|((&r, phi), theta)| RatioPoint {
            r,
            ratio: theta.mean / phi,
            ratio_stderr: theta.stderr / phi,
            theta,
            phi,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlemReport {
    pub r: f64,
    pub lambda: f64,
    pub d_lambda: f64,
    pub theta: Estimate,
    pub theta_prime: Estimate,
    pub sigma: f64,
    /// `theta' Sigma / (r theta (1 - theta))`
    pub ratio: f64,
}

/// Points of the curve used for `Sigma_r`.
const SIGMA_POINTS: usize = 32;

/// Evaluate the quantity the differential inequality bounds from below.
pub fn mlem_ratio(model: &ModelSpec, r: f64, d_lambda: f64, n_reps: u64, seed: u64) -> Result<MlemReport> {
    let lambda = model.lambda;
    if !(d_lambda > 0.0 && d_lambda < lambda) {
        return Err(invalid("d_lambda", format!("must lie in (0, lambda), got {d_lambda}")));
    }
    let (lo, hi) = (lambda - d_lambda, lambda + d_lambda);
    let passages = passage_intensities(model, hi, Query::Origin { r }, n_reps, rng::derive(seed, &[1]))?;
    let pc = PassageCurve::new(&passages, hi);
    let theta = pc.estimate(lambda, seed, format!("theta r={r} lambda={lambda}"));
    let k = theta.successes();
    if k < 10 || theta.n - k < 10 {
        return Err(Error::Degenerate(format!("theta_r = {} is saturated within noise", theta.mean)));
    }
    let ds: Vec<f64> = passages
        .iter()
        .map(|t| if t.is_some_and(|t| t > lo && t <= hi) { 1.0 / (2.0 * d_lambda) } else { 0.0 })
        .collect();
    let theta_prime = Estimate::from_samples(&ds, seed, format!("theta' r={r} lambda={lambda}"));
    let s_grid = grid(r / SIGMA_POINTS as f64, r, SIGMA_POINTS);
    let curve = estimate_theta_curve(model, &s_grid, n_reps, rng::derive(seed, &[2]))?;
    let sigma = sigma_r(&curve, r)?;
    let p = theta.mean;
    let ratio = theta_prime.mean * sigma / (r * p * (1.0 - p));
    Ok(MlemReport { r, lambda, d_lambda, theta, theta_prime, sigma, ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessScan {
    pub r_proxy: f64,
    pub lambda_c: f64,
    pub lambdas: Vec<f64>,
    pub theta: Vec<Estimate>,
    /// least-squares line through the supercritical points
    pub slope: f64,
    pub intercept_lambda: f64,
    pub r2: f64,
    /// largest `c` with `c (lambda - lambda_c) <= theta` at every supercritical point
    pub mean_field_c: f64,
}

/// `theta_{r_proxy}` along an intensity grid from coupled replicates, with a
/// line fitted to the points above `lambda_c`.
pub fn sharpness_scan(
    model: &ModelSpec,
    lambdas: &[f64],
    lambda_c: f64,
    r_proxy: f64,
    n_reps: u64,
    seed: u64,
) -> Result<SharpnessScan> {
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) || lambdas.first().is_none_or(|&l| l < 0.0) {
        return Err(invalid("lambda_grid", "must be non-negative and strictly increasing"));
    }
    let top = *lambdas.last().expect("checked non-empty");
    let passages = passage_intensities(model, top, Query::Origin { r: r_proxy }, n_reps, seed)?;
    let pc = PassageCurve::new(&passages, top);
    let theta: Vec<Estimate> =
        lambdas.iter().map(|&l| pc.estimate(l, seed, format!("theta r={r_proxy} lambda={l}"))).collect();
    let sup: Vec<(f64, f64)> =
        lambdas.iter().zip(&theta).filter(|(&l, _)| l > lambda_c).map(|(&l, e)| (l, e.mean)).collect();
    if sup.len() < 3 {
        return Err(invalid("lambda_grid", format!("need >= 3 points above lambda_c, got {}", sup.len())));
    }
    let xs: Vec<f64> = sup.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = sup.iter().map(|p| p.1).collect();
    let (a, b, r2) = linear_fit(&xs, &ys).ok_or_else(|| Error::Degenerate("flat grid".into()))?;
    let mean_field_c = sup.iter().map(|&(l, t)| t / (l - lambda_c)).fold(f64::INFINITY, f64::min);
    Ok(SharpnessScan {
        r_proxy,
        lambda_c,
        lambdas: lambdas.to_vec(),
        theta,
        slope: b,
        intercept_lambda: if b != 0.0 { -a / b } else { f64::NAN },
        r2,
        mean_field_c,
    })
}

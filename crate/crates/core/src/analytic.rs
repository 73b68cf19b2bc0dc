//! One-ball probabilities of the Boolean model in closed form, evaluated by quadrature.
//!
//! All of them share the shape `1 - exp(-lambda * m)` where `m` is the
//! expected number of balls meeting some geometric condition; `m` is an
//! integral of the radius tail against the radial density `c_d a^{d-1}`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::quadrature::{integrate_to_infinity, Tolerance};
use crate::radius_laws::RadiusLaw;

/// Unit-sphere area `c_d` and unit-ball volume `v_d` in `R^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryConstants {
    pub d: usize,
    pub sphere_area: f64,
    pub ball_volume: f64,
}

impl GeometryConstants {
    pub fn new(d: usize) -> Self {
        // v_0 = 1, v_1 = 2, v_d = v_{d-2} * 2 pi / d
        let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
        let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
        while k <= d {
            v *= 2.0 * PI / k as f64;
            k += 2;
        }
        Self { d, sphere_area: d as f64 * v, ball_volume: v }
    }
}

/// A probability (or expected count) that saturates when the radius law has
/// an infinite `d`-th moment: the whole space is then covered almost surely.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub value: f64,
    pub hall_saturated: bool,
}

impl ClosedForm {
    fn exact(value: f64) -> Self {
        Self { value, hall_saturated: false }
    }
}

const PI_DELTA_TOL: f64 = 1e-8;

fn check_common(lambda: f64, d: usize) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be >= 1"));
    }
    Ok(())
}

/// Expected number of balls meeting both `B_{2 delta r}` and `dB_{(1-2delta) r}`,
/// per unit intensity.
pub fn pi_delta_mean(law: &RadiusLaw, d: usize, r: f64, delta: f64) -> f64 {
    let p = 2.0 * delta * r;
    let q = r - 2.0 * delta * r;
    let mid = 0.5 * (p + q);
    let dim = d as i32;
    let threshold = move |a: f64| (a - p).abs().max((q - a).abs());
    let f = |a: f64| a.powi(dim - 1) * law.tail(threshold(a));

    // threshold is q - a left of mid, a - p right of it; split where it crosses a law knot
    let mut points = vec![0.0, p, q, mid];
    for k in law.knots() {
        points.push(q - k);
        points.push(p + k);
    }
    points.retain(|v| *v >= 0.0 && v.is_finite());
    let mut top = points.iter().copied().fold(1.0, f64::max);
    if let Some(m) = law.support_max() {
        // integrand vanishes once a - p exceeds the support
        top = top.max(p + m);
    }
    points.push(top);
    let out = integrate_to_infinity(f, &points, Tolerance::relative(PI_DELTA_TOL));
    GeometryConstants::new(d).sphere_area * out.value
}

/// Probability that some ball meets both `B_{2 delta r}` and `dB_{(1-2delta) r}`:
/// `1 - exp(-lambda c_d int_0^inf a^{d-1} mu[|a-2dr| v |r-2dr-a|, inf) da)`.
pub fn pi_delta(law: &RadiusLaw, lambda: f64, d: usize, r: f64, delta: f64) -> Result<ClosedForm> {
    check_common(lambda, d)?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid("r", format!("must be finite and >= 0, got {r}")));
    }
    if !(0.0..0.25).contains(&delta) {
        return Err(invalid("delta", format!("must lie in [0, 1/4), got {delta}")));
    }
    if lambda == 0.0 {
        return Ok(ClosedForm::exact(0.0));
    }
    if !law.moment_is_finite(d as f64) {
        return Ok(ClosedForm { value: 1.0, hall_saturated: true });
    }
    let m = pi_delta_mean(law, d, r, delta);
    Ok(ClosedForm::exact(-(-lambda * m).exp_m1()))
}

/// Probability that a single ball covers the origin and meets `dB_r`.
pub fn phi(law: &RadiusLaw, lambda: f64, d: usize, r: f64) -> Result<ClosedForm> {
    pi_delta(law, lambda, d, r, 0.0)
}

/// Probability that the origin is covered: `1 - exp(-lambda v_d E[R^d])`.
pub fn coverage_prob(law: &RadiusLaw, lambda: f64, d: usize) -> Result<ClosedForm> {
    check_common(lambda, d)?;
    if lambda == 0.0 {
        return Ok(ClosedForm::exact(0.0));
    }
    match law.moment(d as f64) {
        crate::Moment::Infinite => Ok(ClosedForm { value: 1.0, hall_saturated: true }),
        crate::Moment::Finite(m) => {
            let v = GeometryConstants::new(d).ball_volume;
            Ok(ClosedForm::exact(-(-lambda * v * m).exp_m1()))
        }
    }
}

/// Expected number of balls with radius `>= n` meeting `B_r`:
/// `lambda v_d int_{[n, inf)} (r + rho)^d dmu(rho)`.
///
/// Evaluated by parts as `(r+n)^d mu[n, inf) + int_n^inf d (r+rho)^{d-1} mu[rho, inf) drho`,
/// which needs only the tail.
pub fn truncation_intensity(law: &RadiusLaw, lambda: f64, d: usize, r: f64, n: f64) -> Result<ClosedForm> {
    check_common(lambda, d)?;
    if !(n.is_finite() && n >= 0.0) {
        return Err(invalid("N", format!("must be finite and >= 0, got {n}")));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid("r", format!("must be finite and >= 0, got {r}")));
    }
    if lambda == 0.0 {
        return Ok(ClosedForm::exact(0.0));
    }
    if !law.moment_is_finite(d as f64) {
        return Ok(ClosedForm { value: f64::INFINITY, hall_saturated: true });
    }
    let v = GeometryConstants::new(d).ball_volume;
    let dim = d as i32;
    let boundary = (r + n).powi(dim) * law.tail(n);
    let f = |rho: f64| dim as f64 * (r + rho).powi(dim - 1) * law.tail(rho);
    let mut points = vec![n];
    points.extend(law.knots().into_iter().filter(|k| *k > n));
    if let Some(m) = law.support_max() {
        if m <= n {
            return Ok(ClosedForm::exact(lambda * v * boundary));
        }
    }
    if points.iter().all(|p| *p <= 0.0) {
        points.push(1.0);
    }
    let out = integrate_to_infinity(f, &points, Tolerance::relative(1e-10));
    Ok(ClosedForm::exact(lambda * v * (boundary + out.value)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geometry_constants() {
        let g2 = GeometryConstants::new(2);
        assert_relative_eq!(g2.ball_volume, PI, max_relative = 1e-15);
        assert_relative_eq!(g2.sphere_area, 2.0 * PI, max_relative = 1e-15);
        let g3 = GeometryConstants::new(3);
        assert_relative_eq!(g3.ball_volume, 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(g3.sphere_area, 4.0 * PI, max_relative = 1e-15);
        for d in 1..8 {
            let g = GeometryConstants::new(d);
            assert_relative_eq!(g.sphere_area, d as f64 * g.ball_volume, max_relative = 1e-15);
        }
    }

    #[test]
    fn pi_delta_trivial_cases() {
        let dirac = RadiusLaw::dirac(1.0).unwrap();
        assert_eq!(pi_delta(&dirac, 0.0, 2, 10.0, 0.1).unwrap().value, 0.0);
        assert_eq!(pi_delta(&dirac, 1.0, 2, 10.0, 0.1).unwrap().value, 0.0);
        assert_eq!(phi(&dirac, 0.7, 2, 3.0).unwrap().value, 0.0);
        assert_eq!(phi(&dirac, 0.0, 2, 1.5).unwrap().value, 0.0);
        assert!(pi_delta(&dirac, 1.0, 2, 10.0, 0.25).is_err());
    }

    #[test]
    fn phi_at_zero_radius_is_void_probability() {
        let dirac = RadiusLaw::dirac(1.0).unwrap();
        let v = phi(&dirac, 1.0, 2, 0.0).unwrap().value;
        assert_relative_eq!(v, 1.0 - (-PI).exp(), max_relative = 1e-9);
        assert_relative_eq!(v, 0.956_786, max_relative = 1e-6);
    }

    #[test]
    fn coverage_examples() {
        let dirac = RadiusLaw::dirac(1.0).unwrap();
        assert_eq!(coverage_prob(&dirac, 0.0, 2).unwrap().value, 0.0);
        assert_relative_eq!(coverage_prob(&dirac, 1.0, 2).unwrap().value, 1.0 - (-PI).exp(), max_relative = 1e-10);
        let c1 = RadiusLaw::power_law_c1(0.5, 2).unwrap();
        assert_relative_eq!(
            coverage_prob(&c1, 0.1, 2).unwrap().value,
            1.0 - (-0.5 * PI).exp(),
            max_relative = 1e-9
        );
        // c = 0 boundary is rejected at construction; infinite d-th moment saturates
        let heavy = RadiusLaw::PowerLawC1 { c: 0.5, d: 1 };
        let out = coverage_prob(&heavy, 0.1, 3).unwrap();
        assert!(out.hall_saturated && out.value == 1.0);
    }

    #[test]
    fn coverage_is_phi_at_zero() {
        for law in [
            RadiusLaw::dirac(1.3).unwrap(),
            RadiusLaw::power_law_c1(1.0, 2).unwrap(),
            RadiusLaw::stretched_exp_c2(1.0, 0.5).unwrap(),
            RadiusLaw::exp_tail(2.0).unwrap(),
        ] {
            for d in [2, 3] {
                let a = coverage_prob(&law, 0.3, d).unwrap().value;
                let b = phi(&law, 0.3, d, 0.0).unwrap().value;
                assert_relative_eq!(a, b, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn phi_equals_pi_delta_zero() {
        let law = RadiusLaw::power_law_c1(1.0, 2).unwrap();
        for r in [1.0, 5.0, 20.0] {
            let a = phi(&law, 0.3, 2, r).unwrap().value;
            let b = pi_delta(&law, 0.3, 2, r, 0.0).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pi_delta_monotonicity_grid() {
        let laws = [RadiusLaw::dirac(2.0).unwrap(), RadiusLaw::power_law_c1(1.0, 2).unwrap()];
        for law in &laws {
            for r in [4.0, 8.0, 16.0] {
                let mut prev = -1.0;
                for k in 0..10 {
                    let lam = 0.05 * k as f64;
                    let v = pi_delta(law, lam, 2, r, 0.1).unwrap().value;
                    assert!(v >= prev - 1e-12);
                    prev = v;
                }
                let mut prev = -1.0;
                for k in 0..25 {
                    let delta = 0.01 * k as f64;
                    let v = pi_delta(law, 0.3, 2, r, delta).unwrap().value;
                    assert!(v >= prev - 1e-10, "{law:?} r={r} delta={delta} {v} < {prev}");
                    prev = v;
                }
            }
        }
        // for Dirac(R) the admissible centers form an annulus that only shrinks
        // once (1 - 2 delta) r exceeds R by enough; start the r-scan at 3.5 = 1.75 R
        let dirac = &laws[0];
        let mut prev = 2.0;
        for k in 7..30 {
            let v = pi_delta(dirac, 0.3, 2, 0.5 * k as f64, 0.1).unwrap().value;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn dirac_phi_by_hand() {
        // Dirac(R): centers with |z| <= R and |z| >= r - R, area pi (R^2 - (r-R)^2) when r/2 <= R < r
        let law = RadiusLaw::dirac(2.0).unwrap();
        let m = pi_delta_mean(&law, 2, 3.0, 0.0);
        assert_relative_eq!(m, PI * (4.0 - 1.0), max_relative = 1e-9);
    }

    #[test]
    fn truncation_intensity_trivial() {
        let dirac = RadiusLaw::dirac(1.0).unwrap();
        assert_eq!(truncation_intensity(&dirac, 3.0, 2, 10.0, 2.0).unwrap().value, 0.0);
        assert_eq!(truncation_intensity(&dirac, 0.0, 2, 10.0, 0.5).unwrap().value, 0.0);
        // N = 0: full expected count lambda pi (r + 1)^2
        assert_relative_eq!(
            truncation_intensity(&dirac, 0.5, 2, 4.0, 0.0).unwrap().value,
            0.5 * PI * 25.0,
            max_relative = 1e-12
        );
    }
}

//! Radius distributions: exact tails `mu[r, inf)`, inverse-tail samplers and moments.
//!
//! Laws whose tail is only pinned down on `r >= 1` (the exponential and
//! stretched-exponential families) spread the remaining mass `1 - tail(1)`
//! uniformly on `[0, 1)`. The power-law family has no mass below 1.
//! [`RadiusLaw::TruncatedAt`] caps radii: `R' = min(R, rmax)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{integrate_to_infinity, Tolerance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusLaw {
    /// Point mass at `r0`.
    Dirac { r0: f64 },
    /// `tail(r) = exp(-c r)` for `r >= 1`.
    ExpTail { c: f64 },
    /// `tail(r) = r^{-(d+c)}` for `r >= 1`, `tail = 1` below.
    PowerLawC1 { c: f64, d: usize },
    /// `tail(r) = exp(-c r^a)` for `r >= 1`, `0 < a < 1`.
    StretchedExpC2 { c: f64, a: f64 },
    /// `min(R, rmax)` for `R` drawn from `inner`.
    TruncatedAt { inner: Box<RadiusLaw>, rmax: f64 },
}

/// A moment that may diverge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Moment::Finite(v) => v,
            Moment::Infinite => f64::INFINITY,
        }
    }
}

impl RadiusLaw {
    pub fn dirac(r0: f64) -> Result<Self> {
        let law = RadiusLaw::Dirac { r0 };
        law.validate()?;
        Ok(law)
    }

    pub fn exp_tail(c: f64) -> Result<Self> {
        let law = RadiusLaw::ExpTail { c };
        law.validate()?;
        Ok(law)
    }

    pub fn power_law_c1(c: f64, d: usize) -> Result<Self> {
        let law = RadiusLaw::PowerLawC1 { c, d };
        law.validate()?;
        Ok(law)
    }

    pub fn stretched_exp_c2(c: f64, a: f64) -> Result<Self> {
        let law = RadiusLaw::StretchedExpC2 { c, a };
        law.validate()?;
        Ok(law)
    }

    pub fn truncated(inner: RadiusLaw, rmax: f64) -> Result<Self> {
        let law = RadiusLaw::TruncatedAt { inner: Box::new(inner), rmax };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadiusLaw::Dirac { r0 } if !(r0.is_finite() && *r0 >= 0.0) => {
                Err(invalid("r0", format!("must be finite and >= 0, got {r0}")))
            }
            RadiusLaw::ExpTail { c } | RadiusLaw::StretchedExpC2 { c, .. }
                if !(c.is_finite() && *c > 0.0) =>
            {
                Err(invalid("c", format!("must be finite and > 0, got {c}")))
            }
            RadiusLaw::StretchedExpC2 { a, .. } if !(*a > 0.0 && *a < 1.0) => {
                Err(invalid("a", format!("must lie in (0, 1), got {a}")))
            }
            RadiusLaw::PowerLawC1 { c, d } => {
                if !(c.is_finite() && *c > 0.0) {
                    Err(invalid("c", format!("must be finite and > 0, got {c}")))
                } else if *d == 0 {
                    Err(invalid("d", "dimension must be >= 1"))
                } else {
                    Ok(())
                }
            }
            RadiusLaw::TruncatedAt { inner, rmax } => {
                if !(rmax.is_finite() && *rmax > 0.0) {
                    return Err(invalid("rmax", format!("must be finite and > 0, got {rmax}")));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    /// `mu[r, inf)`, the probability that a radius is at least `r`.
    pub fn tail(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self {
            RadiusLaw::Dirac { r0 } => {
                if r <= *r0 {
                    1.0
                } else {
                    0.0
                }
            }
            RadiusLaw::ExpTail { c } => {
                if r < 1.0 {
                    1.0 + (-c).exp_m1() * r
                } else {
                    (-c * r).exp()
                }
            }
            RadiusLaw::PowerLawC1 { c, d } => {
                if r <= 1.0 {
                    1.0
                } else {
                    r.powf(-(*d as f64 + c))
                }
            }
            RadiusLaw::StretchedExpC2 { c, a } => {
                if r < 1.0 {
                    1.0 + (-c).exp_m1() * r
                } else {
                    (-c * r.powf(*a)).exp()
                }
            }
            RadiusLaw::TruncatedAt { inner, rmax } => {
                if r <= *rmax {
                    inner.tail(r)
                } else {
                    0.0
                }
            }
        }
    }

    /// Generalized inverse of the tail: `sup { r : tail(r) >= u }` for `u` in `(0, 1]`.
    pub fn inverse_tail(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0, "u={u}");
        match self {
            RadiusLaw::Dirac { r0 } => *r0,
            RadiusLaw::ExpTail { c } => {
                let t1 = (-c).exp();
                if u >= t1 {
                    (1.0 - u) / -(-c).exp_m1()
                } else {
                    -u.ln() / c
                }
            }
            RadiusLaw::PowerLawC1 { c, d } => u.powf(-1.0 / (*d as f64 + c)),
            RadiusLaw::StretchedExpC2 { c, a } => {
                let t1 = (-c).exp();
                if u >= t1 {
                    (1.0 - u) / -(-c).exp_m1()
                } else {
                    (-u.ln() / c).powf(1.0 / a)
                }
            }
            RadiusLaw::TruncatedAt { inner, rmax } => inner.inverse_tail(u).min(*rmax),
        }
    }

    /// Probability of the band `[lo, hi)`.
    pub fn band_mass(&self, lo: f64, hi: f64) -> f64 {
        (self.tail(lo) - self.tail(hi)).max(0.0)
    }

    /// Draw a radius from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // (0, 1]
        let u = 1.0 - rng.random::<f64>();
        self.inverse_tail(u)
    }

    /// Draw a radius conditioned to lie in `[lo, hi)`; the band must carry mass.
    pub fn sample_in_band<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        let t_lo = self.tail(lo);
        let t_hi = self.tail(hi);
        debug_assert!(t_lo > t_hi, "empty band [{lo}, {hi})");
        let u = t_hi + (t_lo - t_hi) * (1.0 - rng.random::<f64>());
        let r = self.inverse_tail(u.min(1.0));
        if r >= hi {
            f64::from_bits(hi.to_bits() - 1).max(lo)
        } else {
            r.max(lo)
        }
    }

    /// Points where the tail is not smooth.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            RadiusLaw::Dirac { r0 } => vec![*r0],
            RadiusLaw::ExpTail { .. } | RadiusLaw::PowerLawC1 { .. } | RadiusLaw::StretchedExpC2 { .. } => {
                vec![1.0]
            }
            RadiusLaw::TruncatedAt { inner, rmax } => {
                let mut k: Vec<f64> = inner.knots().into_iter().filter(|v| v < rmax).collect();
                k.push(*rmax);
                k
            }
        }
    }

    /// Largest radius with positive probability, if bounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            RadiusLaw::Dirac { r0 } => Some(*r0),
            RadiusLaw::TruncatedAt { inner, rmax } => {
                Some(inner.support_max().map_or(*rmax, |m| m.min(*rmax)))
            }
            _ => None,
        }
    }

    /// Whether `E[R^k]` is finite. Decided in closed form per family.
    pub fn moment_is_finite(&self, k: f64) -> bool {
        match self {
            RadiusLaw::PowerLawC1 { c, d } => k < *d as f64 + c,
            _ => true,
        }
    }

    /// `E[R^k] = k * int_0^inf r^{k-1} tail(r) dr`.
    pub fn moment(&self, k: f64) -> Moment {
        assert!(k >= 0.0, "moment order must be >= 0");
        if k == 0.0 {
            return Moment::Finite(1.0);
        }
        if !self.moment_is_finite(k) {
            return Moment::Infinite;
        }
        let f = |r: f64| k * r.powf(k - 1.0) * self.tail(r);
        let mut points = vec![0.0];
        points.extend(self.knots().into_iter().filter(|v| *v > 0.0));
        if points.len() == 1 {
            points.push(1.0);
        }
        let out = integrate_to_infinity(f, &points, Tolerance::relative(1e-10));
        Moment::Finite(out.value)
    }

    /// Whether `E[R^{5d-3}]` is finite, the moment condition of the sharpness theorem.
    pub fn satisfies_sharpness_moment(&self, d: usize) -> bool {
        self.moment_is_finite(5.0 * d as f64 - 3.0)
    }
}

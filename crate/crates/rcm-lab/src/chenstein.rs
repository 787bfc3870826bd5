//! Poisson-approximation error terms for the isolated-node count.
//!
//! The isolated-node count is a sum of dependent indicators; its distance in
//! total variation from a Poisson law is controlled by three terms: `b1`
//! (neighborhood self-interaction), an upper bound on `b2` (pairwise
//! interaction, dominated via lens geometry), and a `b3` bracket width
//! (dependence on the far field, bounded between two computable
//! surrogates). This module evaluates all three at finite intensity on the
//! torus, where they can be watched decaying toward zero.

use crate::connfn::{critical_radius, spreading_constant, ConnectionModel, ScaledModel};
use crate::geometry::Domain;
use crate::quad::{self, Quad};
use crate::theory;
use crate::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Angular constant of the lens split: `pi/3 + sqrt(3)/2`.
const LENS_AREA_CONST: f64 = PI / 3.0 + 0.8660254037844386;

/// Relative tolerance used for the internal exact-mean quadratures.
const MEAN_TOL: f64 = 1e-9;

/// Radius exponent for the neighborhood split.
///
/// Indices within distance `2 r^(1-epsilon)` of each other count as
/// neighbors; the exponent must stay in `(0, 1/2)`, and below `c2/C` where
/// the far-field term is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NeighborhoodSpec {
    pub epsilon: f64,
}

impl NeighborhoodSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::EpsilonOutOfRange {
                epsilon,
                limit: 0.5,
            });
        }
        Ok(NeighborhoodSpec { epsilon })
    }
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        NeighborhoodSpec { epsilon: 0.1 }
    }
}

/// A profile discontinuity-or-drop point and the two constants derived from
/// it, used to dominate the pairwise-interaction integrand.
///
/// `c1 = q sqrt(3) r_star` and `c2 = q (pi/3 + sqrt(3)/2) r_star^2`, where
/// `q = g(r_star^-)(1 - g(r_star^+))` is the link-then-miss weight across
/// the point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LensConstants {
    pub r_star: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Assembled bound terms at one `(rho, b, epsilon)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub rho: f64,
    pub b: f64,
    pub epsilon: f64,
    pub b1: f64,
    pub b2_bound: f64,
    pub b3_gap: f64,
    /// Exact finite-intensity mean of the isolated count.
    pub eta: f64,
    /// `(b1 + b2_bound + b3_gap) * min(1, 1/eta)`.
    pub total: f64,
}

impl BoundReport {
    pub fn csv_header() -> &'static str {
        "rho,b,epsilon,b1,b2_bound,b3_gap,eta,total"
    }

    /// The `min(1, 1/eta)` scale applied to the term sum.
    pub fn eta_scale(&self) -> f64 {
        (1.0 / self.eta).min(1.0)
    }
}

/// Neighborhood self-interaction term at finite intensity:
/// `4 pi mean^2 ((ln rho + b)/(C rho))^(1-epsilon)` with `mean` the exact
/// isolated-node mean.
pub fn b1_finite(
    rho: f64,
    b: f64,
    spec: NeighborhoodSpec,
    m: &ConnectionModel,
    d: Domain,
) -> Result<f64> {
    NeighborhoodSpec::new(spec.epsilon)?;
    let mean = theory::mean_isolated_exact(rho, b, m, d, MEAN_TOL)?.value;
    let c = spreading_constant(m, 1e-12)?.value;
    let r2 = (rho.ln() + b) / (c * rho);
    Ok(4.0 * PI * mean * mean * r2.powf(1.0 - spec.epsilon))
}

/// Overlap integral `K(s) = INT g(||x||) g(||x - y||) dx` at `||y|| = s`,
/// by nested polar quadrature. Rotational symmetry makes the value depend
/// on `s` only.
pub fn correlation_integral(m: &ConnectionModel, s: f64, tol: f64) -> Result<Quad> {
    m.validate()?;
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("separation must be finite and >= 0, got {s}"),
        });
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    let inner_tol = tol * 0.1;
    // coincident centers: the angular integral collapses
    if s == 0.0 {
        let f = |t: f64| {
            let g = m.evaluate(t);
            2.0 * PI * t * g * g
        };
        return match m.support_radius() {
            Some(sup) => quad::integrate(f, 0.0, sup, &m.breakpoints(), tol, 1e-300),
            None => quad::integrate_to_infinity(
                f,
                0.0,
                8.0,
                |t| 2.0 * PI * t * t * m.evaluate(t),
                tol,
                1e-300,
            ),
        };
    }
    let model_breaks = m.breakpoints();
    let ring = |t: f64| -> f64 {
        // distance from the point at angle theta on the radius-t circle to
        // the second center at (s, 0)
        let dist = |theta: f64| (t * t + s * s - 2.0 * t * s * theta.cos()).max(0.0).sqrt();
        // angular breakpoints where that distance crosses a profile kink
        let mut breaks = Vec::new();
        for &xb in &model_breaks {
            let cos_th = (t * t + s * s - xb * xb) / (2.0 * t * s);
            if cos_th.abs() < 1.0 {
                breaks.push(cos_th.acos());
            }
        }
        let half = quad::integrate(|th| m.evaluate(dist(th)), 0.0, PI, &breaks, inner_tol, 1e-300);
        match half {
            Ok(q) => 2.0 * t * m.evaluate(t) * q.value,
            Err(_) => f64::NAN, // surfaces through the outer integral
        }
    };
    let outer = match m.support_radius() {
        Some(sup) => {
            if s >= 2.0 * sup {
                return Ok(Quad {
                    value: 0.0,
                    abs_err: 0.0,
                });
            }
            // both factors vanish unless t <= sup and the circle reaches
            // within sup of the second center
            let lo = (s - sup).max(0.0);
            let mut breaks = model_breaks.clone();
            for &xb in &model_breaks {
                breaks.push((s - xb).abs());
                breaks.push(s + xb);
            }
            quad::integrate(ring, lo, sup, &breaks, tol, 1e-300)?
        }
        None => quad::integrate_to_infinity(
            ring,
            0.0,
            s + 8.0,
            |t| 2.0 * PI * t * t * m.evaluate(t),
            tol,
            1e-300,
        )?,
    };
    if !outer.value.is_finite() {
        return Err(Error::InvalidModel(
            "angular quadrature failed inside the overlap integral".into(),
        ));
    }
    Ok(Quad {
        value: outer.value,
        abs_err: outer.abs_err + outer.value.abs() * inner_tol,
    })
}

/// Area of one radius-`r` disk minus its lens-shaped overlap with an equal
/// disk whose center is `x` away: `pi r^2` once the disks separate, else
/// `pi r^2 - 2 r^2 arcsin(sqrt(1 - x^2/(4r^2))) + r x sqrt(1 - x^2/(4r^2))`.
pub fn lens_complement_area(r: f64, x: f64) -> f64 {
    assert!(r > 0.0, "disk radius must be positive, got {r}");
    assert!(x >= 0.0, "center separation must be >= 0, got {x}");
    if x >= 2.0 * r {
        return PI * r * r;
    }
    let w = (1.0 - x * x / (4.0 * r * r)).max(0.0).sqrt();
    PI * r * r - 2.0 * r * r * w.asin() + r * x * w
}

/// Finds a profile point with a positive link-then-miss weight
/// `q = g(r^-)(1 - g(r^+))` and returns the dominating constants derived
/// from the point maximizing `c2`. Hard disks use their exact jump at the
/// support radius; elsewhere one-sided values are taken at `r(1 -+ 1e-9)`.
pub fn lens_constants(m: &ConnectionModel) -> Result<LensConstants> {
    m.validate()?;
    if let ConnectionModel::UnitDisk = m {
        return Ok(LensConstants {
            r_star: 1.0,
            c1: 3f64.sqrt(),
            c2: LENS_AREA_CONST,
        });
    }
    let jump = |r: f64| -> f64 {
        let lo = m.evaluate(r * (1.0 - 1e-9));
        let hi = m.evaluate(r * (1.0 + 1e-9));
        lo * (1.0 - hi)
    };
    let mut candidates: Vec<f64> = Vec::with_capacity(1300);
    let (lo_exp, hi_exp, per_decade) = (-3.0, 3.0, 200);
    let steps = ((hi_exp - lo_exp) * per_decade as f64) as usize;
    for i in 0..=steps {
        let e = lo_exp + (hi_exp - lo_exp) * i as f64 / steps as f64;
        candidates.push(10f64.powf(e));
    }
    candidates.push(1.0);
    if let Some(s) = m.support_radius() {
        candidates.push(s);
    }
    candidates.extend(m.breakpoints());
    let mut best: Option<LensConstants> = None;
    for r in candidates {
        if !(r.is_finite() && r > 0.0) {
            continue;
        }
        let q = jump(r);
        if q <= 0.0 {
            continue;
        }
        let c2 = q * LENS_AREA_CONST * r * r;
        if best.as_ref().is_none_or(|b| c2 > b.c2) {
            best = Some(LensConstants {
                r_star: r,
                c1: q * 3f64.sqrt() * r,
                c2,
            });
        }
    }
    best.ok_or(Error::LensDegenerate)
}

fn require_torus(d: Domain, what: &str) -> Result<()> {
    if d != Domain::Torus {
        return Err(Error::InvalidParameter {
            name: "domain",
            reason: format!("{what} is defined on the torus only"),
        });
    }
    Ok(())
}

/// Upper bound on the pairwise-interaction term at finite intensity:
/// `(lambda/rho) [ INT_0^{r_star} 2 pi s e^{lambda(C - c1 s)} ds
///               + pi (4 r^{-2 eps} - r_star^2)_+ e^{lambda(C - c2)} ]`
/// with `lambda = (ln rho + b)/C`.
pub fn b2_bound_finite(
    rho: f64,
    b: f64,
    spec: NeighborhoodSpec,
    m: &ConnectionModel,
    d: Domain,
    tol: f64,
) -> Result<f64> {
    NeighborhoodSpec::new(spec.epsilon)?;
    require_torus(d, "the pairwise-interaction bound")?;
    let lens = lens_constants(m)?;
    let c = spreading_constant(m, 1e-12)?.value;
    if spec.epsilon >= lens.c2 / c {
        return Err(Error::EpsilonOutOfRange {
            epsilon: spec.epsilon,
            limit: lens.c2 / c,
        });
    }
    let lambda = (rho.ln() + b) / c;
    let r = critical_radius(rho, b, c)?;
    let first = quad::integrate(
        |s| 2.0 * PI * s * (lambda * (c - lens.c1 * s)).exp(),
        0.0,
        lens.r_star,
        &[],
        tol,
        1e-300,
    )?;
    let annulus = (4.0 * r.powf(-2.0 * spec.epsilon) - lens.r_star * lens.r_star).max(0.0);
    let second = PI * annulus * (lambda * (c - lens.c2)).exp();
    Ok(lambda / rho * (first.value + second))
}

/// Width of the bracket around the far-field term: the larger of
/// `rho e^{-rho INT_{ball(r^{1-eps})} g} - mean` (truncating the exponent's
/// integration region raises the value) and `mean e^{-b} g(2 r^{-eps})`
/// (the far-field link-probability floor, with the interior mean at its
/// limit value).
pub fn b3_gap_finite(
    rho: f64,
    b: f64,
    spec: NeighborhoodSpec,
    m: &ConnectionModel,
    d: Domain,
    tol: f64,
) -> Result<f64> {
    NeighborhoodSpec::new(spec.epsilon)?;
    require_torus(d, "the far-field bracket")?;
    let mean = theory::mean_isolated_exact(rho, b, m, d, tol.min(MEAN_TOL))?.value;
    let c = spreading_constant(m, 1e-12)?.value;
    let r = critical_radius(rho, b, c)?;
    let scaled = ScaledModel::new(m.clone(), r)?;
    let truncated = theory::truncated_torus_profile_mass(
        &scaled,
        r.powf(1.0 - spec.epsilon),
        tol.min(MEAN_TOL),
    )?;
    let upper_gap = (rho * (-rho * truncated.value).exp() - mean).max(0.0);
    let lower_gap = mean * (-b).exp() * m.evaluate(2.0 * r.powf(-spec.epsilon));
    Ok(upper_gap.max(lower_gap))
}

/// Expected links suppressed per node when the profile is cut off at the
/// neighborhood radius, in units of the node degree:
/// `rho r^2 INT_{r^{-eps}}^inf 2 pi x g(x) dx`. Decays to zero whenever the
/// profile tail does.
pub fn truncation_factor(
    rho: f64,
    b: f64,
    spec: NeighborhoodSpec,
    m: &ConnectionModel,
    tol: f64,
) -> Result<f64> {
    NeighborhoodSpec::new(spec.epsilon)?;
    let c = spreading_constant(m, 1e-12)?.value;
    let r = critical_radius(rho, b, c)?;
    let a = r.powf(-spec.epsilon);
    let f = |x: f64| 2.0 * PI * x * m.evaluate(x);
    let tail = match m.support_radius() {
        Some(s) if a >= s => Quad {
            value: 0.0,
            abs_err: 0.0,
        },
        Some(s) => quad::integrate(f, a, s, &m.breakpoints(), tol, 1e-300)?,
        None => quad::integrate_to_infinity(
            f,
            a,
            2.0 * a + 8.0,
            |x| 2.0 * PI * x * x * m.evaluate(x),
            tol,
            1e-300,
        )?,
    };
    Ok(rho * r * r * tail.value)
}

/// Assembles the three terms into the total factor bounding the total
/// variation distance between the isolated-count law and Poisson(`eta`):
/// `(b1 + b2 + b3) min(1, 1/eta)` with `eta` the exact finite-intensity
/// mean.
pub fn tv_bound_total(
    rho: f64,
    b: f64,
    spec: NeighborhoodSpec,
    m: &ConnectionModel,
    d: Domain,
) -> Result<BoundReport> {
    require_torus(d, "the assembled bound")?;
    let tol = 1e-9;
    let b1 = b1_finite(rho, b, spec, m, d)?;
    let b2 = b2_bound_finite(rho, b, spec, m, d, tol)?;
    let b3 = b3_gap_finite(rho, b, spec, m, d, tol)?;
    let eta = theory::mean_isolated_exact(rho, b, m, d, MEAN_TOL)?.value;
    let total = (b1 + b2 + b3) * (1.0 / eta).min(1.0);
    Ok(BoundReport {
        rho,
        b,
        epsilon: spec.epsilon,
        b1,
        b2_bound: b2,
        b3_gap: b3,
        eta,
        total,
    })
}

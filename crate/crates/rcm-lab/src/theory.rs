//! Limit-law values and exact finite-intensity formulas.
//!
//! The simulation side of the crate estimates quantities; this module
//! computes what those estimates should converge to. Three kinds of numbers
//! live here: closed-form limits (functions of the offset `b` alone), exact
//! finite-intensity integrals evaluated by adaptive quadrature, and
//! analytic bounds on component-census statistics.

use crate::connfn::{critical_radius, spreading_constant, ConnectionModel, ScaledModel};
use crate::geometry::{Domain, Point, HALF_SIDE};
use crate::quad::{self, Quad};
use crate::stats::Estimate;
use crate::stream;
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Largest component order for which exact connectivity enumeration is
/// supported (2^(k(k-1)/2) edge subsets).
pub const MAX_COMPONENT_ORDER: usize = 5;

/// What kind of number a [`Prediction`] is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PredictionKind {
    /// Limit value as the intensity grows.
    Asymptotic,
    /// Exact value at a specific finite intensity.
    ExactFiniteRho,
    /// One-sided analytic bound.
    Bound,
}

/// A named theoretical value with the parameters it was computed at.
#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub name: String,
    pub value: f64,
    pub kind: PredictionKind,
    /// Free-form parameter context, e.g. `rho=500 b=0 model=unit-disk`.
    pub params: String,
}

impl Prediction {
    /// A prediction that must be a probability.
    pub fn probability(name: &str, value: f64, kind: PredictionKind, params: &str) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter {
                name: "value",
                reason: format!("probability prediction {name} out of [0,1]: {value}"),
            });
        }
        Ok(Prediction {
            name: name.into(),
            value,
            kind,
            params: params.into(),
        })
    }

    /// A prediction that must be a nonnegative quantity (mean, count, bound).
    pub fn quantity(name: &str, value: f64, kind: PredictionKind, params: &str) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "value",
                reason: format!("quantity prediction {name} must be finite and >= 0: {value}"),
            });
        }
        Ok(Prediction {
            name: name.into(),
            value,
            kind,
            params: params.into(),
        })
    }
}

/// Limit of the expected number of isolated nodes: `e^{-b}`.
pub fn mean_isolated_asymptotic(b: f64) -> f64 {
    (-b).exp()
}

/// Limit probability that no node is isolated: `exp(-e^{-b})`.
pub fn prob_no_isolated_asymptotic(b: f64) -> f64 {
    (-(-b).exp()).exp()
}

/// Limit probability that the network is connected. Identical to
/// [`prob_no_isolated_asymptotic`]: in the limit the network is connected
/// exactly when no node is isolated.
pub fn prob_connected_asymptotic(b: f64) -> f64 {
    prob_no_isolated_asymptotic(b)
}

/// Poisson probability mass `e^{-mean} mean^k / k!`, evaluated in log space
/// so large `k` and `mean` stay accurate.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    debug_assert!(mean >= 0.0, "poisson_pmf wants mean >= 0, got {mean}");
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - libm::lgamma(kf + 1.0)).exp()
}

fn ln_factorial(n: f64) -> f64 {
    libm::lgamma(n + 1.0)
}

/// Lower bound on the probability that exactly one component has more than
/// `m` nodes: `1 - e^{-(m+1)b} / (m+1)!`, clamped to `[0, 1]`. The
/// finite-intensity slack is the caller's tolerance, not part of the bound.
pub fn xi_gtm_prob_lower_bound(m: u32, b: f64) -> f64 {
    let mp1 = f64::from(m) + 1.0;
    let term = (-mp1 * b - ln_factorial(mp1)).exp();
    (1.0 - term).clamp(0.0, 1.0)
}

/// Upper bound on the limit of the expected number of components with more
/// than `m` nodes: `1 + (e^{-b})^{m+1} / (m+1)!`. The interior scale of the
/// bound is unobservable; this takes its worst case `e^{-b}`.
pub fn mean_xi_gtm_upper_bound(m: u32, b: f64) -> f64 {
    let mp1 = f64::from(m) + 1.0;
    1.0 + (-mp1 * b - ln_factorial(mp1)).exp()
}

/// Length of the circle of radius `s` about the window center that lies
/// inside the window (the torus ball boundary, since the torus metric equals
/// the Euclidean one inside the window).
fn centered_arc_in_window(s: f64) -> f64 {
    if s <= HALF_SIDE {
        2.0 * PI * s
    } else {
        // each of the four walls at distance 1/2 removes an arc of
        // half-angle acos(1/(2s)); the removed arcs are disjoint until the
        // circle exits through the corners at s = sqrt(2)/2
        s * (2.0 * PI - 8.0 * (HALF_SIDE / s).min(1.0).acos())
    }
}

/// `INT g(||x||/r) dx` over the part of the window within torus distance
/// `cap` of the center, by a single radial quadrature.
pub(crate) fn truncated_torus_profile_mass(
    scaled: &ScaledModel,
    cap: f64,
    tol: f64,
) -> Result<Quad> {
    let mut upper = cap.min(FRAC_1_SQRT_2);
    if let Some(s) = scaled.support_distance() {
        upper = upper.min(s);
    }
    if upper <= 0.0 {
        return Ok(Quad {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let mut breaks: Vec<f64> = scaled.breakpoints();
    breaks.push(HALF_SIDE);
    quad::integrate(
        |s| scaled.eval_at_distance(s) * centered_arc_in_window(s),
        0.0,
        upper,
        &breaks,
        tol,
        1e-300,
    )
}

/// `INT_A g(||x||/r) dx` over the whole window under the torus metric.
pub(crate) fn torus_profile_mass(scaled: &ScaledModel, tol: f64) -> Result<Quad> {
    truncated_torus_profile_mass(scaled, FRAC_1_SQRT_2, tol)
}

/// Total length of a union of angular intervals on the circle. Intervals
/// are `(lo, hi)` with `hi >= lo`; endpoints are reduced mod 2 pi.
fn circular_union_length(intervals: &[(f64, f64)]) -> f64 {
    const TAU: f64 = 2.0 * PI;
    let mut segs: Vec<(f64, f64)> = Vec::with_capacity(intervals.len() + 1);
    for &(lo, hi) in intervals {
        let w = hi - lo;
        debug_assert!(w >= 0.0);
        if w >= TAU {
            return TAU;
        }
        if w == 0.0 {
            continue;
        }
        let lo_m = lo.rem_euclid(TAU);
        let hi_m = lo_m + w;
        if hi_m <= TAU {
            segs.push((lo_m, hi_m));
        } else {
            segs.push((lo_m, TAU));
            segs.push((0.0, hi_m - TAU));
        }
    }
    segs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (lo, hi) in segs {
        match cur {
            Some((clo, chi)) if lo <= chi => cur = Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total += chi - clo;
                cur = Some((lo, hi));
            }
            None => cur = Some((lo, hi)),
        }
    }
    if let Some((clo, chi)) = cur {
        total += chi - clo;
    }
    total.min(TAU)
}

/// Length of the circle of radius `s` about `y` that lies inside the window.
fn arc_in_window(s: f64, y: Point) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    // wall distances paired with the angle of each outward wall normal
    let walls = [
        (HALF_SIDE - y.x, 0.0),
        (HALF_SIDE - y.y, PI / 2.0),
        (y.x + HALF_SIDE, PI),
        (y.y + HALF_SIDE, 3.0 * PI / 2.0),
    ];
    let mut excluded: Vec<(f64, f64)> = Vec::with_capacity(4);
    for (d, center) in walls {
        if d < s {
            let half = (d / s).clamp(-1.0, 1.0).acos();
            excluded.push((center - half, center + half));
        }
    }
    s * (2.0 * PI - circular_union_length(&excluded))
}

/// `INT_A g(||x - y||/r) dx` for a fixed `y` in the window, by radial
/// quadrature with each circle clipped to the window.
pub(crate) fn clipped_profile_mass(scaled: &ScaledModel, y: Point, tol: f64) -> Result<Quad> {
    let (dr, dt) = (HALF_SIDE - y.x, HALF_SIDE - y.y);
    let (dl, db) = (y.x + HALF_SIDE, y.y + HALF_SIDE);
    let far_corner = (HALF_SIDE + y.x.abs()).hypot(HALF_SIDE + y.y.abs());
    let upper = match scaled.support_distance() {
        Some(s) => s.min(far_corner),
        None => far_corner,
    };
    // the integrand changes analytic form where the circle first meets each
    // wall and where it passes each corner (adjacent clipped arcs merge)
    let mut breaks = vec![
        dr,
        dt,
        dl,
        db,
        dr.hypot(dt),
        dt.hypot(dl),
        dl.hypot(db),
        db.hypot(dr),
    ];
    breaks.extend(scaled.breakpoints());
    quad::integrate(
        |s| scaled.eval_at_distance(s) * arc_in_window(s, y),
        0.0,
        upper,
        &breaks,
        tol,
        1e-300,
    )
}

/// Square-domain mean isolated count `rho INT_A exp(-rho I(y)) dy`, with
/// `I(y)` the clipped profile mass about `y`, reduced by symmetry to eight
/// times the integral over the triangle `0 <= y2 <= y1 <= 1/2`.
fn mean_isolated_square(rho: f64, scaled: &ScaledModel, tol: f64) -> Result<Quad> {
    let mass_tol = (tol * 1e-3).clamp(1e-12, 1e-9);
    let mid_tol = tol / 4.0;
    let stash: RefCell<Option<Error>> = RefCell::new(None);
    // the boundary layer where clipping matters is one profile reach wide
    let reach = scaled
        .support_distance()
        .unwrap_or(4.0 * scaled.r())
        .min(2.0 * HALF_SIDE);
    let layer = [HALF_SIDE - reach, HALF_SIDE - 2.0 * reach];
    let density = |y: Point| -> f64 {
        match clipped_profile_mass(scaled, y, mass_tol) {
            Ok(q) => (-rho * q.value).exp(),
            Err(e) => {
                stash.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let outer = quad::integrate(
        |u| {
            let inner = quad::integrate(
                |v| density(Point { x: u, y: v }),
                0.0,
                u,
                &layer,
                mid_tol,
                1e-300,
            );
            match inner {
                Ok(q) => q.value,
                Err(e) => {
                    stash.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        HALF_SIDE,
        &layer,
        tol / 2.0,
        1e-300,
    )?;
    if let Some(e) = stash.into_inner() {
        return Err(e);
    }
    let value = 8.0 * rho * outer.value;
    // outer panel error, plus the budgets granted to the two nested levels
    let abs_err = 8.0 * rho * outer.abs_err + value * (mid_tol + 10.0 * mass_tol);
    Ok(Quad { value, abs_err })
}

/// Exact expected number of isolated nodes at finite intensity `rho` with
/// radius set by the offset `b`.
///
/// On the torus every location is equivalent, so the value is
/// `rho exp(-rho INT_A g)` with a single radial integral. On the square the
/// isolation probability depends on the position through boundary clipping,
/// so the location integral is evaluated by nested quadrature. Both carry a
/// propagated error estimate.
pub fn mean_isolated_exact(
    rho: f64,
    b: f64,
    model: &ConnectionModel,
    domain: Domain,
    tol: f64,
) -> Result<Quad> {
    if !(rho.is_finite() && rho > 1.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("intensity must exceed 1, got {rho}"),
        });
    }
    if !(tol.is_finite() && tol > 0.0 && tol <= 0.1) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("relative tolerance must lie in (0, 0.1], got {tol}"),
        });
    }
    let c = spreading_constant(model, (tol * 1e-2).clamp(1e-14, 1e-10))?.value;
    let r = critical_radius(rho, b, c)?;
    let scaled = ScaledModel::new(model.clone(), r)?;
    match domain {
        Domain::Torus => {
            let mass = torus_profile_mass(&scaled, (tol * 1e-2).clamp(1e-13, 1e-10))?;
            let value = rho * (-rho * mass.value).exp();
            let abs_err = rho * value * mass.abs_err;
            Ok(Quad { value, abs_err })
        }
        Domain::Square => mean_isolated_square(rho, &scaled, tol),
    }
}

/// Probability that `k <= 5` nodes at the given positions form a connected
/// graph, by exact enumeration of all edge subsets.
pub fn connect_probability_kset(
    positions: &[Point],
    m: &ScaledModel,
    d: Domain,
) -> Result<f64> {
    let k = positions.len();
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "positions",
            reason: "need at least one position".into(),
        });
    }
    if k > MAX_COMPONENT_ORDER {
        return Err(Error::OrderTooLarge {
            k,
            max: MAX_COMPONENT_ORDER,
        });
    }
    let mut probs = [0.0f64; MAX_COMPONENT_ORDER * (MAX_COMPONENT_ORDER - 1) / 2];
    let mut e = 0;
    for a in 0..k {
        for bidx in (a + 1)..k {
            probs[e] = m.eval_at_distance(d.distance(positions[a], positions[bidx]));
            e += 1;
        }
    }
    Ok(kset_connected_prob(k, &probs[..e]))
}

/// Sum of subset weights over connected graphs on `k` labeled vertices with
/// independent edge probabilities `probs` (upper-triangular, row-major).
fn kset_connected_prob(k: usize, probs: &[f64]) -> f64 {
    debug_assert!(k >= 1 && k <= MAX_COMPONENT_ORDER);
    debug_assert_eq!(probs.len(), k * (k - 1) / 2);
    let ne = probs.len();
    let full: u32 = (1 << k) - 1;
    let mut total = 0.0;
    for mask in 0..(1u32 << ne) {
        let mut weight = 1.0;
        let mut adjacency = [0u32; MAX_COMPONENT_ORDER];
        let mut e = 0;
        for a in 0..k {
            for bidx in (a + 1)..k {
                if mask >> e & 1 == 1 {
                    weight *= probs[e];
                    adjacency[a] |= 1 << bidx;
                    adjacency[bidx] |= 1 << a;
                } else {
                    weight *= 1.0 - probs[e];
                }
                e += 1;
            }
        }
        if weight == 0.0 {
            continue;
        }
        // flood fill from vertex 0 over the vertex bitmask
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let mut next = 0;
            for v in 0..k {
                if frontier >> v & 1 == 1 {
                    next |= adjacency[v];
                }
            }
            frontier = next & !seen;
            seen |= next;
        }
        if seen == full {
            total += weight;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Probability that a node at `y` links to at least one of `positions`:
/// `1 - PROD_i (1 - g(||y - x_i||/r))`. An empty position list yields 0.
pub fn coverage_probability(y: Point, positions: &[Point], m: &ScaledModel, d: Domain) -> f64 {
    let mut miss = 1.0;
    for &p in positions {
        miss *= 1.0 - m.eval_at_distance(d.distance(y, p));
        if miss == 0.0 {
            return 1.0;
        }
    }
    1.0 - miss
}

/// Side of the stratification grid for the inner coverage integral;
/// 71 x 71 strata with two draws each is about 10^4 points.
const INNER_GRID: usize = 71;

/// How positions and distances are parameterized inside the component-count
/// integrand. Both routes compute the same number; `Rescaled` works in
/// window-over-radius coordinates with intensity `rho r^2` and exists to
/// cross-check the change of variables.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Parameterization {
    Direct,
    // the cross-check route is exercised by tests only
    #[cfg_attr(not(test), allow(dead_code))]
    Rescaled,
}

struct ComponentSample {
    value: f64,
    bias: f64,
    /// Same integrand with the connectivity factor replaced by 1.
    capped: f64,
}

fn component_sample(
    rho: f64,
    scaled: &ScaledModel,
    domain: Domain,
    k: usize,
    seed: u64,
    sample: u64,
    param: Parameterization,
    with_cap: bool,
) -> ComponentSample {
    let tag_outer = stream::hash_bytes(b"component-order-positions");
    let tag_inner = stream::hash_bytes(b"component-order-coverage");
    let mut rng = stream::keyed_rng(&[seed, sample, tag_outer]);
    let mut pts = [Point::ORIGIN; MAX_COMPONENT_ORDER];
    for p in pts.iter_mut().take(k) {
        *p = Point {
            x: rng.random_range(-HALF_SIDE..HALF_SIDE),
            y: rng.random_range(-HALF_SIDE..HALF_SIDE),
        };
    }
    let pts = &pts[..k];
    let r = scaled.r();
    let pair_prob = |a: Point, bp: Point| -> f64 {
        match param {
            Parameterization::Direct => scaled.eval_at_distance(domain.distance(a, bp)),
            Parameterization::Rescaled => scaled.model().evaluate(domain.distance(a, bp) / r),
        }
    };
    let mut probs = [0.0f64; MAX_COMPONENT_ORDER * (MAX_COMPONENT_ORDER - 1) / 2];
    let mut e = 0;
    for a in 0..k {
        for bidx in (a + 1)..k {
            probs[e] = pair_prob(pts[a], pts[bidx]);
            e += 1;
        }
    }
    let g1 = kset_connected_prob(k, &probs[..e]);
    if g1 == 0.0 && !with_cap {
        return ComponentSample {
            value: 0.0,
            bias: 0.0,
            capped: 0.0,
        };
    }

    // stratified two-per-cell estimate of the coverage integral over the
    // window, with a within-cell variance estimate
    let mut inner_rng = stream::keyed_rng(&[seed, sample, tag_inner]);
    let g = INNER_GRID as f64;
    let mut sum = 0.0;
    let mut var_sum = 0.0;
    for a in 0..INNER_GRID {
        for bidx in 0..INNER_GRID {
            let mut f = [0.0f64; 2];
            for slot in &mut f {
                let x = Point {
                    x: -HALF_SIDE + (a as f64 + inner_rng.random_range(0.0..1.0)) / g,
                    y: -HALF_SIDE + (bidx as f64 + inner_rng.random_range(0.0..1.0)) / g,
                };
                let mut miss = 1.0;
                for &p in pts {
                    miss *= 1.0 - pair_prob(x, p);
                }
                *slot = 1.0 - miss;
            }
            sum += f[0] + f[1];
            let d = f[0] - f[1];
            var_sum += d * d;
        }
    }
    let cells = g * g;
    // mean over cells of two-draw cell means, times the region area
    let (area, lambda) = match param {
        Parameterization::Direct => (1.0, rho),
        Parameterization::Rescaled => (1.0 / (r * r), rho * r * r),
    };
    let mass = area * sum / (2.0 * cells);
    let mass_var = area * area * var_sum / (4.0 * cells * cells);
    let damp = (-lambda * mass).exp();
    // second-order curvature of exp() turns inner-sample variance into a
    // positive bias on the damping factor; folded into the error budget
    let bias_scale = 0.5 * lambda * lambda * mass_var;
    ComponentSample {
        value: g1 * damp,
        bias: g1 * damp * bias_scale,
        capped: if with_cap { damp } else { 0.0 },
    }
}

fn components_core(
    rho: f64,
    b: f64,
    model: &ConnectionModel,
    domain: Domain,
    k: usize,
    samples: u64,
    seed: u64,
    param: Parameterization,
    with_cap: bool,
) -> Result<(Estimate, Option<Estimate>)> {
    if k == 0 || k > MAX_COMPONENT_ORDER {
        return Err(Error::OrderTooLarge {
            k,
            max: MAX_COMPONENT_ORDER,
        });
    }
    if samples < 10_000 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least 10000 outer samples, got {samples}"),
        });
    }
    let c = spreading_constant(model, 1e-12)?.value;
    let r = critical_radius(rho, b, c)?;
    let scaled = ScaledModel::new(model.clone(), r)?;
    let rows: Vec<ComponentSample> = (0..samples)
        .into_par_iter()
        .map(|s| component_sample(rho, &scaled, domain, k, seed, s, param, with_cap))
        .collect();

    let prefactor = {
        let lambda = match param {
            Parameterization::Direct => rho,
            Parameterization::Rescaled => rho * r * r,
        };
        let region = match param {
            Parameterization::Direct => 1.0,
            Parameterization::Rescaled => 1.0 / (r * r),
        };
        let mut f = 1.0;
        for i in 1..=k {
            f *= lambda * region / i as f64;
        }
        f
    };
    let n = samples as f64;
    let mean = rows.iter().map(|r| r.value).sum::<f64>() / n;
    let sq = rows.iter().map(|r| (r.value - mean) * (r.value - mean)).sum::<f64>();
    let se = (sq / (n - 1.0)).sqrt() / n.sqrt();
    let bias = rows.iter().map(|r| r.bias).sum::<f64>() / n;
    let estimate = Estimate {
        mean: prefactor * mean,
        stderr: prefactor * (se + bias),
        trials: samples as usize,
    };
    let cap = if with_cap {
        let cmean = rows.iter().map(|r| r.capped).sum::<f64>() / n;
        let csq = rows.iter().map(|r| (r.capped - cmean) * (r.capped - cmean)).sum::<f64>();
        Some(Estimate {
            mean: prefactor * cmean,
            stderr: prefactor * (csq / (n - 1.0)).sqrt() / n.sqrt(),
            trials: samples as usize,
        })
    } else {
        None
    };
    Ok((estimate, cap))
}

/// Expected number of connected components with exactly `k` nodes, by
/// Monte-Carlo integration of the exact component-count integral.
///
/// Each outer sample draws `k` uniform positions, weighs them by the exact
/// probability that they form a connected graph, and damps by
/// `exp(-rho INT coverage)` where the coverage integral over the window is
/// estimated from a stratified sub-sample whose variance (as an exp-bias
/// term) is folded into the reported standard error. Deterministic for a
/// given seed and parallel over outer samples.
pub fn expected_components_order_k(
    rho: f64,
    b: f64,
    model: &ConnectionModel,
    domain: Domain,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    components_core(
        rho,
        b,
        model,
        domain,
        k,
        samples,
        seed,
        Parameterization::Direct,
        false,
    )
    .map(|(e, _)| e)
}

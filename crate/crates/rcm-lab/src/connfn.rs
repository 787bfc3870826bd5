//! Connection profiles and the critical scaling radius.
//!
//! A connection profile `g` maps a normalized distance to a link probability:
//! `g : [0, inf) -> [0, 1]`, non-increasing, with finite positive spreading
//! constant `C = 2 pi INT_0^inf x g(x) dx`. Profiles are used through
//! [`ScaledModel`], which evaluates `g(d / r)` at the critical radius
//! `r = sqrt((ln rho + b) / (C rho))`.

use crate::quad::{self, Quad};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Catalogue of connection profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConnectionModel {
    /// Hard link inside unit distance: `g(x) = 1` for `x <= 1`, else 0.
    UnitDisk,
    /// `g(x) = exp(-x)`.
    Exponential,
    /// `g(x) = exp(-x^2)`.
    Rayleigh,
    /// Log-normal shadowing acceptance profile,
    /// `g(x) = erfc(10 alpha log10(x) / (sigma sqrt 2)) / 2`, `g(0) = 1`.
    LogNormalShadow { sigma: f64, alpha: f64 },
    /// Piecewise-linear interpolation of `(x, g(x))` knots, clamped to the
    /// first value before the first knot and to zero beyond the last.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl ConnectionModel {
    /// Validated log-normal shadowing profile.
    pub fn log_normal_shadow(sigma: f64, alpha: f64) -> Result<Self> {
        let m = ConnectionModel::LogNormalShadow { sigma, alpha };
        m.validate()?;
        Ok(m)
    }

    /// Validated tabulated profile.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        let m = ConnectionModel::Tabulated { knots };
        m.validate()?;
        Ok(m)
    }

    /// Parses the two-column whitespace-separated `(x, g)` text format.
    /// Blank lines and `#` comments are skipped.
    pub fn tabulated_from_str(text: &str) -> Result<Self> {
        let mut knots = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidModel(format!(
                        "line {}: expected two numeric columns, got {raw:?}",
                        lineno + 1
                    )))
            };
            let x = parse(cols.next())?;
            let v = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::InvalidModel(format!(
                    "line {}: expected two numeric columns, got {raw:?}",
                    lineno + 1
                )));
            }
            knots.push((x, v));
        }
        Self::tabulated(knots)
    }

    /// Checks the profile's structural requirements (parameter ranges,
    /// tabulated monotonicity and value range).
    pub fn validate(&self) -> Result<()> {
        match self {
            ConnectionModel::UnitDisk | ConnectionModel::Exponential | ConnectionModel::Rayleigh => Ok(()),
            ConnectionModel::LogNormalShadow { sigma, alpha } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "lognormal sigma must be finite and positive, got {sigma}"
                    )));
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "lognormal alpha must be finite and positive, got {alpha}"
                    )));
                }
                Ok(())
            }
            ConnectionModel::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidModel(format!(
                        "tabulated profile needs at least 2 knots, got {}",
                        knots.len()
                    )));
                }
                for (i, &(x, v)) in knots.iter().enumerate() {
                    if !x.is_finite() || x < 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "knot {i}: abscissa {x} must be finite and non-negative"
                        )));
                    }
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidModel(format!(
                            "knot {i}: value {v} outside [0, 1]"
                        )));
                    }
                    if i > 0 {
                        let (px, pv) = knots[i - 1];
                        if x <= px {
                            return Err(Error::InvalidModel(format!(
                                "knot {i}: abscissa {x} not strictly above previous {px}"
                            )));
                        }
                        if v > pv {
                            return Err(Error::InvalidModel(format!(
                                "knot {i}: value {v} rises above previous {pv}; profile must be non-increasing"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Link probability at normalized distance `x >= 0`. Total on valid
    /// models; negative inputs are clamped to 0 distance.
    pub fn evaluate(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ConnectionModel::UnitDisk => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ConnectionModel::Exponential => (-x).exp(),
            ConnectionModel::Rayleigh => (-(x * x)).exp(),
            ConnectionModel::LogNormalShadow { sigma, alpha } => {
                if x == 0.0 {
                    return 1.0;
                }
                0.5 * libm::erfc(10.0 * alpha * x.log10() / (sigma * SQRT_2))
            }
            ConnectionModel::Tabulated { knots } => {
                let last = knots.len() - 1;
                if x <= knots[0].0 {
                    return knots[0].1;
                }
                if x > knots[last].0 {
                    return 0.0;
                }
                let hi = knots.partition_point(|&(kx, _)| kx < x);
                let (x0, v0) = knots[hi - 1];
                let (x1, v1) = knots[hi];
                let t = (x - x0) / (x1 - x0);
                v0 + t * (v1 - v0)
            }
        }
    }

    /// Normalized distance beyond which `g` is identically zero, when finite.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            ConnectionModel::UnitDisk => Some(1.0),
            ConnectionModel::Tabulated { knots } => Some(knots[knots.len() - 1].0),
            _ => None,
        }
    }

    /// Interior abscissae where `g` kinks or jumps (quadrature breakpoints).
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match self {
            ConnectionModel::UnitDisk => vec![1.0],
            ConnectionModel::Tabulated { knots } => knots.iter().map(|&(x, _)| x).collect(),
            _ => Vec::new(),
        }
    }

    /// Short machine-readable label for output metadata.
    pub fn label(&self) -> String {
        match self {
            ConnectionModel::UnitDisk => "unit-disk".into(),
            ConnectionModel::Exponential => "exponential".into(),
            ConnectionModel::Rayleigh => "rayleigh".into(),
            ConnectionModel::LogNormalShadow { sigma, alpha } => {
                format!("lognormal(sigma={sigma},alpha={alpha})")
            }
            ConnectionModel::Tabulated { knots } => format!("tabulated({} knots)", knots.len()),
        }
    }
}

/// Spreading constant `C = 2 pi INT_0^inf x g(x) dx`.
///
/// Finite-support profiles integrate directly over their support with knot
/// breakpoints; unbounded ones extend the range until the monotone tail
/// bound `2 pi X^2 g(X)` is negligible. A profile that integrates to zero
/// (or whose tail never decays) is rejected.
pub fn spreading_constant(m: &ConnectionModel, tol: f64) -> Result<Quad> {
    m.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    let f = |x: f64| 2.0 * PI * x * m.evaluate(x);
    let q = match m.support_radius() {
        Some(s) => quad::integrate(f, 0.0, s, &m.breakpoints(), tol, tol * 1e-3)?,
        None => quad::integrate_to_infinity(
            f,
            0.0,
            8.0,
            |x| 2.0 * PI * x * x * m.evaluate(x),
            tol,
            tol * 1e-3,
        )?,
    };
    if !(q.value.is_finite() && q.value > 0.0) {
        return Err(Error::InvalidModel(format!(
            "spreading constant must be positive and finite, got {}",
            q.value
        )));
    }
    Ok(q)
}

/// Critical scaling radius `r = sqrt((ln rho + b) / (c rho))`.
pub fn critical_radius(rho: f64, b: f64, c: f64) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("intensity must be finite and positive, got {rho}"),
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: format!("spreading constant must be finite and positive, got {c}"),
        });
    }
    if !b.is_finite() {
        return Err(Error::InvalidParameter {
            name: "b",
            reason: format!("offset must be finite, got {b}"),
        });
    }
    let t = rho.ln() + b;
    if t <= 0.0 {
        return Err(Error::RadiusUndefined { value: t });
    }
    Ok((t / (c * rho)).sqrt())
}

/// A profile evaluated at physical distances through a fixed radius:
/// `g_r(d) = g(d / r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledModel {
    model: ConnectionModel,
    r: f64,
}

impl ScaledModel {
    pub fn new(model: ConnectionModel, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("scaling radius must be finite and positive, got {r}"),
            });
        }
        model.validate()?;
        Ok(Self { model, r })
    }

    #[inline]
    pub fn eval_at_distance(&self, d: f64) -> f64 {
        self.model.evaluate(d / self.r)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn model(&self) -> &ConnectionModel {
        &self.model
    }

    /// Physical distance beyond which links are impossible, when finite.
    pub fn support_distance(&self) -> Option<f64> {
        self.model.support_radius().map(|s| s * self.r)
    }

    /// Physical abscissae of kinks or jumps (quadrature breakpoints).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.model.breakpoints().iter().map(|x| x * self.r).collect()
    }
}

/// Verdict of the heuristic tail-decay check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayVerdict {
    /// Tail weight `x^2 ln^2(x) g(x)` shrinks toward zero on the grid tail.
    Decaying,
    /// Tail weight rises somewhere in the grid tail.
    Violated,
    /// Grid does not reach far enough to judge (finite tabulated data).
    Inconclusive,
}

/// Outcome of [`check_strict_decay`], with the first offending abscissa when
/// the check fails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailDecayReport {
    pub verdict: DecayVerdict,
    pub witness: Option<f64>,
}

/// Heuristic check that `g(x)` decays strictly faster than
/// `1 / (x^2 ln^2 x)`, evaluated as monotonicity of `h(x) = x^2 ln^2(x) g(x)`
/// on the tail of an ascending grid (the portion above `sqrt(max)`).
/// Advisory only: a grid can never certify an asymptotic property, but it
/// reliably flags profiles with fat tails.
pub fn check_strict_decay(m: &ConnectionModel, grid: &[f64]) -> Result<TailDecayReport> {
    m.validate()?;
    if grid.len() < 2 || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "need an ascending positive grid with at least 2 points".into(),
        });
    }
    let h = |x: f64| {
        let l = x.ln();
        x * x * l * l * m.evaluate(x)
    };
    let x_max = *grid.last().expect("non-empty");
    let tail_lo = x_max.sqrt().max(1.0 + 1e-9);
    let tail: Vec<(f64, f64)> = grid
        .iter()
        .copied()
        .filter(|&x| x >= tail_lo)
        .map(|x| (x, h(x)))
        .collect();
    if tail.len() < 8 {
        return Ok(TailDecayReport {
            verdict: DecayVerdict::Inconclusive,
            witness: None,
        });
    }
    for w in tail.windows(2) {
        let (_, h0) = w[0];
        let (x1, h1) = w[1];
        if h1 > h0 * (1.0 + 1e-9) + f64::MIN_POSITIVE {
            return Ok(TailDecayReport {
                verdict: DecayVerdict::Violated,
                witness: Some(x1),
            });
        }
    }
    if tail.iter().all(|&(_, hv)| hv == 0.0) {
        return Ok(TailDecayReport {
            verdict: DecayVerdict::Decaying,
            witness: None,
        });
    }
    // Interpolated data that keeps going past the grid cannot be extrapolated.
    if let ConnectionModel::Tabulated { knots } = m {
        if knots[knots.len() - 1].0 >= x_max {
            return Ok(TailDecayReport {
                verdict: DecayVerdict::Inconclusive,
                witness: None,
            });
        }
    }
    let first = tail[0].1;
    let last = tail[tail.len() - 1].1;
    if last < first {
        Ok(TailDecayReport {
            verdict: DecayVerdict::Decaying,
            witness: None,
        })
    } else {
        Ok(TailDecayReport {
            verdict: DecayVerdict::Inconclusive,
            witness: None,
        })
    }
}

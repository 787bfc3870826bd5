//! Adaptive one-dimensional quadrature.
//!
//! A 15-point Kronrod rule with its embedded 7-point Gauss rule supplies a
//! per-panel error estimate; the driver keeps bisecting the worst panel until
//! the summed error clears the requested tolerance. Integrands with known
//! kinks or jumps should pass those abscissae as breakpoints so panels never
//! straddle them. All routines report the achieved error bound alongside the
//! value.

use crate::{Error, Result};

/// Value plus a conservative absolute-error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub abs_err: f64,
}

// 15-point Kronrod abscissae (positive half, descending) and weights; the
// embedded 7-point Gauss rule lives on the odd-indexed abscissae plus the
// center.
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// Single Kronrod panel: returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let h = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = resk.abs();
    let mut samples = [0.0f64; 15];
    samples[14] = fc;
    for (j, &x) in XGK[..7].iter().enumerate() {
        let dx = h * x;
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        samples[2 * j] = f1;
        samples[2 * j + 1] = f2;
        let fsum = f1 + f2;
        resk += WGK[j] * fsum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }
    // spread of f around its panel mean, used to scale the raw error
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for (j, pair) in samples[..14].chunks(2).enumerate() {
        resasc += WGK[j] * ((pair[0] - reskh).abs() + (pair[1] - reskh).abs());
    }
    let value = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * 1.0f64.min((200.0 * err / resasc).powf(1.5));
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if floor > f64::MIN_POSITIVE {
        err = err.max(floor);
    }
    (value, err)
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

const MAX_PANELS: usize = 4096;

/// Adaptive integral of `f` over `[a, b]`.
///
/// `breakpoints` inside the interval become initial panel boundaries.
/// Stops once the summed error estimate is below
/// `max(tol_abs, tol_rel * |value|)`; errors out if the panel budget is
/// exhausted first.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol_rel: f64,
    tol_abs: f64,
) -> Result<Quad> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::InvalidParameter {
            name: "interval",
            reason: format!("[{a}, {b}] is not a finite ordered interval"),
        });
    }
    if a == b {
        return Ok(Quad {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.insert(0, a);
    cuts.push(b);

    let mut panels: Vec<Panel> = cuts
        .windows(2)
        .map(|w| {
            let (value, err) = gk15(&f, w[0], w[1]);
            Panel {
                a: w[0],
                b: w[1],
                value,
                err,
            }
        })
        .collect();

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let target = tol_abs.max(tol_rel * total.abs());
        if err <= target {
            return Ok(Quad {
                value: total,
                abs_err: err,
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureStalled {
                a,
                b,
                err,
                tol: target,
                panels: panels.len(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .expect("non-empty panel list");
        let Panel { a: pa, b: pb, .. } = panels[worst];
        let mid = 0.5 * (pa + pb);
        if !(mid > pa && mid < pb) {
            // interval no longer splittable in f64; accept what we have
            return Ok(Quad {
                value: total,
                abs_err: err,
            });
        }
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        panels[worst] = Panel {
            a: pa,
            b: mid,
            value: v1,
            err: e1,
        };
        panels.push(Panel {
            a: mid,
            b: pb,
            value: v2,
            err: e2,
        });
    }
}

const MAX_DOUBLINGS: usize = 64;

/// Integral of `f` over `[a, inf)` by range doubling.
///
/// The range `[a, x]` is extended (`x` doubling each round) until
/// `tail_bound(x)`, a caller-supplied upper bound on the remaining mass, is
/// negligible against the accumulated value; the bound is then folded into
/// the reported error. If the bound never clears within the doubling budget
/// the integral is reported divergent, which also catches partial sums that
/// keep growing.
pub fn integrate_to_infinity<F, T>(
    f: F,
    a: f64,
    first_cut: f64,
    tail_bound: T,
    tol_rel: f64,
    tol_abs: f64,
) -> Result<Quad>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let mut hi = if first_cut > a { first_cut } else { a + 1.0 };
    let mut acc = integrate(&f, a, hi, &[], tol_rel * 0.5, tol_abs * 0.5)?;
    for _ in 0..MAX_DOUBLINGS {
        let bound = tail_bound(hi);
        if bound <= tol_abs.max(tol_rel * acc.value.abs()) {
            return Ok(Quad {
                value: acc.value,
                abs_err: acc.abs_err + bound,
            });
        }
        let next = hi * 2.0;
        let piece = integrate(&f, hi, next, &[], tol_rel * 0.5, tol_abs * 0.5)?;
        acc.value += piece.value;
        acc.abs_err += piece.abs_err;
        hi = next;
    }
    Err(Error::TailDivergence {
        x: hi,
        bound: tail_bound(hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x * x, 0.0, 1.0, &[], 1e-12, 1e-15).unwrap();
        assert_relative_eq!(q.value, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn oscillatory_integral_converges() {
        // INT_0^10 sin(x) dx = 1 - cos(10)
        let q = integrate(f64::sin, 0.0, 10.0, &[], 1e-12, 1e-15).unwrap();
        assert_relative_eq!(q.value, 1.0 - 10.0f64.cos(), max_relative = 1e-12);
        assert!(q.abs_err < 1e-10);
    }

    #[test]
    fn breakpoint_makes_step_function_exact() {
        let f = |x: f64| if x < 0.3 { 2.0 } else { 5.0 };
        let q = integrate(f, 0.0, 1.0, &[0.3], 1e-13, 1e-15).unwrap();
        assert_relative_eq!(q.value, 0.3 * 2.0 + 0.7 * 5.0, max_relative = 1e-13);
    }

    #[test]
    fn endpoint_singularity_integrates() {
        // INT_0^1 x^(-1/2) dx = 2
        let q = integrate(|x| x.sqrt().recip(), 1e-300, 1.0, &[], 1e-9, 1e-12).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn error_estimate_brackets_truth() {
        let q = integrate(|x| (x * 7.3).cos() * x.exp(), 0.0, 3.0, &[], 1e-10, 1e-14).unwrap();
        let truth = {
            // INT e^x cos(kx) = e^x (cos(kx) + k sin(kx)) / (1 + k^2)
            let k = 7.3f64;
            let f = |x: f64| x.exp() * ((k * x).cos() + k * (k * x).sin()) / (1.0 + k * k);
            f(3.0) - f(0.0)
        };
        assert!((q.value - truth).abs() <= q.abs_err.max(1e-12));
    }

    #[test]
    fn infinite_range_exponential_tail() {
        // INT_0^inf x e^{-x} dx = 1; tail bound INT_x^inf t e^{-t} = (x+1)e^{-x}
        let q = integrate_to_infinity(
            |x| x * (-x).exp(),
            0.0,
            1.0,
            |x| (x + 1.0) * (-x).exp(),
            1e-11,
            1e-14,
        )
        .unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn divergent_tail_is_reported() {
        let res = integrate_to_infinity(|x| 1.0 / (1.0 + x), 0.0, 1.0, |_| 1.0, 1e-10, 1e-12);
        assert!(matches!(res, Err(Error::TailDivergence { .. })));
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(integrate(|x| x, 1.0, 0.0, &[], 1e-6, 1e-9).is_err());
        assert!(integrate(|x| x, 0.0, f64::INFINITY, &[], 1e-6, 1e-9).is_err());
    }
}

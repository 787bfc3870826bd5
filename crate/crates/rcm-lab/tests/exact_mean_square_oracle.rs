//! Cross-checks the bounded-window isolation mean against an independent
//! construction.
//!
//! The library computes the square-domain mean through a nested quadrature
//! whose inner step merges wall-excluded angular intervals. Here the same
//! number is rebuilt from scratch: disk-in-window areas come from Simpson
//! integration of clipped chords (under a sine substitution), the interior
//! is handled in closed form, and the boundary strip is averaged by Monte
//! Carlo. The two routes share no code.

use rand::Rng;
use rcm_lab::connfn::ConnectionModel;
use rcm_lab::geometry::Domain;
use rcm_lab::{stream, theory};
use std::f64::consts::PI;

/// Area of the radius-`r` disk centered at `(cx, cy)` clipped to the unit
/// window, by chord integration over `x = cx + r sin t`.
fn disk_in_window_area(cx: f64, cy: f64, r: f64) -> f64 {
    let lo = (cx - r).max(-0.5);
    let hi = (cx + r).min(0.5);
    if hi <= lo {
        return 0.0;
    }
    let t0 = ((lo - cx) / r).clamp(-1.0, 1.0).asin();
    let t1 = ((hi - cx) / r).clamp(-1.0, 1.0).asin();
    let integrand = |t: f64| {
        let h = r * t.cos();
        let top = (cy + h).min(0.5);
        let bot = (cy - h).max(-0.5);
        (top - bot).max(0.0) * h
    };
    let n = 1024;
    let dt = (t1 - t0) / n as f64;
    let mut sum = integrand(t0) + integrand(t1);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(t0 + i as f64 * dt);
    }
    sum * dt / 3.0
}

#[test]
fn chord_oracle_reproduces_closed_form_cases() {
    let r = 0.07;
    // interior disk, wall-halved disk, corner-quartered disk
    let full = disk_in_window_area(0.0, 0.0, r);
    let half = disk_in_window_area(0.5, 0.0, r);
    let quarter = disk_in_window_area(0.5, 0.5, r);
    assert!((full - PI * r * r).abs() < 1e-10, "full {full}");
    assert!((half - PI * r * r / 2.0).abs() < 1e-10, "half {half}");
    assert!((quarter - PI * r * r / 4.0).abs() < 1e-10, "quarter {quarter}");
    // one-wall segment cut at distance d < r
    let d = 0.03;
    let seg = r * r * (d / r).acos() - d * (r * r - d * d).sqrt();
    let cut = disk_in_window_area(0.5 - d, 0.0, r);
    assert!((cut - (PI * r * r - seg)).abs() < 1e-9, "cut {cut}");
}

#[test]
fn window_quadrature_matches_the_strip_sampling_oracle() {
    let rho = 500.0f64;
    for (case, b) in [(0usize, 0.0f64), (1, 1.0)] {
        let r = ((rho.ln() + b) / (PI * rho)).sqrt();
        let interior_side = 1.0 - 2.0 * r;
        let strip_area = 1.0 - interior_side * interior_side;
        let mut rng = stream::keyed_rng(&[777, case as u64]);
        let wanted = 60_000usize;
        let mut kept = 0usize;
        let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
        while kept < wanted {
            let x: f64 = rng.random_range(-0.5..0.5);
            let y: f64 = rng.random_range(-0.5..0.5);
            if x.abs() < 0.5 - r && y.abs() < 0.5 - r {
                continue; // interior handled in closed form
            }
            let v = (-rho * disk_in_window_area(x, y, r)).exp();
            sum += v;
            sumsq += v * v;
            kept += 1;
        }
        let n = wanted as f64;
        let strip_mean = sum / n;
        let strip_var = (sumsq - sum * sum / n) / (n - 1.0);
        let oracle = rho
            * (interior_side * interior_side * (-rho * PI * r * r).exp()
                + strip_area * strip_mean);
        let oracle_se = rho * strip_area * (strip_var / n).sqrt();

        let quad = theory::mean_isolated_exact(
            rho,
            b,
            &ConnectionModel::UnitDisk,
            Domain::Square,
            1e-8,
        )
        .unwrap();
        assert!(
            (quad.value - oracle).abs() <= 3.0 * oracle_se + quad.abs_err,
            "b {b}: quadrature {} +- {} vs oracle {oracle} +- {oracle_se}",
            quad.value,
            quad.abs_err
        );
        // the boundary strip is where the extra isolation lives
        assert!(quad.value > (-b).exp() + 0.3, "b {b}: {}", quad.value);
    }
}

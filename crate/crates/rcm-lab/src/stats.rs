//! Small estimate container shared by simulation and integration code.

use serde::Serialize;

/// A point estimate with its standard error and the sample count behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    /// Sample mean and standard error of the mean.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                trials: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self {
                mean,
                stderr: f64::NAN,
                trials: 1,
            };
        }
        let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let var = ss / (n as f64 - 1.0);
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            trials: n,
        }
    }

    /// Binomial proportion with the usual normal-approximation error.
    pub fn from_indicator(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            trials: n,
        }
    }

    /// Whether `other` lies within `k` combined standard errors of `self`.
    pub fn consistent_with(&self, other: f64, other_se: f64, k: f64) -> bool {
        let se = self.stderr.hypot(other_se);
        (self.mean - other).abs() <= k * se
    }
}

/// Renders a number with 9 significant digits, stable under re-parsing.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

//! Error type shared by all modules.

/// Everything that can go wrong when validating inputs or evaluating the
/// numerical machinery. Variants carry enough context to name the failing
/// quantity in CLI diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid connection model: {0}")]
    InvalidModel(String),

    #[error("scaling radius undefined: ln(rho) + b = {value:.6} must be positive")]
    RadiusUndefined { value: f64 },

    #[error("quadrature stalled on [{a:.6e}, {b:.6e}]: error {err:.3e} above tolerance {tol:.3e} after {panels} panels")]
    QuadratureStalled {
        a: f64,
        b: f64,
        err: f64,
        tol: f64,
        panels: usize,
    },

    #[error("integral appears divergent: tail bound still {bound:.3e} after extending the range to {x:.3e}")]
    TailDivergence { x: f64, bound: f64 },

    #[error("pruning cutoff infeasible: suppressed-edge bound {bound:.3e} exceeds budget {target:.3e} even at the domain diameter")]
    CutoffInfeasible { bound: f64, target: f64 },

    #[error("component order {k} unsupported: exact connectivity enumeration is capped at order {max}")]
    OrderTooLarge { k: usize, max: usize },

    #[error("epsilon {epsilon} out of range: must lie in (0, 0.5) and stay below c2/C = {limit:.6}")]
    EpsilonOutOfRange { epsilon: f64, limit: f64 },

    #[error("no scan radius yields positive lens constants for this model")]
    LensDegenerate,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

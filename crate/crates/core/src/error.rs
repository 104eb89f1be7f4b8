use thiserror::Error;

/// Errors surfaced by curve construction, spectral analysis, flow evolution and
/// the verification suites. Variants carry the measured quantity that tripped
/// the check so callers can report actionable diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is not immersed: speed {speed:.3e} at parameter {at:.6} (floor {floor:.3e})")]
    NonImmersed { speed: f64, at: f64, floor: f64 },

    #[error("input samples do not close up: endpoint gap {gap:.3e} exceeds {limit:.3e}")]
    NotClosed { gap: f64, limit: f64 },

    #[error("rotation number residual {residual:.3e} for winding {winding:.6} (need < 0.1 and a positive integer)")]
    RotationResidual { winding: f64, residual: f64 },

    #[error("node count {n} invalid: need a power of two >= 64")]
    InvalidNodeCount { n: usize },

    #[error("resampled curve failed the unit-speed contract: max deviation {max_dev:.3e}")]
    UnitSpeed { max_dev: f64 },

    #[error("bandwidth {bandwidth} too low: discarded tail holds {tail_fraction:.3e} of derivative energy")]
    BandwidthTooLow { bandwidth: usize, tail_fraction: f64 },

    #[error("denominator degenerate in {context}: |value| = {value:.3e}")]
    DegenerateDenominator { context: &'static str, value: f64 },

    #[error("enclosed area {area:.3e} is not positive")]
    NonPositiveArea { area: f64 },

    #[error("remesh failed at t = {t:.6e}: {reason}")]
    RemeshFailed { t: f64, reason: String },

    #[error("check not applicable: {reason}")]
    NotApplicable { reason: String },

    #[error("insufficient resolution: {detail}")]
    InsufficientResolution { detail: String },

    #[error("quantity {name} is not decaying: increase {increase:.3e} beyond slack {slack:.3e}")]
    NotDecaying { name: &'static str, increase: f64, slack: f64 },

    #[error("phase undefined: |f_hat(n)| = {magnitude:.3e} below {floor:.3e}")]
    PhaseUndefined { magnitude: f64, floor: f64 },

    #[error("explicit step unstable: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    StabilityViolation { dt: f64, limit: f64 },

    #[error("polyline too coarse: {points} points, need at least {minimum}")]
    TooCoarse { points: usize, minimum: usize },

    #[error("unknown preset '{name}'")]
    UnknownPreset { name: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

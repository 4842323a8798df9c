use thiserror::Error;

/// Failures raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("|1 + w_alpha| = {value:.3e} falls below the floor at x = {x}, y = {y}")]
    AlphaVanishes { x: f64, y: f64, value: f64 },

    #[error("profile is not integrable along y: {0}")]
    NonIntegrable(String),

    #[error("geometric expansion of v_alpha diverges (ratio {ratio:.6})")]
    SeriesDiverges { ratio: f64 },

    #[error("spectral tail beyond |q| = {q_max:.4} is {tail:.3e}, above tolerance {tol:.1e}")]
    TruncationWarning { q_max: f64, tail: f64, tol: f64 },

    #[error("angle {angle_deg} deg is within the grazing floor of cos(theta) = 0")]
    GrazingAngle { angle_deg: f64 },

    #[error(
        "{what}: quadrature refinement changed the result by {change:.3e} (tolerance {tol:.1e})"
    )]
    QuadratureNotConverged { what: String, change: f64, tol: f64 },

    #[error("discrete momentum shift {shift} lands off the channel grid")]
    DiscreteOffGrid { shift: f64 },

    #[error("{what}: routes disagree by {discrepancy:.3e} (tolerance {tol:.1e})")]
    RouteMismatch {
        what: String,
        discrepancy: f64,
        tol: f64,
    },

    #[error("channel {j} is closed (open channels: 0..={j_max})")]
    ChannelClosed { j: i64, j_max: i64 },

    #[error("not available: {0}")]
    NotDerived(String),

    #[error("mean deviation z0 must be real, got imaginary part {im}")]
    NonRealZ0 { im: f64 },

    #[error("u_minus vanishes at y = {y}")]
    UMinusZero { y: f64 },

    #[error("|eps| = {value:.3e} at y = {y} falls below the floor")]
    FloorViolation { y: f64, value: f64 },

    #[error("coating budget too small: alpha = {alpha} below required {bound}")]
    FeasibilityFail { alpha: f64, bound: f64 },

    #[error("medium mixes discrete and continuous y-spectra")]
    MixedSpectra,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

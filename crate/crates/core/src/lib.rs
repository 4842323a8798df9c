//! Low-frequency scattering of TE/TM waves by inhomogeneities confined to a
//! strip 0 ≤ x ≤ ℓ of the plane.
//!
//! The crate evaluates the first two coefficients f⁽¹⁾, f⁽²⁾ of the expansion
//! 𝔣(θ) = Σₙ f⁽ⁿ⁾(θ)(kℓ)ⁿ of the scattering amplitude, checks them against an
//! independent discretization of the transfer-matrix operators, and provides
//! closed forms for a single-harmonic grating and for two-layer cloaking coatings.
//!
//! Lengths are measured in any fixed unit; angles are radians unless a name
//! ends in `_deg`.

pub mod cloak;
pub mod dyson;
pub mod error;
pub mod grating;
pub mod lowfreq;
pub mod media;
pub mod quad;
pub mod settings;

pub use error::{Error, Result};
pub use settings::Settings;

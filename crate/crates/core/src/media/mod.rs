//! Media on the strip 0 ≤ x ≤ ℓ: profiles, the TE/TM → (α, β) mapping, y-spectra
//! and x̌-moments.

mod field;
mod file;
mod spectrum;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::settings::Settings;

pub use field::{
    merge_harmonics, reciprocal_harmonics, same_momentum, Field, FieldRef, FnField, GaussianExp,
    GridField, Harmonic, HarmonicSum, Reciprocal, Zero,
};
pub use file::{ComplexSpec, MediumFile, ProfileSpec};
pub use spectrum::{
    fourier_y, moments, MomentTable, SpectralKind, SpectralProfile, SpectralValue, Spectrum,
    Symbol, YGrid,
};

/// Polarization; selects which of ε̂, μ̂ plays the role of α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    TE,
    TM,
}

/// Declared decay of the profile along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DecayClass {
    CompactSupport { y_min: f64, y_max: f64 },
    Gaussian { width: f64 },
    Exponential { rate: f64 },
    SingleHarmonic { wavenumber: f64 },
    ConstantInY,
}

impl DecayClass {
    /// True when the profile has an integrable y-Fourier transform.
    pub fn is_decaying(&self) -> bool {
        matches!(
            self,
            DecayClass::CompactSupport { .. }
                | DecayClass::Gaussian { .. }
                | DecayClass::Exponential { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DecayClass::CompactSupport { y_min, y_max } => y_max > y_min,
            DecayClass::Gaussian { width } => width > 0.0,
            DecayClass::Exponential { rate } => rate > 0.0,
            DecayClass::SingleHarmonic { wavenumber } => {
                wavenumber != 0.0 && wavenumber.is_finite()
            }
            DecayClass::ConstantInY => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "bad decay parameters {self:?}"
            )))
        }
    }

    /// y-points used for pointwise admissibility checks.
    pub fn sample_net(&self, extra: &[f64]) -> Vec<f64> {
        let mut ys: Vec<f64> = match *self {
            DecayClass::CompactSupport { y_min, y_max } => (0..=160)
                .map(|i| y_min + (y_max - y_min) * i as f64 / 160.0)
                .collect(),
            DecayClass::Gaussian { width } => (0..=160)
                .map(|i| width * (-6.0 + 0.075 * i as f64))
                .collect(),
            DecayClass::Exponential { rate } => (0..=160)
                .map(|i| (-20.0 + 0.25 * i as f64) / rate)
                .collect(),
            DecayClass::SingleHarmonic { wavenumber } => {
                let period = 2.0 * PI / wavenumber.abs();
                (0..64).map(|i| period * i as f64 / 64.0).collect()
            }
            DecayClass::ConstantInY => vec![0.0],
        };
        ys.extend_from_slice(extra);
        ys
    }
}

/// Physical input: permittivity and permeability deviations on the strip.
#[derive(Debug, Clone)]
pub struct MediumProfile {
    pub w_eps: FieldRef,
    pub w_mu: FieldRef,
    pub ell: f64,
    pub decay: DecayClass,
}

impl MediumProfile {
    pub fn new(w_eps: FieldRef, w_mu: FieldRef, ell: f64, decay: DecayClass) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "strip thickness must be positive, got {ell}"
            )));
        }
        decay.validate()?;
        Ok(MediumProfile {
            w_eps,
            w_mu,
            ell,
            decay,
        })
    }

    pub fn vacuum(ell: f64) -> Result<Self> {
        Self::new(Arc::new(Zero), Arc::new(Zero), ell, DecayClass::ConstantInY)
    }

    /// Homogeneous slab with constant deviations.
    pub fn slab(eps_dev: Complex64, mu_dev: Complex64, ell: f64) -> Result<Self> {
        Self::new(
            Arc::new(HarmonicSum::constant(eps_dev)),
            Arc::new(HarmonicSum::constant(mu_dev)),
            ell,
            DecayClass::ConstantInY,
        )
    }

    /// Nonmagnetic grating ε̂ = 1 + z0 + z1 e^{iKy}.
    pub fn grating(z0: Complex64, z1: Complex64, k_grating: f64, ell: f64) -> Result<Self> {
        Self::new(
            Arc::new(HarmonicSum::grating(z0, z1, k_grating)),
            Arc::new(Zero),
            ell,
            DecayClass::SingleHarmonic {
                wavenumber: k_grating,
            },
        )
    }

    /// Deviations amp·e^{−κx}e^{−y²/2L²} in ε̂ and μ̂ (κ in inverse length units).
    pub fn gaussian_exp(
        eps_amp: Complex64,
        mu_amp: Complex64,
        kappa: f64,
        width: f64,
        ell: f64,
    ) -> Result<Self> {
        let field = |amp: Complex64| -> FieldRef {
            if amp == Complex64::new(0.0, 0.0) {
                Arc::new(Zero)
            } else {
                Arc::new(GaussianExp {
                    amp,
                    decay: kappa * ell,
                    width,
                })
            }
        };
        Self::new(
            field(eps_amp),
            field(mu_amp),
            ell,
            DecayClass::Gaussian { width },
        )
    }
}

/// Computational input: (w_α, w_β, v_α) for a fixed mode.
#[derive(Debug, Clone)]
pub struct AlphaBetaProfile {
    pub w_alpha: FieldRef,
    pub w_beta: FieldRef,
    pub v_alpha: FieldRef,
    pub mode: ModeKind,
    pub ell: f64,
    pub decay: DecayClass,
}

impl AlphaBetaProfile {
    pub fn field(&self, s: Symbol) -> &FieldRef {
        match s {
            Symbol::WAlpha => &self.w_alpha,
            Symbol::WBeta => &self.w_beta,
            Symbol::VAlpha => &self.v_alpha,
        }
    }

    /// Union of interior x̌-kinks of all components along the column at y.
    pub fn x_breaks(&self, y: f64) -> Vec<f64> {
        let mut b = self.w_alpha.x_breaks(y);
        b.extend(self.w_beta.x_breaks(y));
        b
    }

    pub fn is_zero(&self) -> bool {
        self.w_alpha.is_zero() && self.w_beta.is_zero()
    }
}

/// Map a medium to its (α, β) representation for the given mode.
pub fn to_alpha_beta(
    profile: &MediumProfile,
    mode: ModeKind,
    settings: &Settings,
) -> Result<AlphaBetaProfile> {
    let (w_alpha, w_beta) = match mode {
        ModeKind::TE => (profile.w_mu.clone(), profile.w_eps.clone()),
        ModeKind::TM => (profile.w_eps.clone(), profile.w_mu.clone()),
    };
    let v_alpha: FieldRef = if w_alpha.is_zero() {
        Arc::new(Zero)
    } else {
        Arc::new(Reciprocal::new(w_alpha.clone(), settings.series_tol))
    };
    if !w_alpha.is_zero() {
        let ys = profile.decay.sample_net(&w_alpha.y_breaks());
        for &y in &ys {
            let mut xs: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
            xs.extend(w_alpha.x_breaks(y));
            for x in xs {
                let value = (w_alpha.value(x, y) + 1.0).norm();
                if !(value >= settings.delta_floor) {
                    return Err(Error::AlphaVanishes { x, y, value });
                }
            }
        }
    }
    let ab = AlphaBetaProfile {
        w_alpha,
        w_beta,
        v_alpha,
        mode,
        ell: profile.ell,
        decay: profile.decay,
    };
    spectrum::check_decay(&ab)?;
    Ok(ab)
}

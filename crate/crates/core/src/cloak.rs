//! Low-frequency invisibility conditions and two-layer coatings that hide a
//! nonmagnetic slab from low-frequency TE and TM waves.
//!
//! The slab occupies 0 < x < ℓ⋆; layers of permittivity ε̂₋(y) and ε̂₊(y) and
//! thickness ℓ₋(y), ℓ₊(y) follow it, and the rest of the strip is vacuum.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{
    AlphaBetaProfile, DecayClass, Field, FieldRef, FnField, MediumProfile, ModeKind, Zero,
};
use crate::quad;
use crate::settings::Settings;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Residuals ∫dx/α − ℓ, ∫ε̂dx − ℓ, ∫μ̂dx − ℓ on one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnResidual {
    pub y: f64,
    pub inv_alpha: C,
    pub eps: C,
    pub mu: C,
}

impl ColumnResidual {
    pub fn max_abs(&self) -> f64 {
        self.inv_alpha
            .norm()
            .max(self.eps.norm())
            .max(self.mu.norm())
    }
}

/// Column integrals of v_α, w_α, w_β over x̌ ∈ [0, 1].
fn column_means(ab: &AlphaBetaProfile, y: f64, n: usize, settings: &Settings) -> Result<[C; 3]> {
    let rule = quad::composite(&quad::merge_breaks(0.0, 1.0, &ab.x_breaks(y)), n);
    let mut out = [ZERO; 3];
    for (x, w) in rule.iter() {
        let wa = ab.w_alpha.value(x, y);
        let value = (wa + 1.0).norm();
        if !(value >= settings.delta_floor) {
            return Err(Error::AlphaVanishes { x, y, value });
        }
        out[0] += ab.v_alpha.value(x, y) * w;
        out[1] += wa * w;
        out[2] += ab.w_beta.value(x, y) * w;
    }
    Ok(out)
}

/// Evaluate the three invisibility residuals at each y, refining the x-rule
/// until it is stable well below `residual_tol`.
pub fn invisibility_residuals(
    ab: &AlphaBetaProfile,
    ys: &[f64],
    settings: &Settings,
) -> Result<Vec<ColumnResidual>> {
    ys.par_iter()
        .map(|&y| {
            let mut n = settings.x_nodes;
            let mut coarse = column_means(ab, y, n, settings)?;
            let means = loop {
                let fine = column_means(ab, y, 2 * n, settings)?;
                let change = coarse
                    .iter()
                    .zip(&fine)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                if change <= 1e-3 * settings.residual_tol {
                    break fine;
                }
                if n >= 64 * settings.x_nodes {
                    return Err(Error::QuadratureNotConverged {
                        what: format!("invisibility residual at y = {y}"),
                        change,
                        tol: 1e-3 * settings.residual_tol,
                    });
                }
                n *= 2;
                coarse = fine;
            };
            let ell = ab.ell;
            // 1/α = 1 − v_α, and ε̂, μ̂ follow the mode mapping back.
            let (eps, mu) = match ab.mode {
                ModeKind::TM => (means[1], means[2]),
                ModeKind::TE => (means[2], means[1]),
            };
            Ok(ColumnResidual {
                y,
                inv_alpha: -means[0] * ell,
                eps: eps * ell,
                mu: mu * ell,
            })
        })
        .collect()
}

/// True when ε̂(ℓ − x, y)* = ε̂(x, y) to within `tol` on the profile's sample net.
pub fn pt_symmetric(profile: &MediumProfile, tol: f64) -> bool {
    let w = &profile.w_eps;
    profile
        .decay
        .sample_net(&w.y_breaks())
        .into_iter()
        .all(|y| {
            (0..64)
                .map(|i| (i as f64 + 0.5) / 64.0)
                .all(|x| (w.value(1.0 - x, y).conj() - w.value(x, y)).norm() < tol)
        })
}

/// Sign ς selecting one of the two coating solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Sign> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            _ => Err(Error::InvalidInput(format!(
                "sign must be + or -, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

type MeanFn = dyn Fn(f64) -> [C; 2] + Send + Sync;

/// The slab to be hidden: ε̂⋆ − 1 as a function of (x, y), 0 ≤ x ≤ ℓ⋆.
#[derive(Clone)]
pub struct SlabSpec {
    deviation: FieldRef,
    pub ell_star: f64,
    pub decay: DecayClass,
    closed_form: Option<Arc<MeanFn>>,
}

impl fmt::Debug for SlabSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlabSpec")
            .field("deviation", &self.deviation)
            .field("ell_star", &self.ell_star)
            .field("decay", &self.decay)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl SlabSpec {
    pub fn new(deviation: FieldRef, ell_star: f64, decay: DecayClass) -> Result<Self> {
        if !(ell_star > 0.0 && ell_star.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "slab thickness must be positive, got {ell_star}"
            )));
        }
        Ok(SlabSpec {
            deviation,
            ell_star,
            decay,
            closed_form: None,
        })
    }

    /// ε̂⋆ = 1 + z e^{−κx} e^{−y²/2L²}, with the column means in closed form.
    pub fn gaussian_exp(z: f64, kappa: f64, width: f64, ell_star: f64) -> Result<Self> {
        for (name, v) in [("z", z), ("kappa", kappa), ("width", width)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let field = FnField::new("gaussian_exp slab", move |x, y| {
            C::new(z * (-kappa * x - 0.5 * (y / width).powi(2)).exp(), 0.0)
        });
        let mut slab = Self::new(Arc::new(field), ell_star, DecayClass::Gaussian { width })?;
        let kl = kappa * ell_star;
        slab.closed_form = Some(Arc::new(move |y| {
            let g = z * (-0.5 * (y / width).powi(2)).exp();
            let plus = g * (-(-kl).exp_m1()) / kl;
            let minus = -((g).ln_1p() - (g * (-kl).exp()).ln_1p()) / kl;
            [C::new(minus, 0.0), C::new(plus, 0.0)]
        }));
        Ok(slab)
    }

    pub fn deviation(&self) -> &FieldRef {
        &self.deviation
    }

    pub fn eps_star(&self, x: f64, y: f64) -> C {
        self.deviation.value(x, y) + 1.0
    }

    /// 𝓔₋ − 1 and 𝓔₊ − 1 on the column at y.
    pub fn mean_deviations(&self, y: f64, settings: &Settings) -> Result<[C; 2]> {
        match &self.closed_form {
            Some(f) => Ok(f(y)),
            None => self.quadrature_deviations(y, settings),
        }
    }

    /// 𝓔₋ − 1 and 𝓔₊ − 1 by x-quadrature, doubling panels until stable.
    pub fn quadrature_deviations(&self, y: f64, settings: &Settings) -> Result<[C; 2]> {
        let kinks: Vec<f64> = self.deviation.x_breaks(y);
        let eval = |panels: usize| -> Result<[C; 2]> {
            let mut br = quad::uniform_breaks(0.0, self.ell_star, panels);
            br.extend(kinks.iter().copied());
            let rule = quad::composite(
                &quad::merge_breaks(0.0, self.ell_star, &br),
                settings.x_nodes,
            );
            let mut acc = [ZERO; 2];
            for (x, w) in rule.iter() {
                let d = self.deviation.value(x, y);
                let value = (d + 1.0).norm();
                if !(value >= settings.delta_floor) {
                    return Err(Error::AlphaVanishes { x, y, value });
                }
                acc[0] -= d / (d + 1.0) * w;
                acc[1] += d * w;
            }
            Ok(acc.map(|a| a / self.ell_star))
        };
        let mut panels = 1;
        let mut coarse = eval(panels)?;
        loop {
            let fine = eval(2 * panels)?;
            let change = (fine[0] - coarse[0])
                .norm()
                .max((fine[1] - coarse[1]).norm());
            let scale = fine[0].norm().max(fine[1].norm());
            if change <= 1e-13 * scale.max(1.0) {
                return Ok(fine);
            }
            if panels >= 256 {
                return Err(Error::QuadratureNotConverged {
                    what: format!("slab column means at y = {y}"),
                    change,
                    tol: 1e-13,
                });
            }
            panels *= 2;
            coarse = fine;
        }
    }

    /// Real ε̂⋆ ≥ 1 at the sample points.
    pub fn is_lossless(&self, ys: &[f64]) -> bool {
        ys.iter().all(|&y| {
            (0..=32).all(|i| {
                let d = self.deviation.value(self.ell_star * i as f64 / 32.0, y);
                d.im == 0.0 && d.re >= 0.0
            })
        })
    }

    /// The uncoated slab placed in a strip of thickness `ell`.
    pub fn profile(&self, ell: f64) -> Result<MediumProfile> {
        if !(ell >= self.ell_star) {
            return Err(Error::InvalidInput(format!(
                "strip {ell} thinner than the slab {}",
                self.ell_star
            )));
        }
        let field = BareSlab {
            slab: self.clone(),
            ell,
        };
        MediumProfile::new(Arc::new(field), Arc::new(Zero), ell, self.decay)
    }
}

#[derive(Debug)]
struct BareSlab {
    slab: SlabSpec,
    ell: f64,
}

impl Field for BareSlab {
    fn value(&self, x: f64, y: f64) -> C {
        let x = x * self.ell;
        if x < self.slab.ell_star {
            self.slab.deviation.value(x, y)
        } else {
            ZERO
        }
    }
    fn x_breaks(&self, y: f64) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .slab
            .deviation
            .x_breaks(y)
            .iter()
            .map(|x| x / self.ell)
            .collect();
        b.push(self.slab.ell_star / self.ell);
        b
    }
}

type Shape = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Layer thicknesses ℓ₋(y), ℓ₊(y).
#[derive(Clone)]
pub struct LayerShapes {
    minus: Shape,
    plus: Shape,
    label: String,
}

impl fmt::Debug for LayerShapes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LayerShapes({})", self.label)
    }
}

impl LayerShapes {
    pub fn new(
        minus: impl Fn(f64) -> f64 + Send + Sync + 'static,
        plus: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LayerShapes {
            minus: Arc::new(minus),
            plus: Arc::new(plus),
            label: "custom".into(),
        }
    }

    /// ℓ₋ = ℓ₊ = shape(y).
    pub fn equal(shape: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let s: Shape = Arc::new(shape);
        LayerShapes {
            minus: s.clone(),
            plus: s,
            label: "equal".into(),
        }
    }

    /// ℓ₋ = ℓ₊ = amp · e^{−y²/2L²}.
    pub fn gaussian(amp: f64, width: f64) -> Self {
        let mut s = Self::equal(move |y| amp * (-0.5 * (y / width).powi(2)).exp());
        s.label = format!("gaussian(amp = {amp}, width = {width})");
        s
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn constant(minus: f64, plus: f64) -> Self {
        let mut s = Self::new(move |_| minus, move |_| plus);
        s.label = format!("constant({minus}, {plus})");
        s
    }

    /// (ℓ₋(y), ℓ₊(y)), validated non-negative.
    pub fn at(&self, y: f64) -> Result<(f64, f64)> {
        let (m, p) = ((self.minus)(y), (self.plus)(y));
        if !(m >= 0.0 && p >= 0.0 && m.is_finite() && p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "layer thicknesses must be non-negative, got ({m}, {p}) at y = {y}"
            )));
        }
        Ok((m, p))
    }
}

/// Coating solution and diagnostics on one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerSolution {
    pub y: f64,
    pub ell_minus: f64,
    pub ell_plus: f64,
    /// 𝓔₋, 𝓔₊.
    pub e_minus: C,
    pub e_plus: C,
    pub u_minus: C,
    pub u_plus: C,
    pub u0: C,
    pub eps_minus: C,
    pub eps_plus: C,
    /// Residuals of the two column conditions ℓ̂₋ε̂₋ + ℓ̂₊ε̂₊ = u₊ and ℓ̂₋/ε̂₋ + ℓ̂₊/ε̂₊ = u₋.
    pub residuals: [C; 2],
    /// False where no coating is needed (ℓ± = 0 on an already invisible column).
    pub coated: bool,
}

impl LayerSolution {
    pub fn ell_total(&self, ell_star: f64) -> f64 {
        ell_star + self.ell_minus + self.ell_plus
    }
}

/// Solve the two column conditions for ε̂±, given the slab deviations
/// d± = 𝓔± − 1 and the layer thicknesses.
pub fn solve_column(
    y: f64,
    d: [C; 2],
    ell_star: f64,
    ell_minus: f64,
    ell_plus: f64,
    sigma: Sign,
    settings: &Settings,
) -> Result<LayerSolution> {
    let total = ell_minus + ell_plus;
    let (e_minus, e_plus) = (d[0] + 1.0, d[1] + 1.0);
    let mut out = LayerSolution {
        y,
        ell_minus,
        ell_plus,
        e_minus,
        e_plus,
        u_minus: ZERO,
        u_plus: ZERO,
        u0: ZERO,
        eps_minus: ONE,
        eps_plus: ONE,
        residuals: [ZERO; 2],
        coated: false,
    };
    if total == 0.0 {
        let leftover = d[0].norm().max(d[1].norm()) * ell_star;
        if leftover <= settings.residual_tol {
            out.residuals = [d[1], d[0]];
            return Ok(out);
        }
        return Err(Error::InvalidInput(format!(
            "no coating at y = {y} but the slab column is not invisible"
        )));
    }
    if ell_minus == 0.0 || ell_plus == 0.0 {
        return Err(Error::InvalidInput(format!(
            "both layers are needed at y = {y}, got ({ell_minus}, {ell_plus})"
        )));
    }
    // Everything below is scaled by 1/(ℓ̂₋ + ℓ̂₊) so thin coatings stay well conditioned.
    let um = (C::from(total) - d[0] * ell_star) / total;
    let up = (C::from(total) - d[1] * ell_star) / total;
    if um.norm() <= 1e-13 {
        return Err(Error::UMinusZero { y });
    }
    let (hm, hp) = (ell_minus / total, ell_plus / total);
    let uu = um * up;
    let mut radicand = (uu - (hp - hm).powi(2)) * (uu - (hp + hm).powi(2));
    if radicand.im == 0.0 {
        // Negative reals map to +i|·| under the principal root.
        radicand.im = 0.0;
    }
    let u0 = radicand.sqrt();
    let s = sigma.value();
    let split = C::from(hp * hp - hm * hm) + u0 * s;
    let eps_minus = (uu - split) / (um * (2.0 * hm));
    let eps_plus = (uu + split) / (um * (2.0 * hp));
    for eps in [eps_minus, eps_plus] {
        if !(eps.norm() >= settings.delta_floor) {
            return Err(Error::FloorViolation {
                y,
                value: eps.norm(),
            });
        }
    }
    let scale = total / (ell_star + total);
    out.u_minus = um * scale;
    out.u_plus = up * scale;
    out.u0 = u0 * (scale * scale);
    out.eps_minus = eps_minus;
    out.eps_plus = eps_plus;
    out.residuals = [
        (eps_minus * hm + eps_plus * hp - up) * scale,
        (ONE / eps_minus * hm + ONE / eps_plus * hp - um) * scale,
    ];
    out.coated = true;
    Ok(out)
}

/// A solved coating on a set of y-samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloakDesign {
    pub ell_star: f64,
    pub sigma: Sign,
    pub columns: Vec<LayerSolution>,
}

impl CloakDesign {
    /// Largest coated thickness ℓ_𝒮 over the samples.
    pub fn ell_total(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.ell_total(self.ell_star))
            .fold(self.ell_star, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.columns
            .iter()
            .flat_map(|c| c.residuals)
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }
}

/// 256 points over the declared y-support of a decay class.
pub fn default_y_samples(decay: &DecayClass) -> Vec<f64> {
    let (a, b) = match *decay {
        DecayClass::CompactSupport { y_min, y_max } => (y_min, y_max),
        DecayClass::Gaussian { width } => (-6.0 * width, 6.0 * width),
        DecayClass::Exponential { rate } => (-20.0 / rate, 20.0 / rate),
        DecayClass::SingleHarmonic { wavenumber } => (0.0, 2.0 * PI / wavenumber.abs()),
        DecayClass::ConstantInY => (0.0, 0.0),
    };
    (0..256).map(|i| a + (b - a) * i as f64 / 255.0).collect()
}

/// Solve for the coating permittivities at each sample.
pub fn solve_layers(
    slab: &SlabSpec,
    shapes: &LayerShapes,
    sigma: Sign,
    ys: &[f64],
    settings: &Settings,
) -> Result<CloakDesign> {
    let columns = ys
        .par_iter()
        .map(|&y| {
            let (lm, lp) = shapes.at(y)?;
            solve_column(
                y,
                slab.mean_deviations(y, settings)?,
                slab.ell_star,
                lm,
                lp,
                sigma,
                settings,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CloakDesign {
        ell_star: slab.ell_star,
        sigma,
        columns,
    })
}

/// Per-column feasibility of a coating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub y: f64,
    pub e_minus: C,
    pub e_plus: C,
    /// Real slab permittivity ≥ 1 on this column.
    pub lossless: bool,
    /// 0 < 𝓔₋ < 1 < 𝓔₊.
    pub mean_order: bool,
    /// 𝓔₋ + 𝓔₊ > 2.
    pub mean_sum: bool,
    pub u_minus_positive: bool,
    /// u₋u₊ < (ℓ̂₋ + ℓ̂₊)².
    pub product_bound: bool,
    /// Thickness conditions giving Re ε̂± > 0 (the equal-thickness form when ℓ₋ = ℓ₊).
    pub positive_real_parts: bool,
    /// u₋u₊ > |ℓ̂₋² − ℓ̂₊²|, which makes u₀ purely imaginary.
    pub u0_imaginary: bool,
    /// Whether real, positive ε̂± exist on this column.
    pub real_positive_possible: bool,
}

/// Numeric test of whether either sign gives real positive ε̂±.
fn real_positive_pair(d: [C; 2], ell_star: f64, lm: f64, lp: f64, settings: &Settings) -> bool {
    [Sign::Plus, Sign::Minus].into_iter().any(|s| {
        match solve_column(0.0, d, ell_star, lm, lp, s, settings) {
            Ok(sol) => [sol.eps_minus, sol.eps_plus]
                .iter()
                .all(|e| e.re > 0.0 && e.im.abs() <= 1e-12 * e.norm()),
            Err(_) => false,
        }
    })
}

/// Report the feasibility conditions for the given layer shapes.
pub fn feasibility(
    slab: &SlabSpec,
    shapes: &LayerShapes,
    ys: &[f64],
    settings: &Settings,
) -> Result<Vec<FeasibilityReport>> {
    ys.par_iter()
        .map(|&y| {
            let d = slab.mean_deviations(y, settings)?;
            let (lm, lp) = shapes.at(y)?;
            let ls = slab.ell_star;
            let lossless = slab.is_lossless(&[y]);
            let (em, ep) = (d[0] + 1.0, d[1] + 1.0);
            let total = lm + lp;
            let full = ls + total;
            let (hm, hp) = (lm / full, lp / full);
            let um = C::from(total) - d[0] * ls;
            let up = C::from(total) - d[1] * ls;
            let uu = (um * up) / (full * full);
            let (emr, epr) = (em.re, ep.re);
            let positive_real_parts = if lossless {
                let lmin = lm.min(lp);
                if lm == lp {
                    lp > 0.5 * (epr - 1.0) * ls
                } else {
                    let denom = 2.0 * lmin + (2.0 - emr - epr) * ls;
                    lmin > 0.5 * (emr + epr - 2.0) * ls
                        && total > (epr - 1.0) * (1.0 - emr) * ls * ls / denom
                }
            } else {
                solve_column(y, d, ls, lm, lp, Sign::Minus, settings)
                    .map(|s| s.eps_minus.re > 0.0 && s.eps_plus.re > 0.0)
                    .unwrap_or(false)
            };
            Ok(FeasibilityReport {
                y,
                e_minus: em,
                e_plus: ep,
                lossless,
                mean_order: 0.0 < emr && emr < 1.0 && 1.0 < epr,
                mean_sum: emr + epr > 2.0,
                u_minus_positive: um.re / full > 0.0 && um.im == 0.0,
                product_bound: uu.re < (hm + hp).powi(2),
                positive_real_parts,
                u0_imaginary: uu.im == 0.0 && uu.re > (hm * hm - hp * hp).abs(),
                real_positive_possible: !lossless && real_positive_pair(d, ls, lm, lp, settings),
            })
        })
        .collect()
}

/// ρ = 1 − z(1 − e^{−κℓ⋆})/(2ακℓ⋆), the common real part of ε̂± in the
/// Gaussian-exponential design.
pub fn gaussian_exp_real_part(z: f64, kappa: f64, alpha: f64, ell_star: f64) -> f64 {
    let kl = kappa * ell_star;
    1.0 + z * (-kl).exp_m1() / (2.0 * alpha * kl)
}

/// Coating for ε̂⋆ = 1 + z e^{−κx}e^{−y²/2L²} with ℓ± = αℓ⋆e^{−y²/2L²}.
pub fn gaussian_exp_design(
    z: f64,
    kappa: f64,
    width: f64,
    alpha: f64,
    ell_star: f64,
    sigma: Sign,
    ys: &[f64],
    settings: &Settings,
) -> Result<CloakDesign> {
    let (slab, shapes) = gaussian_exp_setup(z, kappa, width, alpha, ell_star)?;
    solve_layers(&slab, &shapes, sigma, ys, settings)
}

/// Slab and layer shapes of the Gaussian-exponential design.
pub fn gaussian_exp_setup(
    z: f64,
    kappa: f64,
    width: f64,
    alpha: f64,
    ell_star: f64,
) -> Result<(SlabSpec, LayerShapes)> {
    if !(alpha > 0.0 && ell_star > 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha and ell_star must be positive, got {alpha}, {ell_star}"
        )));
    }
    let slab = SlabSpec::gaussian_exp(z, kappa, width, ell_star)?;
    let bound = z / (2.0 * kappa * ell_star);
    if alpha <= bound {
        return Err(Error::FeasibilityFail { alpha, bound });
    }
    Ok((slab, LayerShapes::gaussian(alpha * ell_star, width)))
}

type Column = Option<(f64, f64, C, C)>;

/// ε̂ − 1 of the coated slab in a strip of thickness ℓ, re-solving the
/// coating on every column it is evaluated on.
pub struct CoatedSlab {
    slab: SlabSpec,
    shapes: LayerShapes,
    sigma: Sign,
    settings: Settings,
    ell: f64,
    cache: Mutex<HashMap<u64, Column>>,
}

impl fmt::Debug for CoatedSlab {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoatedSlab")
            .field("slab", &self.slab)
            .field("shapes", &self.shapes)
            .field("sigma", &self.sigma)
            .field("ell", &self.ell)
            .finish()
    }
}

impl CoatedSlab {
    /// `ell` defaults to the largest ℓ_𝒮 on the default sample net; every
    /// column of that net must be solvable and fit in the strip.
    pub fn new(
        slab: SlabSpec,
        shapes: LayerShapes,
        sigma: Sign,
        ell: Option<f64>,
        settings: &Settings,
    ) -> Result<Self> {
        let mut ys = default_y_samples(&slab.decay);
        ys.push(0.0);
        let design = solve_layers(&slab, &shapes, sigma, &ys, settings)?;
        let needed = design.ell_total();
        let ell = ell.unwrap_or(needed);
        if ell < needed * (1.0 - 1e-14) {
            return Err(Error::InvalidInput(format!(
                "strip thickness {ell} below the coated thickness {needed}"
            )));
        }
        Ok(CoatedSlab {
            slab,
            shapes,
            sigma,
            settings: *settings,
            ell,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// The coated slab as a nonmagnetic medium.
    pub fn profile(self) -> Result<MediumProfile> {
        let (ell, decay) = (self.ell, self.slab.decay);
        MediumProfile::new(Arc::new(self), Arc::new(Zero), ell, decay)
    }

    fn column(&self, y: f64) -> Column {
        if let Some(c) = self.cache.lock().expect("cache lock").get(&y.to_bits()) {
            return *c;
        }
        let solved = self.shapes.at(y).ok().and_then(|(lm, lp)| {
            let d = self.slab.mean_deviations(y, &self.settings).ok()?;
            let s =
                solve_column(y, d, self.slab.ell_star, lm, lp, self.sigma, &self.settings).ok()?;
            Some((lm, lp, s.eps_minus - 1.0, s.eps_plus - 1.0))
        });
        self.cache
            .lock()
            .expect("cache lock")
            .insert(y.to_bits(), solved);
        solved
    }
}

impl Field for CoatedSlab {
    fn value(&self, x: f64, y: f64) -> C {
        let x = x * self.ell;
        let ls = self.slab.ell_star;
        if x < ls {
            return self.slab.deviation.value(x, y);
        }
        match self.column(y) {
            Some((lm, lp, dm, dp)) => {
                if x < ls + lm {
                    dm
                } else if x < ls + lm + lp {
                    dp
                } else {
                    ZERO
                }
            }
            None => C::new(f64::NAN, f64::NAN),
        }
    }

    fn x_breaks(&self, y: f64) -> Vec<f64> {
        let ls = self.slab.ell_star;
        let mut b: Vec<f64> = self
            .slab
            .deviation
            .x_breaks(y)
            .iter()
            .map(|x| x / self.ell)
            .collect();
        b.push(ls / self.ell);
        if let Some((lm, lp, _, _)) = self.column(y) {
            b.push((ls + lm) / self.ell);
            b.push((ls + lm + lp) / self.ell);
        }
        b.retain(|x| *x > 0.0 && *x < 1.0);
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_parses() {
        assert_eq!("+".parse::<Sign>().unwrap(), Sign::Plus);
        assert_eq!("minus".parse::<Sign>().unwrap(), Sign::Minus);
        assert!("x".parse::<Sign>().is_err());
        assert_eq!(Sign::Plus.flipped().to_string(), "-");
    }

    #[test]
    fn uncoated_invisible_column_passes_through() {
        let s = solve_column(
            0.0,
            [ZERO; 2],
            1.0,
            0.0,
            0.0,
            Sign::Minus,
            &Settings::default(),
        )
        .unwrap();
        assert!(!s.coated);
        assert_eq!((s.eps_minus, s.eps_plus), (ONE, ONE));
    }

    #[test]
    fn vanishing_u_minus_is_reported() {
        // ℓ₋ + ℓ₊ = ℓ⋆(𝓔₋ − 1) makes u₋ vanish.
        let d = [C::new(0.5, 0.0), C::new(0.1, 0.0)];
        let err = solve_column(2.0, d, 1.0, 0.25, 0.25, Sign::Plus, &Settings::default());
        assert!(matches!(err, Err(Error::UMinusZero { y }) if y == 2.0));
    }
}

//! Single-harmonic grating ε̂ = 1 + z0 + z1 e^{iKy} on the strip (TM, nonmagnetic):
//! diffraction channels, closed-form channel weights τ⁽¹⁾, τ⁽²⁾, the Brewster
//! configuration, and data behind the published figures.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lowfreq::wrap_angle;
use crate::media::MediumProfile;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingSpec {
    pub z0: Complex64,
    pub z1: Complex64,
    /// Grating wavenumber K.
    pub k_grating: f64,
    /// Strip thickness ℓ.
    pub ell: f64,
}

impl GratingSpec {
    pub fn new(z0: Complex64, z1: Complex64, k_grating: f64, ell: f64) -> Result<Self> {
        if !(k_grating > 0.0 && k_grating.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grating wavenumber must be positive, got {k_grating}"
            )));
        }
        if !(ell > 0.0) {
            return Err(Error::InvalidInput(format!(
                "thickness must be positive, got {ell}"
            )));
        }
        let ratio = z1.norm() / (z0 + 1.0).norm();
        if ratio >= 1.0 {
            return Err(Error::SeriesDiverges { ratio });
        }
        Ok(GratingSpec {
            z0,
            z1,
            k_grating,
            ell,
        })
    }

    /// InGaAsP parameters z0 = 10.58, z1 = 0.07 with ℓ = 100 nm, K = π µm⁻¹ (lengths in µm).
    pub fn ingaasp() -> Self {
        GratingSpec {
            z0: Complex64::new(10.58, 0.0),
            z1: Complex64::new(0.07, 0.0),
            k_grating: PI,
            ell: 0.1,
        }
    }

    /// Geometric coefficient 𝔞_j of v_α = Σ 𝔞_j e^{ijKy}.
    pub fn a(&self, j: usize) -> Complex64 {
        let d = self.z0 + 1.0;
        if j == 0 {
            self.z0 / d
        } else {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            self.z1.powu(j as u32) / d.powu(j as u32 + 1) * sign
        }
    }

    pub fn medium(&self) -> Result<MediumProfile> {
        MediumProfile::grating(self.z0, self.z1, self.k_grating, self.ell)
    }

    fn z(&self, j: usize) -> Complex64 {
        match j {
            0 => self.z0,
            1 => self.z1,
            _ => Complex64::new(0.0, 0.0),
        }
    }
}

/// Incidence data: wavenumber with sine and cosine of θ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub k: f64,
    pub s0: f64,
    pub c0: f64,
}

impl Incidence {
    pub fn from_angle(k: f64, theta0: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        if theta0.cos() == 0.0 {
            return Err(Error::GrazingAngle {
                angle_deg: theta0.to_degrees(),
            });
        }
        Ok(Incidence {
            k,
            s0: theta0.sin(),
            c0: theta0.cos(),
        })
    }

    pub fn theta0(&self) -> f64 {
        wrap_angle(self.s0.atan2(self.c0))
    }
}

/// One open diffraction order j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub j: usize,
    pub s: f64,
    /// cos θ_{j+} > 0.
    pub cos_plus: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// J = ⌊(k/K)(1 − sin θ₀)⌋.
    pub j_max: usize,
    pub channels: Vec<Channel>,
    /// θ₀⋆ = arcsin(K/k − 1), defined for K/2 ≤ k ≤ K.
    pub theta0_star: Option<f64>,
    /// Whether θ₀ lies in the window that opens j = 1 for K/2 < k ≤ K.
    pub in_window: bool,
}

impl ChannelSet {
    pub fn get(&self, j: usize) -> Option<&Channel> {
        self.channels.iter().find(|c| c.j == j)
    }
}

pub fn channels(inc: &Incidence, spec: &GratingSpec) -> ChannelSet {
    let ratio = spec.k_grating / inc.k;
    let j_max = ((1.0 - inc.s0) / ratio).floor().max(0.0) as usize;
    let mut list = Vec::new();
    for j in 0..=j_max {
        let s = if j == 0 {
            inc.s0
        } else {
            inc.s0 + j as f64 * ratio
        };
        if s.abs() >= 1.0 {
            continue;
        }
        let cos_plus = if j == 0 {
            inc.c0.abs()
        } else {
            (1.0 - s * s).sqrt()
        };
        let plus = s.asin();
        list.push(Channel {
            j,
            s,
            cos_plus,
            theta_plus: plus,
            theta_minus: wrap_angle(PI - plus),
        });
    }
    let theta0_star = (ratio - 1.0 <= 1.0 && ratio >= 1.0).then(|| (ratio - 1.0).asin());
    let in_window = match theta0_star {
        Some(star) if ratio < 2.0 => {
            let t = inc.theta0();
            (t > -FRAC_PI_2 && t < -star) || (t > PI + star && t < 1.5 * PI)
        }
        _ => false,
    };
    ChannelSet {
        j_max,
        channels: list,
        theta0_star,
        in_window,
    }
}

/// Brewster configuration θ₀ = 180° + θ_B and the threshold κ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrewsterSetup {
    pub theta_b: f64,
    pub theta0: f64,
    pub kappa0: f64,
    /// sin θ₀ = −√((z0+1)/(z0+2)) and cos θ₀ = −1/√(z0+2), from exact identities.
    pub s0: f64,
    pub c0: f64,
}

impl BrewsterSetup {
    pub fn incidence(&self, k: f64) -> Incidence {
        Incidence {
            k,
            s0: self.s0,
            c0: self.c0,
        }
    }
}

pub fn brewster_setup(spec: &GratingSpec) -> Result<BrewsterSetup> {
    if spec.z0.im != 0.0 {
        return Err(Error::NonRealZ0 { im: spec.z0.im });
    }
    let z0 = spec.z0.re;
    if z0 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "Brewster setup needs z0 >= 0, got {z0}"
        )));
    }
    let theta_b = (z0 + 1.0).sqrt().atan();
    let root = ((z0 + 1.0) / (z0 + 2.0)).sqrt();
    let kappa0 = spec.k_grating / (1.0 + root);
    debug_assert!(kappa0 > 0.5 * spec.k_grating);
    Ok(BrewsterSetup {
        theta_b,
        theta0: PI + theta_b,
        kappa0,
        s0: -root,
        c0: -1.0 / (z0 + 2.0).sqrt(),
    })
}

/// Reflected (+, cos θ > 0) or transmitted (−) member of a channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Closed-form channel weight τ⁽ⁿ⁾_{j±}.
pub fn tau(
    n: usize,
    j: usize,
    side: Side,
    inc: &Incidence,
    spec: &GratingSpec,
) -> Result<Complex64> {
    let set = channels(inc, spec);
    let closed = || Error::ChannelClosed {
        j: j as i64,
        j_max: set.j_max as i64,
    };
    let ch = set.get(j).ok_or_else(closed)?;
    let (s0, c0, pm) = (inc.s0, inc.c0, side.sign());
    let root = (PI / 2.0).sqrt();
    match n {
        1 => {
            let main = spec.a(j) * (s0 * ch.s / ch.cos_plus);
            Ok((main + spec.z(j) * (pm * c0)) * root)
        }
        2 => {
            let ch0 = set.get(0).ok_or_else(closed)?;
            let (a0, z0, z1) = (spec.a(0), spec.z0, spec.z1);
            let (sec0, cos0) = (1.0 / ch0.cos_plus, ch0.cos_plus);
            match j {
                0 => {
                    let first =
                        (a0 * (s0 * s0) * (a0 * (s0 * s0 * sec0) + c0) - z0 * c0.powi(3)) * sec0;
                    let second = z0 * c0 * (z0 * cos0 + c0) - a0 * (s0 * s0);
                    Ok((first + second * pm) * (I * 0.5 * root))
                }
                1 => {
                    let a1 = spec.a(1);
                    let (s1, cos1) = (ch.s, ch.cos_plus);
                    let sec1 = 1.0 / cos1;
                    let first =
                        a1 * (s0 * s1 * sec1) * (a0 * (s0 * s0 * sec0 + s1 * s1 * sec1) + c0)
                            - z1 * (c0 * cos1);
                    let second = z1 * c0 * (z0 * (cos0 + cos1) + c0) - a1 * (s0 * s1);
                    Ok((first + second * pm) * (I * 0.5 * root))
                }
                _ => Err(Error::NotDerived(format!(
                    "second-order weight for diffraction order j = {j}"
                ))),
            }
        }
        _ => Err(Error::InvalidInput(format!(
            "order must be 1 or 2, got {n}"
        ))),
    }
}

/// Σ_{n ≤ order} τ⁽ⁿ⁾(kℓ)ⁿ; zero when the channel is closed.
pub fn tau_approx(
    order: usize,
    j: usize,
    side: Side,
    inc: &Incidence,
    spec: &GratingSpec,
) -> Result<Complex64> {
    let kl = inc.k * spec.ell;
    let mut total = Complex64::new(0.0, 0.0);
    for n in 1..=order {
        match tau(n, j, side, inc, spec) {
            Ok(t) => total += t * kl.powi(n as i32),
            Err(Error::ChannelClosed { .. }) => return Ok(Complex64::new(0.0, 0.0)),
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// θ₁± against k/K.
    Fig3,
    /// τ₀₋ against kℓ at orders 1 and 2.
    Fig4,
    /// |τ₁±|²·10⁴ against kℓ.
    Fig5,
}

/// Labelled numeric table, one row per abscissa sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Figure data at the Brewster incidence for the given grating.
pub fn figure_data(which: Figure, spec: &GratingSpec, samples: usize) -> Result<Table> {
    let b = brewster_setup(spec)?;
    let kg = spec.k_grating;
    let cols = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match which {
        Figure::Fig3 => {
            let lo = b.kappa0 / kg;
            let mut rows = Vec::new();
            for i in 0..=samples {
                let x = lo + (1.0 - lo) * i as f64 / samples as f64;
                let s1 = 1.0 / x + b.s0;
                if s1.abs() > 1.0 {
                    continue;
                }
                let plus = s1.asin().to_degrees();
                rows.push(vec![x, plus, 180.0 - plus]);
            }
            Ok(Table {
                columns: cols(&["k_over_K", "theta1_plus_deg", "theta1_minus_deg"]),
                rows,
            })
        }
        Figure::Fig4 => {
            let kl_max = kg * spec.ell;
            let mut rows = Vec::new();
            let step = 200.0;
            let count = (kl_max * step).floor() as usize;
            for i in 1..=count {
                let kl = i as f64 / step;
                let inc = b.incidence(kl / spec.ell);
                let t1 = tau_approx(1, 0, Side::Minus, &inc, spec)?;
                let t2 = tau_approx(2, 0, Side::Minus, &inc, spec)?;
                rows.push(vec![kl, t1.re, t1.im, t2.re, t2.im]);
            }
            Ok(Table {
                columns: cols(&[
                    "kl",
                    "re_tau0m_o1",
                    "im_tau0m_o1",
                    "re_tau0m_o2",
                    "im_tau0m_o2",
                ]),
                rows,
            })
        }
        Figure::Fig5 => {
            let (lo, hi) = (0.5 * kg * spec.ell, kg * spec.ell);
            let mut rows = Vec::new();
            for i in 0..=samples {
                let kl = lo + (hi - lo) * i as f64 / samples as f64;
                rows.push(fig5_row(kl, spec, &b)?);
            }
            Ok(Table {
                columns: cols(&[
                    "kl",
                    "in_window",
                    "tau1p_sq_o1",
                    "tau1m_sq_o1",
                    "tau1p_sq_o2",
                    "tau1m_sq_o2",
                ]),
                rows,
            })
        }
    }
}

/// One Fig. 5 sample: [kℓ, window flag, |τ₁₊|², |τ₁₋|² at order 1, same at order 2], squares ×10⁴.
pub fn fig5_row(kl: f64, spec: &GratingSpec, b: &BrewsterSetup) -> Result<Vec<f64>> {
    let inc = b.incidence(kl / spec.ell);
    let window = (inc.k > b.kappa0 && inc.k <= spec.k_grating) as u8 as f64;
    let mut row = vec![kl, window];
    for order in [1, 2] {
        for side in [Side::Plus, Side::Minus] {
            row.push(tau_approx(order, 1, side, &inc, spec)?.norm_sqr() * 1e4);
        }
    }
    Ok(row)
}

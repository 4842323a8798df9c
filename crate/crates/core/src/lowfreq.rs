//! Closed-form low-frequency coefficients f⁽¹⁾, f⁽²⁾ of the scattering amplitude
//! 𝔣(θ) = Σₙ f⁽ⁿ⁾(θ)(kℓ)ⁿ.
//!
//! The nested q-convolutions in X₁, X₂, Y₁, Y₂ are evaluated as y-Fourier
//! transforms of products (convolution theorem), so that
//! X₁(p,p') = (p/k²)·[v(x̌₂)(p'w_α(x̌₁) − i∂_y w_α(x̌₁))]~(p − p') integrated over
//! the triangle 0 < x̌₁ < x̌₂ < 1, and similarly for the others.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::media::{
    merge_harmonics, moments, same_momentum, AlphaBetaProfile, Harmonic, MomentTable, SpectralKind,
    SpectralValue, Spectrum, Symbol, YGrid,
};
use crate::quad;
use crate::settings::Settings;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Wrap an angle into (−π/2, 3π/2].
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + FRAC_PI_2).rem_euclid(2.0 * PI);
    if t == 0.0 {
        1.5 * PI
    } else {
        t - FRAC_PI_2
    }
}

/// Wavenumber and incidence/scattering angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterKinematics {
    pub k: f64,
    pub theta0: f64,
    pub theta: f64,
}

impl ScatterKinematics {
    pub fn new(k: f64, theta0: f64, theta: f64, angle_floor: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        for t in [theta0, theta] {
            if t.cos().abs() < angle_floor {
                return Err(Error::GrazingAngle {
                    angle_deg: t.to_degrees(),
                });
            }
        }
        Ok(ScatterKinematics { k, theta0, theta })
    }

    pub fn c0(&self) -> f64 {
        self.theta0.cos()
    }
    pub fn s0(&self) -> f64 {
        self.theta0.sin()
    }
    pub fn c(&self) -> f64 {
        self.theta.cos()
    }
    pub fn s(&self) -> f64 {
        self.theta.sin()
    }
    pub fn p0(&self) -> f64 {
        self.k * self.s0()
    }
    pub fn p1(&self) -> f64 {
        self.k * self.s()
    }
}

/// A Dirac contribution τ·δ(θ − θ_j) of a discrete diffraction channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracWeight {
    /// Outgoing angle in (−π/2, 3π/2].
    pub theta: f64,
    pub weight: Complex64,
    /// Momentum transfer p₁ − p₀ of the channel.
    pub shift: f64,
}

impl DiracWeight {
    /// True for channels leaving towards x → +∞.
    pub fn forward(&self) -> bool {
        self.theta.cos() > 0.0
    }
}

/// A coefficient or amplitude at one angle: a smooth value or a list of
/// channel weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Smooth(Complex64),
    Dirac(Vec<DiracWeight>),
}

impl Coefficient {
    pub fn smooth(&self) -> Option<Complex64> {
        match self {
            Coefficient::Smooth(v) => Some(*v),
            Coefficient::Dirac(_) => None,
        }
    }

    pub fn dirac(&self) -> &[DiracWeight] {
        match self {
            Coefficient::Dirac(d) => d,
            Coefficient::Smooth(_) => &[],
        }
    }
}

/// Scattering amplitude as smooth samples plus Dirac channel weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Amplitude {
    pub smooth: Vec<(f64, Complex64)>,
    pub dirac: Vec<DiracWeight>,
}

impl Amplitude {
    /// Differential cross section |𝔣(θ)|² at the smooth samples.
    pub fn cross_section(&self) -> Vec<(f64, f64)> {
        self.smooth
            .iter()
            .map(|(t, f)| (*t, f.norm_sqr()))
            .collect()
    }

    /// Weight of the Dirac channel at angle θ (zero if absent).
    pub fn dirac_at(&self, theta: f64) -> Complex64 {
        let t = wrap_angle(theta);
        self.dirac
            .iter()
            .filter(|d| (d.theta - t).abs() < 1e-9)
            .map(|d| d.weight)
            .sum()
    }
}

/// W_l(p,p') = k⁻² p p' v̄̃_{α,l}(p−p') + w̄̃_{β,l}(p−p').
pub fn kernel_w(l: usize, p: f64, pp: f64, k: f64, m: &MomentTable) -> SpectralValue {
    let q = p - pp;
    m.at(Symbol::VAlpha, l, q)
        .scale(Complex64::new(p * pp / (k * k), 0.0))
        .add(m.at(Symbol::WBeta, l, q))
}

/// The four nested kernels at given momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub x1: SpectralValue,
    pub x2: SpectralValue,
    pub y1: SpectralValue,
    pub y2: SpectralValue,
}

/// Precomputed y-profiles of the triangle-integrated products behind X₁, X₂, Y₁, Y₂.
#[derive(Debug, Clone)]
pub struct SecondOrderKernels {
    pub kind: SpectralKind,
    /// ∫∫ v_α(x̌₂) w_α(x̌₁), ∫∫ v_α(x̌₂) ∂_y w_α(x̌₁)
    x1a: Spectrum,
    x1b: Spectrum,
    /// ∫∫ w_β(x̌₂) w_α(x̌₁)
    x2: Spectrum,
    /// ∫∫ w_α(x̌₂) v_α(x̌₁), ∫∫ w_α(x̌₂) ∂_y v_α(x̌₁)
    y1a: Spectrum,
    y1b: Spectrum,
    /// ∫∫ w_α(x̌₂) w_β(x̌₁)
    y2: Spectrum,
}

#[derive(Debug, Clone, Copy, Default)]
struct Six([Complex64; 6]);

impl Add for Six {
    type Output = Six;
    fn add(mut self, o: Six) -> Six {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a += b;
        }
        self
    }
}

impl Mul<f64> for Six {
    type Output = Six;
    fn mul(mut self, s: f64) -> Six {
        for a in self.0.iter_mut() {
            *a *= s;
        }
        self
    }
}

#[derive(Debug, Clone, Default)]
struct Bag(Vec<Harmonic>);

impl Add for Bag {
    type Output = Bag;
    fn add(mut self, o: Bag) -> Bag {
        self.0.extend(o.0);
        self
    }
}

impl Mul<f64> for Bag {
    type Output = Bag;
    fn mul(mut self, s: f64) -> Bag {
        for h in self.0.iter_mut() {
            h.c *= s;
        }
        self
    }
}

fn outer(a: &[Harmonic], b: &[Harmonic], deriv: bool) -> Bag {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for u in a {
        for v in b {
            let c = if deriv {
                u.c * v.c * Complex64::new(0.0, v.p)
            } else {
                u.c * v.c
            };
            out.push(Harmonic::new(u.p + v.p, c));
        }
    }
    Bag(merge_harmonics(out))
}

impl SecondOrderKernels {
    pub fn build(
        ab: &AlphaBetaProfile,
        grid: Option<&Arc<YGrid>>,
        settings: &Settings,
    ) -> Result<Self> {
        let (wa, wb, v) = (&ab.w_alpha, &ab.w_beta, &ab.v_alpha);
        let n = settings.x_nodes;
        match grid {
            None => {
                let breaks = quad::merge_breaks(0.0, 1.0, &ab.x_breaks(0.0));
                let pair = |outer_f: &crate::media::FieldRef,
                            inner_f: &crate::media::FieldRef,
                            deriv: bool| {
                    if outer_f.is_zero() || inner_f.is_zero() {
                        return Ok(Spectrum::Dirac(Vec::new()));
                    }
                    let mut err = None;
                    let bag: Bag = quad::triangle(&breaks, n, |x2, x1| {
                        match (outer_f.harmonics(x2), inner_f.harmonics(x1)) {
                            (Ok(a), Ok(b)) => outer(&a, &b, deriv),
                            (Err(e), _) | (_, Err(e)) => {
                                err = Some(e);
                                Bag::default()
                            }
                        }
                    });
                    match err {
                        Some(e) => Err(e),
                        None => Ok(Spectrum::Dirac(merge_harmonics(bag.0))),
                    }
                };
                Ok(SecondOrderKernels {
                    kind: SpectralKind::Discrete,
                    x1a: pair(v, wa, false)?,
                    x1b: pair(v, wa, true)?,
                    x2: pair(wb, wa, false)?,
                    y1a: pair(wa, v, false)?,
                    y1b: pair(wa, v, true)?,
                    y2: pair(wa, wb, false)?,
                })
            }
            Some(grid) => {
                let cols: Vec<Six> = if wa.is_zero() {
                    vec![Six::default(); grid.nodes().len()]
                } else {
                    grid.nodes()
                        .iter()
                        .map(|&y| {
                            let breaks = quad::merge_breaks(0.0, 1.0, &ab.x_breaks(y));
                            quad::triangle(&breaks, n, |x2, x1| {
                                let (v2, wa2, wb2) =
                                    (v.value(x2, y), wa.value(x2, y), wb.value(x2, y));
                                let (v1, wa1, wb1) =
                                    (v.value(x1, y), wa.value(x1, y), wb.value(x1, y));
                                Six([
                                    v2 * wa1,
                                    v2 * wa.dy(x1, y),
                                    wb2 * wa1,
                                    wa2 * v1,
                                    wa2 * v.dy(x1, y),
                                    wa2 * wb1,
                                ])
                            })
                        })
                        .collect()
                };
                let table = |i: usize| -> Spectrum {
                    let weighted = cols
                        .iter()
                        .zip(grid.weights())
                        .map(|(c, w)| c.0[i] * w)
                        .collect();
                    Spectrum::Sampled {
                        grid: grid.clone(),
                        weighted,
                    }
                };
                Ok(SecondOrderKernels {
                    kind: SpectralKind::Continuous,
                    x1a: table(0),
                    x1b: table(1),
                    x2: table(2),
                    y1a: table(3),
                    y1b: table(4),
                    y2: table(5),
                })
            }
        }
    }

    pub fn x1(&self, p: f64, pp: f64, k: f64) -> SpectralValue {
        let q = p - pp;
        self.x1a
            .at(q)
            .scale(pp.into())
            .add(self.x1b.at(q).scale(-I))
            .scale((p / (k * k)).into())
    }

    pub fn x2(&self, q: f64) -> SpectralValue {
        self.x2.at(q)
    }

    pub fn y1(&self, p: f64, pp: f64, k: f64) -> SpectralValue {
        let q = p - pp;
        self.y1a
            .at(q)
            .scale(pp.into())
            .add(self.y1b.at(q).scale(-I))
            .scale((pp / (k * k)).into())
    }

    pub fn y2(&self, q: f64) -> SpectralValue {
        self.y2.at(q)
    }

    pub fn eval(&self, p: f64, pp: f64, k: f64) -> KernelSet {
        KernelSet {
            x1: self.x1(p, pp, k),
            x2: self.x2(p - pp),
            y1: self.y1(p, pp, k),
            y2: self.y2(p - pp),
        }
    }

    /// All Dirac shifts carried by the tables.
    pub fn shifts(&self) -> Vec<f64> {
        [
            &self.x1a, &self.x1b, &self.x2, &self.y1a, &self.y1b, &self.y2,
        ]
        .iter()
        .flat_map(|s| s.masses().iter().map(|h| h.p))
        .collect()
    }
}

/// X₁, X₂, Y₁, Y₂ at a single pair of momenta (builds all tables; prefer
/// [`LowFreqModel`] for repeated use).
pub fn second_order_kernels(
    p: f64,
    pp: f64,
    k: f64,
    ab: &AlphaBetaProfile,
    settings: &Settings,
) -> Result<KernelSet> {
    let m = moments(ab, settings)?;
    Ok(SecondOrderKernels::build(ab, m.grid(), settings)?.eval(p, pp, k))
}

/// Everything needed to evaluate f⁽¹⁾ and f⁽²⁾ for one medium.
#[derive(Debug, Clone)]
pub struct LowFreqModel {
    pub moments: MomentTable,
    pub second: SecondOrderKernels,
    pub settings: Settings,
}

impl LowFreqModel {
    pub fn new(ab: &AlphaBetaProfile, settings: &Settings) -> Result<Self> {
        settings.validate()?;
        let moments = moments(ab, settings)?;
        let second = SecondOrderKernels::build(ab, moments.grid(), settings)?;
        Ok(LowFreqModel {
            moments,
            second,
            settings: *settings,
        })
    }

    pub fn kind(&self) -> SpectralKind {
        self.moments.kind
    }

    pub fn f1(&self, kin: &ScatterKinematics) -> Result<Coefficient> {
        f1(kin, &self.moments, &self.settings)
    }

    pub fn f2(&self, kin: &ScatterKinematics) -> Result<Coefficient> {
        f2(kin, self)
    }

    /// Σ_{n ≤ order} f⁽ⁿ⁾(kℓ)ⁿ on the given angles (smooth media) or on all
    /// open channels (discrete media).
    pub fn amplitude(
        &self,
        k: f64,
        theta0: f64,
        thetas: &[f64],
        kl: f64,
        order: usize,
    ) -> Result<Amplitude> {
        amplitude(self, k, theta0, thetas, kl, order)
    }
}

/// Bracket [s₀s v̄̃_{α,0} + c₀c w̄̃_{α,0} + w̄̃_{β,0}] at momentum transfer q.
fn first_bracket(m: &MomentTable, k: f64, s0: f64, c0: f64, s: f64, c: f64) -> SpectralValue {
    let q = k * (s - s0);
    kernel_w(0, k * s, k * s0, k, m).add(m.at(Symbol::WAlpha, 0, q).scale((c0 * c).into()))
}

/// Open outgoing channels for a Dirac shift: (θ, s, c) with |c| above the floor.
fn channel_angles(s0: f64, shift: f64, k: f64, floor: f64) -> Vec<(f64, f64, f64)> {
    let s = s0 + shift / k;
    if s.abs() >= 1.0 {
        return Vec::new();
    }
    let c = (1.0 - s * s).sqrt();
    if c < floor {
        log::debug!("dropping grazing channel s = {s}");
        return Vec::new();
    }
    let plus = s.asin();
    vec![(wrap_angle(plus), s, c), (wrap_angle(PI - plus), s, -c)]
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| same_momentum(*a, *b));
    v
}

pub fn f1(kin: &ScatterKinematics, m: &MomentTable, settings: &Settings) -> Result<Coefficient> {
    let (k, s0, c0) = (kin.k, kin.s0(), kin.c0());
    match m.kind {
        SpectralKind::Continuous => {
            let b = first_bracket(m, k, s0, c0, kin.s(), kin.c()).value();
            Ok(Coefficient::Smooth(b * (k / (2.0 * (2.0 * PI).sqrt()))))
        }
        SpectralKind::Discrete => {
            let mut out = Vec::new();
            for shift in distinct(m.shifts()) {
                for (theta, s, c) in channel_angles(s0, shift, k, settings.angle_floor) {
                    let d = first_bracket(m, k, s0, c0, s, c).mass_at(shift);
                    out.push(DiracWeight {
                        theta,
                        weight: d * ((PI / 2.0).sqrt() / c.abs()),
                        shift,
                    });
                }
            }
            Ok(Coefficient::Dirac(out))
        }
    }
}

/// The local (non-φ) part of the f⁽²⁾ braces.
fn second_local(model: &LowFreqModel, k: f64, s0: f64, c0: f64, s: f64, c: f64) -> SpectralValue {
    let m = &model.moments;
    let (p, pp) = (k * s, k * s0);
    let q = p - pp;
    let ks = model.second.eval(p, pp, k);
    let w1 = kernel_w(1, p, pp, k, m);
    let wa1 = m.at(Symbol::WAlpha, 1, q);
    let left = ks
        .x1
        .add(ks.x2)
        .add(w1.clone())
        .add(wa1.clone().scale((-c * c).into()));
    let right = ks
        .y1
        .add(ks.y2)
        .add(w1.scale((-1.0).into()))
        .add(wa1.scale((c0 * c0).into()));
    left.scale(c0.into()).add(right.scale(c.into()))
}

/// [W₀(ks, k sinφ) − c cosφ w̄̃_{α,0}(k(s − sinφ))]
fn phi_bracket(
    m: &MomentTable,
    k: f64,
    s_out: f64,
    c_out: f64,
    s_in: f64,
    cos_phi: f64,
) -> SpectralValue {
    kernel_w(0, k * s_out, k * s_in, k, m).add(
        m.at(Symbol::WAlpha, 0, k * (s_out - s_in))
            .scale((-c_out * cos_phi).into()),
    )
}

fn phi_integral(
    model: &LowFreqModel,
    k: f64,
    s0: f64,
    c0: f64,
    s: f64,
    c: f64,
    n: usize,
) -> (Complex64, f64) {
    let m = &model.moments;
    let rule = quad::gl_interval(n, -FRAC_PI_2, FRAC_PI_2);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for (phi, w) in rule.iter() {
        let (sp, cp) = (phi.sin(), phi.cos());
        let a = phi_bracket(m, k, s, c, sp, cp).value();
        let b = phi_bracket(m, k, sp, c0, s0, cp).value();
        acc += a * b * w;
        abs += (a * b).norm() * w;
    }
    (acc, abs)
}

pub fn f2(kin: &ScatterKinematics, model: &LowFreqModel) -> Result<Coefficient> {
    let (k, s0, c0) = (kin.k, kin.s0(), kin.c0());
    let m = &model.moments;
    let settings = &model.settings;
    match model.kind() {
        SpectralKind::Continuous => {
            let (s, c) = (kin.s(), kin.c());
            let n = settings.phi_nodes;
            let (coarse, _) = phi_integral(model, k, s0, c0, s, c, n);
            let (fine, scale) = phi_integral(model, k, s0, c0, s, c, 2 * n);
            let change = (fine - coarse).norm();
            if change > settings.f2_tol * fine.norm() + 1e-14 * scale {
                return Err(Error::QuadratureNotConverged {
                    what: "phi-integral of f2".into(),
                    change: change / fine.norm().max(f64::MIN_POSITIVE),
                    tol: settings.f2_tol,
                });
            }
            let braces = second_local(model, k, s0, c0, s, c).value() + fine * (k / (4.0 * PI));
            Ok(Coefficient::Smooth(
                braces * (I * k / (2.0 * (2.0 * PI).sqrt())),
            ))
        }
        SpectralKind::Discrete => {
            let single = distinct(m.shifts());
            let mut candidates = single.clone();
            candidates.extend(model.second.shifts());
            for a in &single {
                for b in &single {
                    candidates.push(a + b);
                }
            }
            let mut out = Vec::new();
            for shift in distinct(candidates) {
                for (theta, s, c) in channel_angles(s0, shift, k, settings.angle_floor) {
                    let mut d = second_local(model, k, s0, c0, s, c).mass_at(shift);
                    for &mid in &single {
                        let sp = s0 + mid / k;
                        if sp.abs() >= 1.0 {
                            continue;
                        }
                        let cp = (1.0 - sp * sp).sqrt();
                        let a = phi_bracket(m, k, s, c, sp, cp).mass_at(shift - mid);
                        let b = phi_bracket(m, k, sp, c0, s0, cp).mass_at(mid);
                        d += a * b / (2.0 * cp);
                    }
                    out.push(DiracWeight {
                        theta,
                        weight: d * (I * (PI / 2.0).sqrt() / c.abs()),
                        shift,
                    });
                }
            }
            Ok(Coefficient::Dirac(out))
        }
    }
}

/// Truncated low-frequency amplitude through order N ∈ {1, 2}.
pub fn amplitude(
    model: &LowFreqModel,
    k: f64,
    theta0: f64,
    thetas: &[f64],
    kl: f64,
    order: usize,
) -> Result<Amplitude> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "order must be 1 or 2, got {order}"
        )));
    }
    if !(kl > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kl must be positive, got {kl}"
        )));
    }
    let floor = model.settings.angle_floor;
    match model.kind() {
        SpectralKind::Continuous => {
            let mut smooth = Vec::with_capacity(thetas.len());
            for &theta in thetas {
                let kin = ScatterKinematics::new(k, theta0, theta, floor)?;
                let mut f = model.f1(&kin)?.smooth().unwrap_or_default() * kl;
                if order == 2 {
                    f += model.f2(&kin)?.smooth().unwrap_or_default() * (kl * kl);
                }
                smooth.push((theta, f));
            }
            Ok(Amplitude {
                smooth,
                dirac: Vec::new(),
            })
        }
        SpectralKind::Discrete => {
            let kin = ScatterKinematics::new(k, theta0, theta0, floor)?;
            let mut dirac: Vec<DiracWeight> = model
                .f1(&kin)?
                .dirac()
                .iter()
                .map(|d| DiracWeight {
                    weight: d.weight * kl,
                    ..*d
                })
                .collect();
            if order == 2 {
                for d in model.f2(&kin)?.dirac() {
                    match dirac.iter_mut().find(|e| (e.theta - d.theta).abs() < 1e-12) {
                        Some(e) => e.weight += d.weight * (kl * kl),
                        None => dirac.push(DiracWeight {
                            weight: d.weight * (kl * kl),
                            ..*d
                        }),
                    }
                }
            }
            dirac.sort_by(|a, b| a.theta.total_cmp(&b.theta));
            Ok(Amplitude {
                smooth: Vec::new(),
                dirac,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for t in [-1.5, 0.0, 3.0, 4.7, -2.0, 10.0] {
            let w = wrap_angle(t);
            assert!(w > -FRAC_PI_2 && w <= 1.5 * PI);
            assert!(
                ((w - t) / (2.0 * PI)).fract().abs() < 1e-12
                    || ((w - t) / (2.0 * PI)).fract().abs() > 1.0 - 1e-12
            );
        }
    }

    #[test]
    fn grazing_rejected() {
        assert!(matches!(
            ScatterKinematics::new(1.0, FRAC_PI_2, 0.0, 1e-6),
            Err(Error::GrazingAngle { .. })
        ));
    }
}

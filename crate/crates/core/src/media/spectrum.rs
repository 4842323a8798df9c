//! y-Fourier data: f̃(x̌, p) = ∫dy e^{−ipy} f(x̌, y), either sampled on a y-quadrature
//! grid or as a finite list of Dirac masses f̃ = Σ 2π c_m δ(p − p_m).

use std::sync::Arc;

use num_complex::Complex64;

use super::field::{merge_harmonics, same_momentum, FieldRef, Harmonic};
use super::{AlphaBetaProfile, DecayClass};
use crate::error::{Error, Result};
use crate::quad::{self, Rule};
use crate::settings::Settings;

const Y_PANEL_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectralKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    WAlpha,
    WBeta,
    VAlpha,
}

impl Symbol {
    pub const ALL: [Symbol; 3] = [Symbol::WAlpha, Symbol::WBeta, Symbol::VAlpha];

    fn index(self) -> usize {
        match self {
            Symbol::WAlpha => 0,
            Symbol::WBeta => 1,
            Symbol::VAlpha => 2,
        }
    }
}

/// A function of y whose transform a [`YGrid`] must resolve.
pub type Probe<'a> = dyn Fn(f64) -> Complex64 + Sync + 'a;

/// y-quadrature shared by all components of a decaying medium, together with
/// the wavenumber beyond which their spectra are negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct YGrid {
    pub rule: Rule,
    pub q_max: f64,
}

impl YGrid {
    fn breaks(
        decay: &DecayClass,
        refine: usize,
        tol: f64,
        extra: &[f64],
    ) -> Result<(Vec<f64>, f64)> {
        let log_tol = (1.0 / tol).ln();
        let (a, b, panels, q_max) = match *decay {
            DecayClass::Gaussian { width } => {
                let half = width * ((2.0 * log_tol).sqrt() + 3.0);
                let panels = 2 * (1.5 * half / width).ceil() as usize;
                (-half, half, panels, (2.0 * log_tol).sqrt() / width)
            }
            DecayClass::Exponential { rate } => {
                let half = (log_tol + 5.0) / rate;
                let panels = 2 * (half * rate).ceil() as usize;
                (-half, half, panels, rate / tol.sqrt())
            }
            DecayClass::CompactSupport { y_min, y_max } => {
                let nodes = (32 * Y_PANEL_NODES) as f64;
                (
                    y_min,
                    y_max,
                    32,
                    std::f64::consts::PI * nodes / (2.0 * (y_max - y_min)),
                )
            }
            _ => {
                return Err(Error::NonIntegrable(format!(
                    "decay class {decay:?} has no y-Fourier integral"
                )))
            }
        };
        let mut br = quad::uniform_breaks(a, b, panels * refine);
        br.extend(extra.iter().copied());
        Ok((quad::merge_breaks(a, b, &br), q_max))
    }

    /// Build a composite rule for the given decay class, doubling panels until the
    /// transforms of `probes` (functions of y) stop changing at spectral tolerance.
    /// Changes are measured against the largest y-integral of `probes` and
    /// `reference` magnitudes, so probes that vanish by construction do not
    /// amplify round-off.
    pub fn build(
        decay: &DecayClass,
        y_breaks: &[f64],
        probes: &[&Probe<'_>],
        reference: &[&Probe<'_>],
        settings: &Settings,
    ) -> Result<YGrid> {
        let tol = settings.spectral_tol;
        let make = |refine: usize| -> Result<YGrid> {
            let (br, q_max) = Self::breaks(decay, refine, tol, y_breaks)?;
            Ok(YGrid {
                rule: quad::composite(&br, Y_PANEL_NODES),
                q_max,
            })
        };
        let mut refine = 1;
        let mut grid = make(refine)?;
        let mut change = f64::NAN;
        for _ in 0..5 {
            let fine = make(2 * refine)?;
            let mut scale: f64 = reference
                .iter()
                .map(|f| {
                    fine.rule
                        .iter()
                        .map(|(y, w)| (f(y) * w).norm())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let mut worst: f64 = 0.0;
            for f in probes {
                let fine_vals: Vec<Complex64> = fine.rule.iter().map(|(y, w)| f(y) * w).collect();
                scale = scale.max(fine_vals.iter().map(|v| v.norm()).sum());
                let coarse_vals: Vec<Complex64> = grid.rule.iter().map(|(y, w)| f(y) * w).collect();
                for p in [0.0, 0.5 * grid.q_max, grid.q_max] {
                    worst = worst.max(
                        (grid.transform(&coarse_vals, p) - fine.transform(&fine_vals, p)).norm(),
                    );
                }
            }
            let worst = if scale > 0.0 { worst / scale } else { 0.0 };
            if worst <= tol {
                return Ok(grid);
            }
            change = worst;
            log::debug!("y-grid refinement {refine}: relative change {worst:.3e}");
            refine *= 2;
            grid = fine;
        }
        Err(Error::QuadratureNotConverged {
            what: "y-Fourier quadrature".into(),
            change,
            tol,
        })
    }

    /// Σ_j samples_j e^{−ipy_j}, with samples already multiplied by the weights.
    pub fn transform(&self, weighted: &[Complex64], p: f64) -> Complex64 {
        self.rule
            .nodes
            .iter()
            .zip(weighted)
            .map(|(y, s)| s * Complex64::new(0.0, -p * y).exp())
            .sum()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }
}

/// Value of a spectral quantity at given momenta: a number for smooth spectra,
/// or Dirac coefficients indexed by the momentum shift for discrete ones.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralValue {
    Value(Complex64),
    Dirac(Vec<Harmonic>),
}

impl SpectralValue {
    pub fn zero(kind: SpectralKind) -> Self {
        match kind {
            SpectralKind::Continuous => SpectralValue::Value(Complex64::new(0.0, 0.0)),
            SpectralKind::Discrete => SpectralValue::Dirac(Vec::new()),
        }
    }

    pub fn scale(self, s: Complex64) -> Self {
        match self {
            SpectralValue::Value(v) => SpectralValue::Value(v * s),
            SpectralValue::Dirac(d) => {
                SpectralValue::Dirac(d.into_iter().map(|h| Harmonic::new(h.p, h.c * s)).collect())
            }
        }
    }

    pub fn add(self, other: SpectralValue) -> Self {
        match (self, other) {
            (SpectralValue::Value(a), SpectralValue::Value(b)) => SpectralValue::Value(a + b),
            (SpectralValue::Dirac(mut a), SpectralValue::Dirac(b)) => {
                a.extend(b);
                SpectralValue::Dirac(merge_harmonics(a))
            }
            (SpectralValue::Dirac(d), v) | (v, SpectralValue::Dirac(d)) if d.is_empty() => v,
            _ => panic!("smooth and discrete spectral values cannot be added"),
        }
    }

    /// Smooth value (zero for an empty Dirac list).
    pub fn value(&self) -> Complex64 {
        match self {
            SpectralValue::Value(v) => *v,
            SpectralValue::Dirac(d) if d.is_empty() => Complex64::new(0.0, 0.0),
            SpectralValue::Dirac(_) => panic!("discrete spectrum has no pointwise value"),
        }
    }

    /// Coefficient of 2πδ(· − shift).
    pub fn mass_at(&self, shift: f64) -> Complex64 {
        match self {
            SpectralValue::Dirac(d) => d
                .iter()
                .filter(|h| same_momentum(h.p, shift))
                .map(|h| h.c)
                .sum(),
            SpectralValue::Value(_) => panic!("smooth spectrum has no Dirac masses"),
        }
    }
}

/// Spectrum of one component as a function of x̌.
#[derive(Debug, Clone)]
pub enum SpectralProfile {
    Continuous { field: FieldRef, grid: Arc<YGrid> },
    Discrete { field: FieldRef },
}

impl SpectralProfile {
    pub fn kind(&self) -> SpectralKind {
        match self {
            SpectralProfile::Continuous { .. } => SpectralKind::Continuous,
            SpectralProfile::Discrete { .. } => SpectralKind::Discrete,
        }
    }

    pub fn eval(&self, x: f64, p: f64) -> Result<SpectralValue> {
        match self {
            SpectralProfile::Continuous { field, grid } => {
                let w: Vec<Complex64> = grid
                    .rule
                    .iter()
                    .map(|(y, w)| field.value(x, y) * w)
                    .collect();
                Ok(SpectralValue::Value(grid.transform(&w, p)))
            }
            SpectralProfile::Discrete { field } => Ok(SpectralValue::Dirac(field.harmonics(x)?)),
        }
    }

    /// Truncation bound of a smooth spectrum.
    pub fn q_max(&self) -> Option<f64> {
        match self {
            SpectralProfile::Continuous { grid, .. } => Some(grid.q_max),
            SpectralProfile::Discrete { .. } => None,
        }
    }
}

/// Spectrum of a single component under the declared decay class.
pub fn fourier_y(
    field: FieldRef,
    decay: &DecayClass,
    settings: &Settings,
) -> Result<SpectralProfile> {
    if decay.is_decaying() {
        if field.is_discrete() && !field.is_zero() {
            return Err(Error::NonIntegrable(format!(
                "{field:?} does not decay along y"
            )));
        }
        let probes: Vec<Box<Probe>> = [0.25, 0.75]
            .into_iter()
            .map(|x| {
                let f = field.clone();
                Box::new(move |y: f64| f.value(x, y)) as Box<Probe>
            })
            .collect();
        let refs: Vec<&Probe<'_>> = probes.iter().map(|p| p.as_ref()).collect();
        let grid = YGrid::build(decay, &field.y_breaks(), &refs, &[], settings)?;
        Ok(SpectralProfile::Continuous {
            field,
            grid: Arc::new(grid),
        })
    } else if field.is_discrete() {
        Ok(SpectralProfile::Discrete { field })
    } else {
        Err(Error::NonIntegrable(format!(
            "{field:?} is declared {decay:?} but has no finite harmonic expansion"
        )))
    }
}

/// x̌-integrated spectrum of a component.
#[derive(Debug, Clone)]
pub enum Spectrum {
    Sampled {
        grid: Arc<YGrid>,
        weighted: Vec<Complex64>,
    },
    Dirac(Vec<Harmonic>),
}

impl Spectrum {
    pub fn kind(&self) -> SpectralKind {
        match self {
            Spectrum::Sampled { .. } => SpectralKind::Continuous,
            Spectrum::Dirac(_) => SpectralKind::Discrete,
        }
    }

    pub fn at(&self, p: f64) -> SpectralValue {
        match self {
            Spectrum::Sampled { grid, weighted } => {
                SpectralValue::Value(grid.transform(weighted, p))
            }
            Spectrum::Dirac(d) => SpectralValue::Dirac(d.clone()),
        }
    }

    /// Smooth value at p; panics on a non-empty Dirac spectrum.
    pub fn value(&self, p: f64) -> Complex64 {
        self.at(p).value()
    }

    pub fn masses(&self) -> &[Harmonic] {
        match self {
            Spectrum::Dirac(d) => d,
            Spectrum::Sampled { .. } => &[],
        }
    }

    pub fn mass_at(&self, shift: f64) -> Complex64 {
        self.masses()
            .iter()
            .filter(|h| same_momentum(h.p, shift))
            .map(|h| h.c)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Spectrum::Sampled { weighted, .. } => {
                weighted.iter().all(|v| *v == Complex64::new(0.0, 0.0))
            }
            Spectrum::Dirac(d) => d.is_empty(),
        }
    }

    /// Sampled spectrum of the y-profile g(y) = `column(y)`.
    pub fn from_columns(grid: &Arc<YGrid>, column: impl Fn(f64) -> Complex64) -> Spectrum {
        let weighted = grid.rule.iter().map(|(y, w)| column(y) * w).collect();
        Spectrum::Sampled {
            grid: grid.clone(),
            weighted,
        }
    }
}

/// Classify a set of components; zero components are compatible with either kind.
pub fn spectral_kind(fields: &[&FieldRef]) -> Result<SpectralKind> {
    let live: Vec<&&FieldRef> = fields.iter().filter(|f| !f.is_zero()).collect();
    let discrete = live.iter().filter(|f| f.is_discrete()).count();
    match (discrete, live.len() - discrete) {
        (_, 0) => Ok(SpectralKind::Discrete),
        (0, _) => Ok(SpectralKind::Continuous),
        _ => Err(Error::MixedSpectra),
    }
}

pub(crate) fn check_decay(ab: &AlphaBetaProfile) -> Result<()> {
    let kind = spectral_kind(&[&ab.w_alpha, &ab.w_beta])?;
    match (kind, ab.decay.is_decaying(), ab.is_zero()) {
        (_, _, true) => Ok(()),
        (SpectralKind::Continuous, false, _) => Err(Error::NonIntegrable(format!(
            "profile declared {:?} has no finite harmonic expansion",
            ab.decay
        ))),
        (SpectralKind::Discrete, true, _) => Err(Error::NonIntegrable(format!(
            "harmonic profile declared as decaying ({:?})",
            ab.decay
        ))),
        _ => Ok(()),
    }
}

/// x̌-moments ∫₀¹ x̌^l f̃(x̌, p) dx̌ of w_α, w_β and v_α for l ∈ {0, 1}.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub kind: SpectralKind,
    tables: [[Spectrum; 2]; 3],
    grid: Option<Arc<YGrid>>,
}

impl MomentTable {
    pub fn get(&self, s: Symbol, l: usize) -> &Spectrum {
        &self.tables[s.index()][l]
    }

    pub fn at(&self, s: Symbol, l: usize, p: f64) -> SpectralValue {
        self.get(s, l).at(p)
    }

    pub fn grid(&self) -> Option<&Arc<YGrid>> {
        self.grid.as_ref()
    }

    /// All Dirac shifts present in any moment.
    pub fn shifts(&self) -> Vec<f64> {
        let mut out: Vec<Harmonic> = Vec::new();
        for row in &self.tables {
            for s in row {
                out.extend(
                    s.masses()
                        .iter()
                        .map(|h| Harmonic::new(h.p, Complex64::new(1.0, 0.0))),
                );
            }
        }
        merge_harmonics(out).into_iter().map(|h| h.p).collect()
    }
}

/// Composite x̌-rule on [0, 1] respecting interior kinks.
pub(crate) fn x_rule(breaks: &[f64], n: usize) -> Rule {
    quad::composite(&quad::merge_breaks(0.0, 1.0, breaks), n)
}

pub fn moments(ab: &AlphaBetaProfile, settings: &Settings) -> Result<MomentTable> {
    let fields = [&ab.w_alpha, &ab.w_beta, &ab.v_alpha];
    let kind = spectral_kind(&fields)?;
    check_decay(ab)?;
    match kind {
        SpectralKind::Discrete => {
            let rule = x_rule(&ab.x_breaks(0.0), settings.x_nodes);
            let mut tables: Vec<[Spectrum; 2]> = Vec::with_capacity(3);
            for f in fields {
                let mut acc: [Vec<Harmonic>; 2] = [Vec::new(), Vec::new()];
                if !f.is_zero() {
                    for (x, w) in rule.iter() {
                        for h in f.harmonics(x)? {
                            acc[0].push(Harmonic::new(h.p, h.c * w));
                            acc[1].push(Harmonic::new(h.p, h.c * (w * x)));
                        }
                    }
                }
                let [a0, a1] = acc;
                tables.push([
                    Spectrum::Dirac(merge_harmonics(a0)),
                    Spectrum::Dirac(merge_harmonics(a1)),
                ]);
            }
            let tables: [[Spectrum; 2]; 3] = tables.try_into().expect("three symbols");
            Ok(MomentTable {
                kind,
                tables,
                grid: None,
            })
        }
        SpectralKind::Continuous => {
            let n = settings.x_nodes;
            // Only column integrals are transformed; they stay smooth in y even
            // when x-kinks move with y.
            let live: Vec<FieldRef> = fields
                .iter()
                .filter(|f| !f.is_zero())
                .map(|f| (*f).clone())
                .collect();
            let magnitudes: Vec<Box<Probe<'_>>> = live
                .iter()
                .map(|f| {
                    let f = f.clone();
                    Box::new(move |y: f64| {
                        Complex64::new(
                            x_rule(&ab.x_breaks(y), n).integrate(|x| f.value(x, y).norm()),
                            0.0,
                        )
                    }) as Box<Probe<'_>>
                })
                .collect();
            let probes: Vec<Box<Probe<'_>>> = live
                .into_iter()
                .flat_map(|f| {
                    [false, true].into_iter().map(move |weighted| {
                        let f = f.clone();
                        Box::new(move |y: f64| {
                            x_rule(&ab.x_breaks(y), n)
                                .integrate(|x| f.value(x, y) * if weighted { x } else { 1.0 })
                        }) as Box<Probe<'_>>
                    })
                })
                .collect();
            let refs: Vec<&Probe<'_>> = probes.iter().map(|p| p.as_ref()).collect();
            let mags: Vec<&Probe<'_>> = magnitudes.iter().map(|p| p.as_ref()).collect();
            let y_breaks: Vec<f64> = fields.iter().flat_map(|f| f.y_breaks()).collect();
            let grid = Arc::new(YGrid::build(&ab.decay, &y_breaks, &refs, &mags, settings)?);
            let column = |y: f64, n: usize| -> [[Complex64; 2]; 3] {
                let rule = x_rule(&ab.x_breaks(y), n);
                let mut out = [[Complex64::new(0.0, 0.0); 2]; 3];
                for (i, f) in fields.iter().enumerate() {
                    if f.is_zero() {
                        continue;
                    }
                    for (x, w) in rule.iter() {
                        let v = f.value(x, y);
                        out[i][0] += v * w;
                        out[i][1] += v * (w * x);
                    }
                }
                out
            };
            let cols: Vec<[[Complex64; 2]; 3]> =
                grid.nodes().iter().map(|&y| column(y, n)).collect();
            richardson_check(&grid, &cols, |y| column(y, n + 16), settings.spectral_tol);
            let table = |i: usize, l: usize| -> Spectrum {
                let weighted = cols
                    .iter()
                    .zip(grid.weights())
                    .map(|(c, w)| c[i][l] * w)
                    .collect();
                Spectrum::Sampled {
                    grid: grid.clone(),
                    weighted,
                }
            };
            let tables = [
                [table(0, 0), table(0, 1)],
                [table(1, 0), table(1, 1)],
                [table(2, 0), table(2, 1)],
            ];
            Ok(MomentTable {
                kind,
                tables,
                grid: Some(grid),
            })
        }
    }
}

/// Compare x̌-integrals at the strongest column against a higher-order rule.
fn richardson_check(
    grid: &YGrid,
    cols: &[[[Complex64; 2]; 3]],
    refined: impl Fn(f64) -> [[Complex64; 2]; 3],
    tol: f64,
) {
    let size = |c: &[[Complex64; 2]; 3]| c.iter().map(|r| r[0].norm()).sum::<f64>();
    let Some((j, c)) = cols
        .iter()
        .enumerate()
        .max_by(|a, b| size(a.1).total_cmp(&size(b.1)))
    else {
        return;
    };
    let fine = refined(grid.nodes()[j]);
    let diff: f64 = (0..3)
        .flat_map(|i| (0..2).map(move |l| (i, l)))
        .map(|(i, l)| (c[i][l] - fine[i][l]).norm())
        .sum();
    if diff > tol * size(c).max(f64::MIN_POSITIVE) {
        log::warn!(
            "x-quadrature not converged at y = {}: change {diff:.3e}",
            grid.nodes()[j]
        );
    }
}

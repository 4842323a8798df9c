//! Operator-grid evaluation of the transfer-matrix series.
//!
//! Kernels ⟨p|f(x̌, ŷ)|p'⟩ = f̃(x̌, p − p')/2π are held as dense matrices on a
//! finite momentum set. Smooth media use Gauss-Legendre nodes in the angle
//! φ (p = k sin φ) plus measure-free external points; discrete media use the
//! finite set of channels reachable from the incident momentum. The blocks
//! 𝓛̂ₙ⁽ʲ⁾ are built either from x̌-moments or by nested x̌-quadrature of the
//! P·V·Q products, and assembled into N̂_ab⁽ᵐ⁾ and the scattering amplitude.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lowfreq::{kernel_w, wrap_angle, Amplitude, DiracWeight, SecondOrderKernels};
use crate::media::{
    moments, same_momentum, AlphaBetaProfile, DecayClass, MomentTable, SpectralKind, SpectralValue,
    Symbol, YGrid,
};
use crate::quad::{self, Rule};
use crate::settings::Settings;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Gauss-Legendre nodes φ_i ∈ (−π/2, π/2) with p_i = k sin φ_i.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub k: f64,
    pub phi: Vec<f64>,
    pub weights: Vec<f64>,
    pub p: Vec<f64>,
    /// ϖ(p_i) = k cos φ_i.
    pub varpi: Vec<f64>,
}

impl AngularGrid {
    pub fn new(k: f64, n: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput(
                "angular grid needs at least one node".into(),
            ));
        }
        let rule = quad::gl_interval(n, -FRAC_PI_2, FRAC_PI_2);
        let p = rule.nodes.iter().map(|f| k * f.sin()).collect();
        let varpi = rule.nodes.iter().map(|f| k * f.cos()).collect();
        Ok(AngularGrid {
            k,
            phi: rule.nodes,
            weights: rule.weights,
            p,
            varpi,
        })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Δp_i = w_i k cos φ_i.
    pub fn measure(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.varpi)
            .map(|(w, v)| w * v)
            .collect()
    }
}

/// Momenta carrying kernel rows/columns, with the measure used when an
/// intermediate sum runs over them. Zero measure marks evaluation-only points.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSet {
    pub k: f64,
    pub p: Vec<f64>,
    pub measure: Vec<f64>,
    /// Channel set of a discrete medium (kernel entries are Dirac coefficients).
    pub discrete: bool,
}

impl MomentumSet {
    /// Grid nodes followed by measure-free external momenta.
    pub fn angular(grid: &AngularGrid, external: &[f64]) -> Result<Self> {
        if let Some(p) = external.iter().find(|p| p.abs() >= grid.k) {
            return Err(Error::InvalidInput(format!(
                "external momentum {p} is not propagating (k = {})",
                grid.k
            )));
        }
        let mut p = grid.p.clone();
        let mut measure = grid.measure();
        p.extend_from_slice(external);
        measure.extend(std::iter::repeat_n(0.0, external.len()));
        Ok(MomentumSet {
            k: grid.k,
            p,
            measure,
            discrete: false,
        })
    }

    /// Propagating momenta reachable from p₀ by one or two shifts, iterated to closure.
    pub fn channels(k: f64, p0: f64, shifts: &[f64]) -> Result<Self> {
        const LIMIT: usize = 4096;
        let mut steps: Vec<f64> = shifts.to_vec();
        for a in shifts {
            for b in shifts {
                steps.push(a + b);
            }
        }
        let mut p = vec![p0];
        let mut frontier = vec![p0];
        while let Some(q) = frontier.pop() {
            for s in &steps {
                let r = q + s;
                if r.abs() < k && !p.iter().any(|x| same_momentum(*x, r)) {
                    if p.len() >= LIMIT {
                        return Err(Error::InvalidInput(format!(
                            "channel closure exceeds {LIMIT} momenta"
                        )));
                    }
                    p.push(r);
                    frontier.push(r);
                }
            }
        }
        p.sort_by(|a, b| a.total_cmp(b));
        let measure = vec![1.0; p.len()];
        Ok(MomentumSet {
            k,
            p,
            measure,
            discrete: true,
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// ϖ̌² = 1 − p²/k².
    pub fn varpi2(&self) -> Vec<f64> {
        self.p.iter().map(|p| 1.0 - (p / self.k).powi(2)).collect()
    }

    /// ϖ̌ = √(1 − p²/k²) on propagating momenta.
    pub fn varpi(&self) -> Vec<f64> {
        self.varpi2()
            .into_iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }

    pub fn position(&self, p: f64) -> Option<usize> {
        self.p.iter().position(|x| same_momentum(*x, p))
    }

    pub fn is_propagating(&self) -> bool {
        self.p.iter().all(|p| p.abs() < self.k)
    }

    /// Restriction to |p| < k.
    pub fn project(&self) -> MomentumSet {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.p[i].abs() < self.k)
            .collect();
        MomentumSet {
            k: self.k,
            p: keep.iter().map(|&i| self.p[i]).collect(),
            measure: keep.iter().map(|&i| self.measure[i]).collect(),
            discrete: self.discrete,
        }
    }

    /// Internal momentum line for compositions that leave the propagating sector.
    fn line(k: f64, half: f64, panel: f64) -> MomentumSet {
        let panels = ((2.0 * half / panel).ceil() as usize).clamp(2, 512);
        let rule = quad::composite(&quad::uniform_breaks(-half, half, panels), 16);
        MomentumSet {
            k,
            p: rule.nodes,
            measure: rule.weights,
            discrete: false,
        }
    }

    /// Every momentum p + s for p in `base` and s a single shift.
    fn shifted(base: &MomentumSet, shifts: &[f64]) -> MomentumSet {
        let mut p: Vec<f64> = Vec::new();
        for q in &base.p {
            for s in shifts {
                let r = q + s;
                if !p.iter().any(|x| same_momentum(*x, r)) {
                    p.push(r);
                }
            }
        }
        p.sort_by(|a, b| a.total_cmp(b));
        let measure = vec![1.0; p.len()];
        MomentumSet {
            k: base.k,
            p,
            measure,
            discrete: true,
        }
    }
}

/// Kernel matrix K[i][j] ≈ ⟨p_i|L̂|p_j⟩ between two momentum sets.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel(pub DMatrix<C>);

impl OperatorKernel {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        OperatorKernel(DMatrix::zeros(rows, cols))
    }

    /// δ(p − p') on a set with positive measure.
    pub fn identity(set: &MomentumSet) -> Result<Self> {
        if set.measure.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidInput(
                "identity needs positive measure at every momentum".into(),
            ));
        }
        Ok(OperatorKernel(DMatrix::from_diagonal(
            &nalgebra::DVector::from_iterator(
                set.len(),
                set.measure.iter().map(|m| C::new(1.0 / m, 0.0)),
            ),
        )))
    }

    /// (K₁∘K₂)[i][j] = Σ_m K₁[i][m] K₂[m][j] Δp_m.
    pub fn compose(&self, other: &OperatorKernel, mid: &MomentumSet) -> OperatorKernel {
        OperatorKernel(weighted_product(&self.0, &other.0, &mid.measure))
    }

    pub fn at(&self, i: usize, j: usize) -> C {
        self.0[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn scale_rows(mut self, f: &[f64]) -> Self {
        for (mut row, s) in self.0.row_iter_mut().zip(f) {
            row *= C::new(*s, 0.0);
        }
        self
    }

    fn scale_cols(mut self, f: &[f64]) -> Self {
        for (mut col, s) in self.0.column_iter_mut().zip(f) {
            col *= C::new(*s, 0.0);
        }
        self
    }
}

/// max|A − B| / max(max|A|, max|B|); zero when both vanish.
pub fn discrepancy(a: &OperatorKernel, b: &OperatorKernel) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    (&a.0 - &b.0).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

fn weighted_product(a: &DMatrix<C>, b: &DMatrix<C>, mid: &[f64]) -> DMatrix<C> {
    let mut a = a.clone();
    for (mut col, w) in a.column_iter_mut().zip(mid) {
        col *= C::new(*w, 0.0);
    }
    a * b
}

/// 2×2 block of kernels, entries indexed from 1 as in the block notation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockKernel(pub [[OperatorKernel; 2]; 2]);

impl BlockKernel {
    pub fn entry(&self, a: usize, b: usize) -> &OperatorKernel {
        &self.0[a - 1][b - 1]
    }

    pub fn max_discrepancy(&self, other: &BlockKernel) -> f64 {
        let scale = (1..=2)
            .flat_map(|a| (1..=2).map(move |b| (a, b)))
            .map(|(a, b)| self.entry(a, b).max_abs().max(other.entry(a, b).max_abs()))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (1..=2)
            .flat_map(|a| (1..=2).map(move |b| (a, b)))
            .map(|(a, b)| {
                (&self.entry(a, b).0 - &other.entry(a, b).0)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            / scale
    }
}

/// Constant 2×2 matrices of the block algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMatrix {
    K,
    KT,
    Sigma3,
    SigmaPlus,
    SigmaMinus,
}

impl BasisMatrix {
    pub const ALL: [BasisMatrix; 5] = [
        BasisMatrix::K,
        BasisMatrix::KT,
        BasisMatrix::Sigma3,
        BasisMatrix::SigmaPlus,
        BasisMatrix::SigmaMinus,
    ];

    pub fn matrix(self) -> Matrix2<f64> {
        match self {
            BasisMatrix::K => Matrix2::new(1.0, 1.0, -1.0, -1.0),
            BasisMatrix::KT => Matrix2::new(1.0, -1.0, 1.0, -1.0),
            BasisMatrix::Sigma3 => Matrix2::new(1.0, 0.0, 0.0, -1.0),
            BasisMatrix::SigmaPlus => Matrix2::new(1.0, 1.0, 1.0, 1.0),
            BasisMatrix::SigmaMinus => Matrix2::new(1.0, -1.0, -1.0, 1.0),
        }
    }
}

/// Which construction of the 𝓛̂ blocks to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// x̌-moment kernels and the second-order X, Y kernels.
    Closed,
    /// Nested x̌-quadrature of Π̂_k P·V·Q·… Π̂_k with P, Q expanded in kℓ.
    Nested,
}

// Entries of the nested-route block algebra: multiplication operators stay
// diagonal, integral operators are dense.
#[derive(Debug, Clone)]
enum Entry {
    Zero,
    Diag(Vec<C>),
    Dense(DMatrix<C>),
}

type Blk = [[Entry; 2]; 2];

fn entry_mul(a: &Entry, b: &Entry, mid: &[f64]) -> Entry {
    match (a, b) {
        (Entry::Zero, _) | (_, Entry::Zero) => Entry::Zero,
        (Entry::Diag(d), Entry::Diag(e)) => {
            Entry::Diag(d.iter().zip(e).map(|(x, y)| x * y).collect())
        }
        (Entry::Diag(d), Entry::Dense(m)) => {
            let mut m = m.clone();
            for (mut row, s) in m.row_iter_mut().zip(d) {
                row *= *s;
            }
            Entry::Dense(m)
        }
        (Entry::Dense(m), Entry::Diag(d)) => {
            let mut m = m.clone();
            for (mut col, s) in m.column_iter_mut().zip(d) {
                col *= *s;
            }
            Entry::Dense(m)
        }
        (Entry::Dense(m), Entry::Dense(n)) => Entry::Dense(weighted_product(m, n, mid)),
    }
}

fn entry_add(a: Entry, b: Entry) -> Entry {
    match (a, b) {
        (Entry::Zero, x) | (x, Entry::Zero) => x,
        (Entry::Diag(d), Entry::Diag(e)) => {
            Entry::Diag(d.iter().zip(&e).map(|(x, y)| x + y).collect())
        }
        (Entry::Dense(m), Entry::Dense(n)) => Entry::Dense(m + n),
        _ => unreachable!("diagonal and integral entries are never summed"),
    }
}

fn entry_scale(a: Entry, s: C) -> Entry {
    match a {
        Entry::Zero => Entry::Zero,
        Entry::Diag(d) => Entry::Diag(d.into_iter().map(|x| x * s).collect()),
        Entry::Dense(m) => Entry::Dense(m * s),
    }
}

fn zero_blk() -> Blk {
    [[Entry::Zero, Entry::Zero], [Entry::Zero, Entry::Zero]]
}

fn blk_mul(a: &Blk, b: &Blk, mid: &[f64]) -> Blk {
    let mut out = zero_blk();
    for (r, row) in out.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            let x = entry_mul(&a[r][0], &b[0][c], mid);
            let y = entry_mul(&a[r][1], &b[1][c], mid);
            *slot = entry_add(x, y);
        }
    }
    out
}

fn blk_add(a: Blk, b: Blk) -> Blk {
    let [[a11, a12], [a21, a22]] = a;
    let [[b11, b12], [b21, b22]] = b;
    [
        [entry_add(a11, b11), entry_add(a12, b12)],
        [entry_add(a21, b21), entry_add(a22, b22)],
    ]
}

fn blk_scale(a: Blk, s: C) -> Blk {
    let [[a11, a12], [a21, a22]] = a;
    [
        [entry_scale(a11, s), entry_scale(a12, s)],
        [entry_scale(a21, s), entry_scale(a22, s)],
    ]
}

/// Product of kℓ-series of blocks, truncated after `order`.
fn series_mul(a: &[Blk], b: &[Blk], mid: &[f64], order: usize) -> Vec<Blk> {
    (0..=order)
        .map(|n| {
            (0..=n)
                .filter(|&i| i < a.len() && n - i < b.len())
                .fold(zero_blk(), |acc, i| {
                    blk_add(acc, blk_mul(&a[i], &b[n - i], mid))
                })
        })
        .collect()
}

/// Coefficient of (kℓ)^j in C(x̌), ϖ̌⁻¹·iS(x̌) and ϖ̌·iS(x̌) at the given ϖ̌².
fn cs_terms(x: f64, j: usize, w2: &[f64]) -> (Entry, Entry, Entry) {
    let fact: f64 = (1..=j).map(|i| i as f64).product();
    let c = I.powu(j as u32) * (x.powi(j as i32) / fact);
    let m = (j / 2) as i32;
    let diag = |pow: i32| Entry::Diag(w2.iter().map(|w| c * w.powi(pow)).collect());
    if j.is_multiple_of(2) {
        (diag(m), Entry::Zero, Entry::Zero)
    } else {
        (Entry::Zero, diag(m), diag(m + 1))
    }
}

fn p_series(x: f64, w2: &[f64], order: usize) -> Vec<Blk> {
    (0..=order)
        .map(|j| {
            let (cc, inv, fwd) = cs_terms(x, j, w2);
            [
                [cc.clone(), entry_scale(fwd, -ONE)],
                [entry_scale(inv, -ONE), cc],
            ]
        })
        .collect()
}

fn q_series(x: f64, w2: &[f64], order: usize) -> Vec<Blk> {
    (0..=order)
        .map(|j| {
            let (cc, inv, fwd) = cs_terms(x, j, w2);
            [[inv, cc.clone()], [cc, fwd]]
        })
        .collect()
}

fn sigma1(n: usize) -> Blk {
    let one = || Entry::Diag(vec![ONE; n]);
    [[Entry::Zero, one()], [one(), Entry::Zero]]
}

fn dense(e: Entry, rows: usize, cols: usize) -> OperatorKernel {
    match e {
        Entry::Zero => OperatorKernel::zeros(rows, cols),
        Entry::Dense(m) => OperatorKernel(m),
        Entry::Diag(_) => unreachable!("integrated blocks are integral operators"),
    }
}

fn to_block(b: Blk, n: usize) -> BlockKernel {
    let [[a11, a12], [a21, a22]] = b;
    BlockKernel([
        [dense(a11, n, n), dense(a12, n, n)],
        [dense(a21, n, n), dense(a22, n, n)],
    ])
}

/// Fourier factors of a kernel builder: E_R[i][y] = e^{−ip_i y} and E_C[y][j] = e^{iq_j y}.
#[derive(Debug, Clone)]
struct Fourier {
    rows: DMatrix<C>,
    cols: DMatrix<C>,
}

impl Fourier {
    fn new(ys: &[f64], rows: &MomentumSet, cols: &MomentumSet) -> Self {
        let r = DMatrix::from_fn(rows.len(), ys.len(), |i, y| {
            C::new(0.0, -rows.p[i] * ys[y]).exp()
        });
        let c = DMatrix::from_fn(ys.len(), cols.len(), |y, j| {
            C::new(0.0, cols.p[j] * ys[y]).exp()
        });
        Fourier { rows: r, cols: c }
    }

    /// (1/2π) Σ_y e^{−i(p_i−q_j)y} g_y with weighted samples g_y.
    fn kernel(&self, weighted: &[C]) -> DMatrix<C> {
        let mut a = self.rows.clone();
        for (mut col, g) in a.column_iter_mut().zip(weighted) {
            col *= *g / (2.0 * PI);
        }
        a * &self.cols
    }
}

/// Kernels of the three profile components at one x̌ (or integrated in x̌).
struct Components {
    v_alpha: DMatrix<C>,
    w_alpha: DMatrix<C>,
    w_beta: DMatrix<C>,
}

impl Components {
    /// 𝒲̂ = k⁻² p̂ v̂_α p̂ + ŵ_β between the given sets.
    fn script_w(&self, rows: &MomentumSet, cols: &MomentumSet) -> DMatrix<C> {
        let k = rows.k;
        let mut v = self.v_alpha.clone();
        for (mut row, p) in v.row_iter_mut().zip(&rows.p) {
            row *= C::new(p / k, 0.0);
        }
        for (mut col, q) in v.column_iter_mut().zip(&cols.p) {
            col *= C::new(q / k, 0.0);
        }
        v + &self.w_beta
    }
}

/// Operator-grid oracle at fixed wavenumber on a fixed momentum set.
pub struct DysonOracle {
    ab: AlphaBetaProfile,
    settings: Settings,
    set: MomentumSet,
    moments: MomentTable,
    second: SecondOrderKernels,
    x_rule: Rule,
    cache: Mutex<HashMap<(usize, usize, Route), Arc<BlockKernel>>>,
}

impl std::fmt::Debug for DysonOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DysonOracle")
            .field("set", &self.set)
            .field("kind", &self.moments.kind)
            .finish()
    }
}

impl DysonOracle {
    pub fn new(ab: &AlphaBetaProfile, set: MomentumSet, settings: &Settings) -> Result<Self> {
        settings.validate()?;
        if !set.is_propagating() {
            return Err(Error::InvalidInput(
                "oracle momentum set must be propagating".into(),
            ));
        }
        let moments = moments(ab, settings)?;
        match (moments.kind, set.discrete) {
            (SpectralKind::Discrete, false) if !ab.is_zero() => {
                let shift = moments.shifts().into_iter().next().unwrap_or(0.0);
                return Err(Error::DiscreteOffGrid { shift });
            }
            (SpectralKind::Continuous, true) => {
                return Err(Error::InvalidInput(
                    "smooth spectra need an angular grid, not a channel set".into(),
                ))
            }
            _ => {}
        }
        let second = SecondOrderKernels::build(ab, moments.grid(), settings)?;
        let x_rule = Self::x_rule(ab, moments.grid(), settings.x_nodes);
        Ok(DysonOracle {
            ab: ab.clone(),
            settings: *settings,
            set,
            moments,
            second,
            x_rule,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Oracle for incidence at θ₀ with outgoing momenta k sin θ for the given angles.
    /// Discrete media ignore `thetas` and `nodes` and use the reachable channels.
    pub fn for_incidence(
        ab: &AlphaBetaProfile,
        k: f64,
        theta0: f64,
        thetas: &[f64],
        nodes: usize,
        settings: &Settings,
    ) -> Result<Self> {
        let m = moments(ab, settings)?;
        let p0 = k * theta0.sin();
        let set = match m.kind {
            SpectralKind::Discrete => {
                let mut shifts = m.shifts();
                if !shifts.iter().any(|s| same_momentum(*s, 0.0)) {
                    shifts.push(0.0);
                }
                MomentumSet::channels(k, p0, &shifts)?
            }
            SpectralKind::Continuous => {
                let grid = AngularGrid::new(k, nodes)?;
                let mut ext = vec![p0];
                ext.extend(thetas.iter().map(|t| k * t.sin()));
                MomentumSet::angular(&grid, &ext)?
            }
        };
        Self::new(ab, set, settings)
    }

    pub fn set(&self) -> &MomentumSet {
        &self.set
    }

    pub fn kind(&self) -> SpectralKind {
        self.moments.kind
    }

    fn x_rule(ab: &AlphaBetaProfile, grid: Option<&Arc<YGrid>>, n: usize) -> Rule {
        let mut breaks = ab.x_breaks(0.0);
        if let Some(g) = grid {
            for &y in g.nodes() {
                breaks.extend(ab.x_breaks(y));
            }
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        quad::composite(&quad::merge_breaks(0.0, 1.0, &breaks), n)
    }

    /// Entry of a kernel ⟨p_i|f|p_j⟩ from a spectral value at momentum transfer p_i − p_j.
    fn entry(&self, v: SpectralValue, shift: f64) -> C {
        match self.moments.kind {
            SpectralKind::Continuous => v.value() / (2.0 * PI),
            SpectralKind::Discrete => v.mass_at(shift),
        }
    }

    fn moment_kernel(&self, f: impl Fn(f64, f64) -> SpectralValue + Sync) -> OperatorKernel {
        let n = self.set.len();
        let p = &self.set.p;
        let vals: Vec<C> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % n, idx / n);
                self.entry(f(p[i], p[j]), p[i] - p[j])
            })
            .collect();
        OperatorKernel(DMatrix::from_vec(n, n, vals))
    }

    /// Kernels of the three components at x̌ between two sets.
    fn components(
        &self,
        x: f64,
        rows: &MomentumSet,
        cols: &MomentumSet,
        fourier: Option<&Fourier>,
    ) -> Result<Components> {
        let build = |s: Symbol| -> Result<DMatrix<C>> {
            let f = self.ab.field(s);
            if f.is_zero() {
                return Ok(DMatrix::zeros(rows.len(), cols.len()));
            }
            match (fourier, self.moments.grid()) {
                (Some(ft), Some(grid)) => {
                    let g: Vec<C> = grid.rule.iter().map(|(y, w)| f.value(x, y) * w).collect();
                    Ok(ft.kernel(&g))
                }
                _ => discrete_kernel(&f.harmonics(x)?, rows, cols),
            }
        };
        Ok(Components {
            v_alpha: build(Symbol::VAlpha)?,
            w_alpha: build(Symbol::WAlpha)?,
            w_beta: build(Symbol::WBeta)?,
        })
    }

    /// Kernels of ∫₀^{x̌} f(x̌₁, y) dx̌₁ for the three components.
    fn cumulative(
        &self,
        x: f64,
        rows: &MomentumSet,
        cols: &MomentumSet,
        fourier: Option<&Fourier>,
    ) -> Result<Components> {
        let n = self.settings.x_nodes;
        let build = |s: Symbol| -> Result<DMatrix<C>> {
            let f = self.ab.field(s);
            if f.is_zero() || x == 0.0 {
                return Ok(DMatrix::zeros(rows.len(), cols.len()));
            }
            match (fourier, self.moments.grid()) {
                (Some(ft), Some(grid)) => {
                    let g: Vec<C> = grid
                        .rule
                        .iter()
                        .map(|(y, w)| {
                            let inner = interior(&self.ab.x_breaks(y), x);
                            let rule = quad::composite(&quad::merge_breaks(0.0, x, &inner), n);
                            rule.integrate(|x1| f.value(x1, y)) * w
                        })
                        .collect();
                    Ok(ft.kernel(&g))
                }
                _ => {
                    let inner = interior(&self.ab.x_breaks(0.0), x);
                    let rule = quad::composite(&quad::merge_breaks(0.0, x, &inner), n);
                    let mut acc = DMatrix::zeros(rows.len(), cols.len());
                    for (x1, w) in rule.iter() {
                        acc += discrete_kernel(&f.harmonics(x1)?, rows, cols)? * C::new(w, 0.0);
                    }
                    Ok(acc)
                }
            }
        };
        Ok(Components {
            v_alpha: build(Symbol::VAlpha)?,
            w_alpha: build(Symbol::WAlpha)?,
            w_beta: build(Symbol::WBeta)?,
        })
    }

    fn fourier(&self, rows: &MomentumSet, cols: &MomentumSet) -> Option<Fourier> {
        self.moments
            .grid()
            .map(|g| Fourier::new(g.nodes(), rows, cols))
    }

    /// The pair {𝒲̂(x̌), ŵ_α(x̌)} on the oracle's momentum set.
    pub fn w_kernel(&self, x: f64) -> Result<(OperatorKernel, OperatorKernel)> {
        let ft = self.fourier(&self.set, &self.set);
        let c = self.components(x, &self.set, &self.set, ft.as_ref())?;
        Ok((
            OperatorKernel(c.script_w(&self.set, &self.set)),
            OperatorKernel(c.w_alpha),
        ))
    }

    /// Internal momenta for the composition inside 𝓛̂₂: a truncated line for
    /// smooth spectra, the shifted channels for discrete ones.
    fn internal_set(&self) -> MomentumSet {
        let k = self.set.k;
        match self.moments.grid() {
            None => {
                let mut shifts = self.moments.shifts();
                shifts.push(0.0);
                MomentumSet::shifted(&self.set, &shifts)
            }
            Some(grid) => {
                let scale = match self.ab.decay {
                    DecayClass::Gaussian { width } => width,
                    DecayClass::Exponential { rate } => 2.0 / rate,
                    DecayClass::CompactSupport { y_min, y_max } => (y_max - y_min) / PI,
                    _ => 1.0,
                };
                let reach = self.set.p.iter().fold(0.0f64, |m, p| m.max(p.abs()));
                MomentumSet::line(k, reach + 1.05 * grid.q_max, 1.0 / scale)
            }
        }
    }

    /// 𝓛̂ₙ⁽ʲ⁾ for (n, j) ∈ {(1,0), (1,1), (2,0)} by the chosen route.
    pub fn script_l(&self, n: usize, j: usize, route: Route) -> Result<Arc<BlockKernel>> {
        if !matches!((n, j), (1, 0) | (1, 1) | (2, 0)) {
            return Err(Error::InvalidInput(format!(
                "block (n, j) = ({n}, {j}) is not available"
            )));
        }
        if let Some(b) = self.cache.lock().expect("cache lock").get(&(n, j, route)) {
            return Ok(b.clone());
        }
        let block = Arc::new(match route {
            Route::Closed => self.closed_l(n, j),
            Route::Nested => self.nested_l(n, j)?,
        });
        self.cache
            .lock()
            .expect("cache lock")
            .insert((n, j, route), block.clone());
        Ok(block)
    }

    /// Both routes; RouteMismatch when they differ by more than oracle_tol.
    pub fn script_l_checked(&self, n: usize, j: usize) -> Result<(Arc<BlockKernel>, f64)> {
        let closed = self.script_l(n, j, Route::Closed)?;
        let nested = self.script_l(n, j, Route::Nested)?;
        let d = closed.max_discrepancy(&nested);
        if !(d <= self.settings.oracle_tol) {
            return Err(Error::RouteMismatch {
                what: format!("L block ({n}, {j})"),
                discrepancy: d,
                tol: self.settings.oracle_tol,
            });
        }
        Ok((nested, d))
    }

    fn closed_l(&self, n: usize, j: usize) -> BlockKernel {
        let (k, m) = (self.set.k, &self.moments);
        let size = self.set.len();
        let zero = || OperatorKernel::zeros(size, size);
        match (n, j) {
            (1, 0) => {
                let w0 = self.moment_kernel(|p, pp| kernel_w(0, p, pp, k, m));
                let a0 = self.moment_kernel(|p, pp| m.at(Symbol::WAlpha, 0, p - pp));
                BlockKernel([[zero(), w0], [a0, zero()]])
            }
            (1, 1) => {
                let w1 = self.moment_kernel(|p, pp| kernel_w(1, p, pp, k, m));
                let a1 = self.moment_kernel(|p, pp| m.at(Symbol::WAlpha, 1, p - pp));
                let w2 = self.set.varpi2();
                let upper = OperatorKernel((&w1.0 - a1.clone().scale_rows(&w2).0) * I);
                let lower = OperatorKernel((a1.scale_cols(&w2).0 - &w1.0) * I);
                BlockKernel([[upper, zero()], [zero(), lower]])
            }
            _ => {
                let x = self.moment_kernel(|p, pp| {
                    let ks = self.second.eval(p, pp, k);
                    ks.x1.add(ks.x2)
                });
                let y = self.moment_kernel(|p, pp| {
                    let ks = self.second.eval(p, pp, k);
                    ks.y1.add(ks.y2)
                });
                BlockKernel([[x, zero()], [zero(), y]])
            }
        }
    }

    fn nested_l(&self, n: usize, j: usize) -> Result<BlockKernel> {
        let set = &self.set;
        let size = set.len();
        let w2 = set.varpi2();
        let nodes: Vec<(f64, f64)> = self.x_rule.iter().collect();
        if n == 1 {
            let ft = self.fourier(set, set);
            let parts: Vec<Blk> = nodes
                .par_iter()
                .map(|&(x, w)| -> Result<Blk> {
                    let c = self.components(x, set, set, ft.as_ref())?;
                    let v: Blk = [
                        [Entry::Dense(c.script_w(set, set)), Entry::Zero],
                        [Entry::Zero, Entry::Dense(c.w_alpha)],
                    ];
                    let pv = series_mul(&p_series(x, &w2, j), &[v], &set.measure, j);
                    let mut l = series_mul(&pv, &q_series(x, &w2, j), &set.measure, j);
                    Ok(blk_scale(l.swap_remove(j), C::new(w, 0.0)))
                })
                .collect::<Result<_>>()?;
            let total = parts.into_iter().fold(zero_blk(), blk_add);
            return Ok(to_block(total, size));
        }
        let line = self.internal_set();
        let (out_ft, in_ft) = (self.fourier(set, &line), self.fourier(&line, set));
        let parts: Vec<Blk> = nodes
            .par_iter()
            .map(|&(x2, w)| -> Result<Blk> {
                let outer = self.components(x2, set, &line, out_ft.as_ref())?;
                let inner = self.cumulative(x2, &line, set, in_ft.as_ref())?;
                let v2: Blk = [
                    [Entry::Dense(outer.script_w(set, &line)), Entry::Zero],
                    [Entry::Zero, Entry::Dense(outer.w_alpha)],
                ];
                let v1: Blk = [
                    [Entry::Dense(inner.script_w(&line, set)), Entry::Zero],
                    [Entry::Zero, Entry::Dense(inner.w_alpha)],
                ];
                let left = blk_mul(&v2, &sigma1(line.len()), &line.measure);
                let right = blk_mul(&v1, &sigma1(size), &set.measure);
                Ok(blk_scale(
                    blk_mul(&left, &right, &line.measure),
                    C::new(w, 0.0),
                ))
            })
            .collect::<Result<_>>()?;
        self.check_line_truncation(&line);
        let total = parts.into_iter().fold(zero_blk(), blk_add);
        Ok(to_block(total, size))
    }

    fn check_line_truncation(&self, line: &MomentumSet) {
        if line.discrete || line.len() < 2 {
            return;
        }
        let Some(grid) = self.moments.grid() else {
            return;
        };
        let f = &self.ab.w_alpha;
        let g: Vec<C> = grid.rule.iter().map(|(y, w)| f.value(0.5, y) * w).collect();
        let peak = grid.transform(&g, 0.0).norm();
        let edge = line.p[line.len() - 1] - self.set.p.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        let tail = grid.transform(&g, edge).norm();
        if peak > 0.0 && tail > self.settings.spectral_tol * peak {
            let err = Error::TruncationWarning {
                q_max: edge,
                tail: tail / peak,
                tol: self.settings.spectral_tol,
            };
            log::warn!("{err}");
        }
    }

    /// N̂_ab⁽ᵐ⁾ assembled from the 𝓛̂ blocks of the chosen route.
    pub fn nab(&self, m: usize, a: usize, b: usize, route: Route) -> Result<OperatorKernel> {
        check_nab(m, a, b)?;
        let size = self.set.len();
        let vp = self.set.varpi();
        let inv: Vec<f64> = vp.iter().map(|v| 1.0 / v).collect();
        let coef = |bm: BasisMatrix| C::new(bm.matrix()[(a - 1, b - 1)], 0.0);
        let mut acc = DMatrix::<C>::zeros(size, size);
        for n in 1..=m {
            let l = self.script_l(n, m - n, route)?;
            let term = l.entry(1, 1).0.clone() * coef(BasisMatrix::SigmaMinus)
                + l.entry(1, 2).clone().scale_cols(&inv).0 * coef(BasisMatrix::K)
                + l.entry(2, 1).clone().scale_rows(&vp).0 * coef(BasisMatrix::KT)
                + l.entry(2, 2).clone().scale_rows(&vp).scale_cols(&inv).0
                    * coef(BasisMatrix::SigmaPlus);
            acc += term * (I.powu(n as u32) * 0.5);
        }
        Ok(OperatorKernel(-acc))
    }

    /// Direct matrix elements of N̂_ab⁽ᵐ⁾ from the W, w̄_α, X, Y kernels.
    pub fn nab_closed(&self, m: usize, a: usize, b: usize) -> Result<OperatorKernel> {
        check_nab(m, a, b)?;
        let (k, mt) = (self.set.k, &self.moments);
        let vp = self.set.varpi();
        let sa = if a == 1 { -1.0 } else { 1.0 };
        let sb = if b == 1 { -1.0 } else { 1.0 };
        let n = self.set.len();
        let p = &self.set.p;
        let vals: Vec<C> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % n, idx / n);
                let (pi, pj) = (p[i], p[j]);
                let e = |v: SpectralValue| self.entry(v, pi - pj);
                if m == 1 {
                    let w0 = e(kernel_w(0, pi, pj, k, mt));
                    let a0 = e(mt.at(Symbol::WAlpha, 0, pi - pj));
                    (w0 * (sa / vp[j]) + a0 * (sb * vp[i])) * (I * 0.5)
                } else {
                    let ks = self.second.eval(pi, pj, k);
                    let w1 = e(kernel_w(1, pi, pj, k, mt));
                    let a1 = e(mt.at(Symbol::WAlpha, 1, pi - pj));
                    let left = e(ks.x1.add(ks.x2)) + w1 - a1 * vp[i].powi(2);
                    let right = e(ks.y1.add(ks.y2)) - w1 + a1 * vp[j].powi(2);
                    (left * (sa * sb) + right * (vp[i] / vp[j])) * 0.5
                }
            })
            .collect();
        Ok(OperatorKernel(DMatrix::from_vec(n, n, vals)))
    }

    /// Assembled N̂_ab⁽ᵐ⁾ (nested route) checked against the direct matrix elements.
    pub fn nab_checked(&self, m: usize, a: usize, b: usize) -> Result<(OperatorKernel, f64)> {
        let assembled = self.nab(m, a, b, Route::Nested)?;
        let direct = self.nab_closed(m, a, b)?;
        let d = discrepancy(&assembled, &direct);
        if !(d <= self.settings.oracle_tol) {
            return Err(Error::RouteMismatch {
                what: format!("N_{a}{b}^({m})"),
                discrepancy: d,
                tol: self.settings.oracle_tol,
            });
        }
        Ok((assembled, d))
    }

    /// Coefficients [order 1, order 2] of ⟨p₁|…|p₀⟩ in the branch fixed by the
    /// signs of cos θ₀ and cos θ, before the 2πk|cos θ₀| prefactor.
    fn branch_coefficients(
        &self,
        i1: usize,
        i0: usize,
        forward: bool,
        incident_forward: bool,
        order: usize,
        route: Route,
    ) -> Result<[C; 2]> {
        let a = if forward { 1 } else { 2 };
        let b = if incident_forward { 1 } else { 2 };
        let first = self.nab(1, a, b, route)?.at(i1, i0);
        if order < 2 {
            return Ok([first, ZERO]);
        }
        let left = self.nab(1, a, 2, route)?;
        let right = self.nab(1, 2, b, route)?;
        let product: C = (0..self.set.len())
            .map(|m| left.at(i1, m) * right.at(m, i0) * self.set.measure[m])
            .sum();
        Ok([first, self.nab(2, a, b, route)?.at(i1, i0) + product])
    }

    /// Amplitude coefficients f⁽¹⁾, f⁽²⁾ at θ for incidence θ₀ (smooth spectra).
    pub fn coefficients(
        &self,
        theta0: f64,
        theta: f64,
        order: usize,
        route: Route,
    ) -> Result<[C; 2]> {
        if self.set.discrete {
            return Err(Error::InvalidInput(
                "pointwise coefficients need an angular grid".into(),
            ));
        }
        let k = self.set.k;
        let (c0, c) = (theta0.cos(), theta.cos());
        let floor = self.settings.angle_floor;
        for t in [theta0, theta] {
            if t.cos().abs() < floor {
                return Err(Error::GrazingAngle {
                    angle_deg: t.to_degrees(),
                });
            }
        }
        let i0 = self.locate(k * theta0.sin())?;
        let i1 = self.locate(k * theta.sin())?;
        let raw = self.branch_coefficients(i1, i0, c > 0.0, c0 > 0.0, order, route)?;
        let pre = prefactor(k, c0, c);
        Ok([raw[0] * pre, raw[1] * pre])
    }

    fn locate(&self, p: f64) -> Result<usize> {
        self.set
            .position(p)
            .ok_or_else(|| Error::InvalidInput(format!("momentum {p} is not in the oracle set")))
    }

    /// Channel weights [order 1, order 2] for incidence θ₀ (discrete spectra).
    pub fn channel_coefficients(
        &self,
        theta0: f64,
        order: usize,
        route: Route,
    ) -> Result<Vec<(f64, f64, [C; 2])>> {
        if !self.set.discrete {
            return Err(Error::InvalidInput(
                "channel weights need a channel set".into(),
            ));
        }
        let k = self.set.k;
        let (s0, c0) = (theta0.sin(), theta0.cos());
        if c0.abs() < self.settings.angle_floor {
            return Err(Error::GrazingAngle {
                angle_deg: theta0.to_degrees(),
            });
        }
        let i0 = self.locate(k * s0)?;
        let mut out = Vec::new();
        for (i1, &p1) in self.set.p.iter().enumerate() {
            let s = p1 / k;
            let cp = (1.0 - s * s).sqrt();
            if cp < self.settings.angle_floor {
                continue;
            }
            let plus = s.asin();
            for (theta, c) in [(wrap_angle(plus), cp), (wrap_angle(PI - plus), -cp)] {
                let raw = self.branch_coefficients(i1, i0, c > 0.0, c0 > 0.0, order, route)?;
                let pre = prefactor(k, c0, c) / (k * cp);
                out.push((theta, p1 - k * s0, [raw[0] * pre, raw[1] * pre]));
            }
        }
        Ok(out)
    }
}

fn check_nab(m: usize, a: usize, b: usize) -> Result<()> {
    if !(1..=2).contains(&m) || !(1..=2).contains(&a) || !(1..=2).contains(&b) {
        return Err(Error::InvalidInput(format!(
            "N_ab^(m) needs m, a, b in {{1, 2}}, got ({m}, {a}, {b})"
        )));
    }
    Ok(())
}

/// −(i/√2π)·(∓2πk|cos θ₀|), minus for outgoing cos θ > 0.
fn prefactor(k: f64, c0: f64, c: f64) -> C {
    let sign = if c > 0.0 { -1.0 } else { 1.0 };
    -I / (2.0 * PI).sqrt() * (sign * 2.0 * PI * k * c0.abs())
}

fn interior(breaks: &[f64], x: f64) -> Vec<f64> {
    breaks
        .iter()
        .copied()
        .filter(|b| *b > 0.0 && *b < x)
        .collect()
}

/// Channel kernel: entry (i, j) is the Dirac coefficient at shift p_i − q_j.
fn discrete_kernel(
    terms: &[crate::media::Harmonic],
    rows: &MomentumSet,
    cols: &MomentumSet,
) -> Result<DMatrix<C>> {
    if !rows.discrete || !cols.discrete {
        let shift = terms.first().map_or(0.0, |h| h.p);
        return Err(Error::DiscreteOffGrid { shift });
    }
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let q = rows.p[i] - cols.p[j];
        terms
            .iter()
            .filter(|h| same_momentum(h.p, q))
            .map(|h| h.c)
            .sum()
    }))
}

/// Series amplitude Σ_{m ≤ order} 𝔣⁽ᵐ⁾(kℓ)ᵐ built from the nested-route blocks.
pub fn series_amplitude(
    ab: &AlphaBetaProfile,
    k: f64,
    theta0: f64,
    thetas: &[f64],
    nodes: usize,
    kl: f64,
    order: usize,
    settings: &Settings,
) -> Result<Amplitude> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "order must be 1 or 2, got {order}"
        )));
    }
    let oracle = DysonOracle::for_incidence(ab, k, theta0, thetas, nodes, settings)?;
    oracle.amplitude(theta0, thetas, kl, order, Route::Nested)
}

impl DysonOracle {
    pub fn amplitude(
        &self,
        theta0: f64,
        thetas: &[f64],
        kl: f64,
        order: usize,
        route: Route,
    ) -> Result<Amplitude> {
        let combine = |c: [C; 2]| c[0] * kl + if order >= 2 { c[1] * (kl * kl) } else { ZERO };
        match self.set.discrete {
            false => {
                let smooth = thetas
                    .iter()
                    .map(|&t| Ok((t, combine(self.coefficients(theta0, t, order, route)?))))
                    .collect::<Result<_>>()?;
                Ok(Amplitude {
                    smooth,
                    dirac: Vec::new(),
                })
            }
            true => {
                let dirac = self
                    .channel_coefficients(theta0, order, route)?
                    .into_iter()
                    .map(|(theta, shift, c)| DiracWeight {
                        theta,
                        weight: combine(c),
                        shift,
                    })
                    .collect();
                Ok(Amplitude {
                    smooth: Vec::new(),
                    dirac,
                })
            }
        }
    }
}

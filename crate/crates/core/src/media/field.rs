//! Complex profile functions on the strip x̌ ∈ [0, 1], y ∈ ℝ.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One term c·e^{ipy} of a finite harmonic sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub p: f64,
    pub c: Complex64,
}

impl Harmonic {
    pub fn new(p: f64, c: Complex64) -> Self {
        Harmonic { p, c }
    }
}

/// Whether two wavenumbers denote the same channel.
pub fn same_momentum(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Combine terms with equal wavenumbers and drop exact zeros; output is sorted by p.
pub fn merge_harmonics(mut terms: Vec<Harmonic>) -> Vec<Harmonic> {
    terms.sort_by(|a, b| a.p.total_cmp(&b.p));
    let mut out: Vec<Harmonic> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if same_momentum(last.p, t.p) => last.c += t.c,
            _ => out.push(t),
        }
    }
    out.retain(|h| h.c != Complex64::new(0.0, 0.0));
    out
}

/// A complex profile component w(x̌, y).
pub trait Field: Send + Sync + fmt::Debug {
    fn value(&self, x: f64, y: f64) -> Complex64;

    /// ∂w/∂y; five-point stencil unless overridden.
    fn dy(&self, x: f64, y: f64) -> Complex64 {
        let h = 2e-3 * y.abs().max(1.0);
        (self.value(x, y - 2.0 * h) - self.value(x, y + 2.0 * h)
            + 8.0 * (self.value(x, y + h) - self.value(x, y - h)))
            / (12.0 * h)
    }

    /// True when the y-dependence is a finite sum of harmonics.
    fn is_discrete(&self) -> bool {
        false
    }

    /// Harmonic content at x̌ (only for discrete fields).
    fn harmonics(&self, _x: f64) -> Result<Vec<Harmonic>> {
        Err(Error::NonIntegrable(format!(
            "{self:?} has no finite harmonic expansion"
        )))
    }

    /// Interior x̌-kinks of the profile along the column at y.
    fn x_breaks(&self, _y: f64) -> Vec<f64> {
        Vec::new()
    }

    /// y-locations of kinks (used to panel y-quadrature).
    fn y_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    fn is_zero(&self) -> bool {
        false
    }
}

pub type FieldRef = Arc<dyn Field>;

/// w ≡ 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Field for Zero {
    fn value(&self, _: f64, _: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn dy(&self, _: f64, _: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn is_discrete(&self) -> bool {
        true
    }
    fn harmonics(&self, _: f64) -> Result<Vec<Harmonic>> {
        Ok(Vec::new())
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Finite harmonic sum with x̌-independent coefficients: homogeneous slabs
/// (single p = 0 term) and the single-harmonic grating z0 + z1 e^{iKy}.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSum {
    terms: Vec<Harmonic>,
}

impl HarmonicSum {
    pub fn new(terms: Vec<Harmonic>) -> Self {
        HarmonicSum {
            terms: merge_harmonics(terms),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![Harmonic::new(0.0, c)])
    }

    pub fn grating(z0: Complex64, z1: Complex64, k_grating: f64) -> Self {
        Self::new(vec![Harmonic::new(0.0, z0), Harmonic::new(k_grating, z1)])
    }

    pub fn terms(&self) -> &[Harmonic] {
        &self.terms
    }
}

impl Field for HarmonicSum {
    fn value(&self, _x: f64, y: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|h| h.c * Complex64::new(0.0, h.p * y).exp())
            .sum()
    }
    fn dy(&self, _x: f64, y: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|h| Complex64::new(0.0, h.p) * h.c * Complex64::new(0.0, h.p * y).exp())
            .sum()
    }
    fn is_discrete(&self) -> bool {
        true
    }
    fn harmonics(&self, _x: f64) -> Result<Vec<Harmonic>> {
        Ok(self.terms.clone())
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// amp · e^{−decay·x̌} · e^{−y²/2L²}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianExp {
    pub amp: Complex64,
    /// Exponential rate in x̌ (κℓ in physical units).
    pub decay: f64,
    /// Gaussian width L along y.
    pub width: f64,
}

impl Field for GaussianExp {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        self.amp * (-self.decay * x - 0.5 * (y / self.width).powi(2)).exp()
    }
    fn dy(&self, x: f64, y: f64) -> Complex64 {
        self.value(x, y) * (-y / (self.width * self.width))
    }
    fn is_zero(&self) -> bool {
        self.amp == Complex64::new(0.0, 0.0)
    }
}

/// v = w/(1+w) for a given w.
#[derive(Debug, Clone)]
pub struct Reciprocal {
    inner: FieldRef,
    series_tol: f64,
}

impl Reciprocal {
    pub fn new(inner: FieldRef, series_tol: f64) -> Self {
        Reciprocal { inner, series_tol }
    }
}

impl Field for Reciprocal {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        let w = self.inner.value(x, y);
        w / (w + 1.0)
    }
    fn dy(&self, x: f64, y: f64) -> Complex64 {
        let w = self.inner.value(x, y);
        self.inner.dy(x, y) / ((w + 1.0) * (w + 1.0))
    }
    fn is_discrete(&self) -> bool {
        self.inner.is_discrete()
    }
    fn harmonics(&self, x: f64) -> Result<Vec<Harmonic>> {
        reciprocal_harmonics(&self.inner.harmonics(x)?, self.series_tol)
    }
    fn x_breaks(&self, y: f64) -> Vec<f64> {
        self.inner.x_breaks(y)
    }
    fn y_breaks(&self) -> Vec<f64> {
        self.inner.y_breaks()
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// Harmonic expansion of w/(1+w) for w = Σ c_m e^{ip_m y}.
///
/// Writing w = c₀ + u(1+c₀) with u the non-constant part scaled by 1/(1+c₀),
/// w/(1+w) = 1 − (1+c₀)⁻¹ Σₙ (−u)ⁿ, convergent when Σ|c_m| < |1+c₀|.
pub fn reciprocal_harmonics(w: &[Harmonic], tol: f64) -> Result<Vec<Harmonic>> {
    let c0: Complex64 = w
        .iter()
        .filter(|h| same_momentum(h.p, 0.0))
        .map(|h| h.c)
        .sum();
    let scale = c0 + 1.0;
    let rest: Vec<Harmonic> = w
        .iter()
        .filter(|h| !same_momentum(h.p, 0.0))
        .map(|h| Harmonic::new(h.p, -h.c / scale))
        .collect();
    let ratio: f64 = rest.iter().map(|h| h.c.norm()).sum();
    if ratio >= 1.0 {
        return Err(Error::SeriesDiverges { ratio });
    }
    let mut out = vec![Harmonic::new(0.0, Complex64::new(1.0, 0.0) - 1.0 / scale)];
    if rest.is_empty() {
        return Ok(merge_harmonics(out));
    }
    // term_n = (−u)ⁿ / (1+c₀); accumulate −term_n for n ≥ 1
    let mut term = vec![Harmonic::new(0.0, 1.0 / scale)];
    for _ in 0..20_000 {
        let mut next = Vec::with_capacity(term.len() * rest.len());
        for a in &term {
            for b in &rest {
                next.push(Harmonic::new(a.p + b.p, a.c * b.c));
            }
        }
        term = merge_harmonics(next);
        term.retain(|h| h.c.norm() >= 1e-3 * tol);
        if term.is_empty() {
            break;
        }
        out.extend(term.iter().map(|h| Harmonic::new(h.p, -h.c)));
        if term.iter().map(|h| h.c.norm()).sum::<f64>() < tol {
            break;
        }
    }
    Ok(merge_harmonics(out))
}

type ValueFn = dyn Fn(f64, f64) -> Complex64 + Send + Sync;

/// A user closure, optionally with an analytic y-derivative and kink data.
#[derive(Clone)]
pub struct FnField {
    f: Arc<ValueFn>,
    df: Option<Arc<ValueFn>>,
    y_breaks: Vec<f64>,
    label: String,
}

impl FnField {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        FnField {
            f: Arc::new(f),
            df: None,
            y_breaks: Vec::new(),
            label: label.into(),
        }
    }

    pub fn with_dy(mut self, df: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn with_y_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.y_breaks = breaks;
        self
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({})", self.label)
    }
}

impl Field for FnField {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        (self.f)(x, y)
    }
    fn dy(&self, x: f64, y: f64) -> Complex64 {
        match &self.df {
            Some(df) => df(x, y),
            None => {
                let h = 2e-3 * y.abs().max(1.0);
                (self.value(x, y - 2.0 * h) - self.value(x, y + 2.0 * h)
                    + 8.0 * (self.value(x, y + h) - self.value(x, y - h)))
                    / (12.0 * h)
            }
        }
    }
    fn y_breaks(&self) -> Vec<f64> {
        self.y_breaks.clone()
    }
}

/// Bilinear interpolation of samples on a rectangular (x̌, y) grid; zero
/// outside the sampled y-range.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major values, index [iy * xs.len() + ix].
    values: Vec<Complex64>,
}

impl GridField {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if xs.len() < 2 || ys.len() < 2 || !increasing(&xs) || !increasing(&ys) {
            return Err(Error::InvalidInput(
                "grid axes need at least two strictly increasing nodes".into(),
            ));
        }
        if values.len() != xs.len() * ys.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} values, expected {}",
                values.len(),
                xs.len() * ys.len()
            )));
        }
        Ok(GridField { xs, ys, values })
    }

    fn cell(axis: &[f64], t: f64) -> (usize, f64) {
        let i = axis.partition_point(|v| *v <= t).clamp(1, axis.len() - 1) - 1;
        let frac = ((t - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
        (i, frac)
    }

    fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.xs.len() + ix]
    }

    fn in_range(&self, y: f64) -> bool {
        y >= self.ys[0] && y <= self.ys[self.ys.len() - 1]
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.ys.len() - 1])
    }
}

impl Field for GridField {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        if !self.in_range(y) {
            return Complex64::new(0.0, 0.0);
        }
        let (ix, tx) = Self::cell(&self.xs, x);
        let (iy, ty) = Self::cell(&self.ys, y);
        let lo = self.at(ix, iy) * (1.0 - tx) + self.at(ix + 1, iy) * tx;
        let hi = self.at(ix, iy + 1) * (1.0 - tx) + self.at(ix + 1, iy + 1) * tx;
        lo * (1.0 - ty) + hi * ty
    }
    fn dy(&self, x: f64, y: f64) -> Complex64 {
        if !self.in_range(y) {
            return Complex64::new(0.0, 0.0);
        }
        let (ix, tx) = Self::cell(&self.xs, x);
        let (iy, _) = Self::cell(&self.ys, y);
        let lo = self.at(ix, iy) * (1.0 - tx) + self.at(ix + 1, iy) * tx;
        let hi = self.at(ix, iy + 1) * (1.0 - tx) + self.at(ix + 1, iy + 1) * tx;
        (hi - lo) / (self.ys[iy + 1] - self.ys[iy])
    }
    fn x_breaks(&self, _y: f64) -> Vec<f64> {
        self.xs
            .iter()
            .copied()
            .filter(|x| *x > 0.0 && *x < 1.0)
            .collect()
    }
    fn y_breaks(&self) -> Vec<f64> {
        self.ys.clone()
    }
    fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn reciprocal_of_grating_matches_geometric_coefficients() {
        let (z0, z1) = (c(10.58), c(0.07));
        let v =
            reciprocal_harmonics(&[Harmonic::new(0.0, z0), Harmonic::new(2.0, z1)], 1e-16).unwrap();
        for h in &v {
            let j = (h.p / 2.0).round() as i32;
            let expect = if j == 0 {
                z0 / (z0 + 1.0)
            } else {
                (-1f64).powi(j + 1) * z1.powi(j) / (z0 + 1.0).powi(j + 1)
            };
            assert!((h.c - expect).norm() < 1e-15, "j = {j}");
        }
    }

    #[test]
    fn reciprocal_diverges_beyond_unit_ratio() {
        let err = reciprocal_harmonics(
            &[Harmonic::new(0.0, c(0.5)), Harmonic::new(1.0, c(1.5))],
            1e-16,
        );
        assert!(matches!(err, Err(Error::SeriesDiverges { .. })));
    }

    #[test]
    fn reciprocal_harmonics_resum_pointwise() {
        let w = HarmonicSum::new(vec![
            Harmonic::new(0.0, Complex64::new(0.3, 0.1)),
            Harmonic::new(1.0, Complex64::new(0.2, -0.1)),
            Harmonic::new(-2.5, Complex64::new(0.0, 0.25)),
        ]);
        let v = Reciprocal::new(Arc::new(w.clone()), 1e-16);
        let sum = HarmonicSum::new(v.harmonics(0.0).unwrap());
        for y in [-3.0, -0.4, 0.0, 1.7, 8.0] {
            assert!((sum.value(0.0, y) - v.value(0.0, y)).norm() < 1e-13);
        }
    }

    #[test]
    fn stencil_derivative_matches_analytic() {
        let g = GaussianExp {
            amp: Complex64::new(0.4, 0.2),
            decay: 1.0,
            width: 5.0,
        };
        let f = FnField::new("g", move |x, y| g.value(x, y));
        for y in [-7.0, -1.0, 0.3, 4.0] {
            assert!((f.dy(0.3, y) - g.dy(0.3, y)).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_is_bilinear() {
        let xs = vec![0.0, 1.0];
        let ys = vec![-1.0, 1.0];
        let vals = vec![c(0.0), c(1.0), c(2.0), c(3.0)];
        let g = GridField::new(xs, ys, vals).unwrap();
        assert!((g.value(0.5, 0.0) - c(1.5)).norm() < 1e-15);
        assert!((g.dy(0.25, 0.0) - c(1.0)).norm() < 1e-15);
        assert_eq!(g.value(0.5, 2.0), c(0.0));
    }
}

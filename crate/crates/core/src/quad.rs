//! Gauss–Legendre rules: single panels, composites, and the collapsed
//! triangle rule used for ordered double integrals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;
use std::sync::OnceLock;

/// A quadrature rule as parallel node and weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<T, F>(&self, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        self.iter().fold(T::default(), |acc, (x, w)| acc + f(x) * w)
    }

    /// Concatenate rules (e.g. panels of a composite).
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Rule>) -> Rule {
        let mut out = Rule {
            nodes: Vec::new(),
            weights: Vec::new(),
        };
        for p in parts {
            out.nodes.extend_from_slice(&p.nodes);
            out.weights.extend_from_slice(&p.weights);
        }
        out
    }
}

/// Legendre P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_reference(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// n-point Gauss–Legendre rule on [-1, 1] (cached).
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| compute_reference(n))
        .clone()
}

/// n-point rule mapped onto [a, b].
pub fn gl_interval(n: usize, a: f64, b: f64) -> Rule {
    let r = gauss_legendre(n);
    let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
    Rule {
        nodes: r.nodes.iter().map(|t| m + h * t).collect(),
        weights: r.weights.iter().map(|w| w * h).collect(),
    }
}

/// Composite rule with `n` nodes per panel over consecutive breakpoints.
pub fn composite(breaks: &[f64], n: usize) -> Rule {
    let panels: Vec<Rule> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gl_interval(n, w[0], w[1]))
        .collect();
    Rule::concat(&panels)
}

/// Uniform panel breakpoints on [a, b].
pub fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels)
        .map(|i| a + (b - a) * i as f64 / panels as f64)
        .collect()
}

/// Merge sorted interior breakpoints into [a, b], dropping near-duplicates.
pub fn merge_breaks(a: f64, b: f64, interior: &[f64]) -> Vec<f64> {
    let mut v = vec![a];
    let mut inner: Vec<f64> = interior
        .iter()
        .copied()
        .filter(|x| *x > a && *x < b)
        .collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    let eps = 1e-12 * (b - a).abs().max(1.0);
    for x in inner {
        if x - v[v.len() - 1] > eps {
            v.push(x);
        }
    }
    if b - v[v.len() - 1] > eps {
        v.push(b);
    } else {
        let last = v.len() - 1;
        v[last] = b;
    }
    v
}

/// Ordered double integral ∫₀¹ dx2 ∫₀^{x2} dx1 f(x2, x1) on panels given by
/// `breaks` (which must start at 0 and end at 1). Kinks of the integrand at a
/// breakpoint in either variable are resolved exactly by the panelling.
pub fn triangle<T, F>(breaks: &[f64], n: usize, mut f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default + Clone,
    F: FnMut(f64, f64) -> T,
{
    let mut acc = T::default();
    for (k, w) in breaks.windows(2).enumerate() {
        for (x2, w2) in gl_interval(n, w[0], w[1]).iter() {
            let mut inner = T::default();
            for full in breaks[..=k].windows(2) {
                for (x1, w1) in gl_interval(n, full[0], full[1]).iter() {
                    inner = inner + f(x2, x1) * w1;
                }
            }
            for (x1, w1) in gl_interval(n, w[0], x2).iter() {
                inner = inner + f(x2, x1) * w1;
            }
            acc = acc + inner * w2;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 32, 64, 128] {
            let s: f64 = gauss_legendre(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
        }
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        let r = gl_interval(8, 0.0, 1.0);
        for d in 0..16 {
            let v: f64 = r.integrate(|x| x.powi(d));
            assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "degree {d}");
        }
    }

    #[test]
    fn triangle_of_product() {
        // ∫₀¹∫₀^{x2} x2 x1² = ∫ x2⁴/3 = 1/15
        let v: f64 = triangle(&[0.0, 0.4, 1.0], 8, |x2, x1| x2 * x1 * x1);
        assert!((v - 1.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_resolves_kink() {
        // f(x1) = |x1 - 0.5| integrated over the triangle: ∫₀¹ (1-x1)|x1-1/2| dx1 = 1/8
        let v: f64 = triangle(&[0.0, 0.5, 1.0], 6, |_, x1| (x1 - 0.5).abs());
        assert!((v - 0.125).abs() < 1e-14, "{v}");
    }

    #[test]
    fn merge_drops_duplicates() {
        assert_eq!(
            merge_breaks(0.0, 1.0, &[0.5, 0.5, 1.0, -2.0]),
            vec![0.0, 0.5, 1.0]
        );
    }
}

use std::f64::consts::PI;
use std::sync::OnceLock;

use bergmann2d::dyson::{
    discrepancy, series_amplitude, AngularGrid, BasisMatrix, DysonOracle, MomentumSet,
    OperatorKernel, Route,
};
use bergmann2d::grating::{brewster_setup, channels, tau, GratingSpec, Incidence, Side};
use bergmann2d::lowfreq::{LowFreqModel, ScatterKinematics};
use bergmann2d::media::{to_alpha_beta, AlphaBetaProfile, MediumProfile, ModeKind};
use bergmann2d::{Error, Settings};
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn gaussian(mode: ModeKind, eps: f64, mu: f64) -> AlphaBetaProfile {
    let profile = MediumProfile::gaussian_exp(c(eps), c(mu), 1.0, 5.0, 1.0).unwrap();
    to_alpha_beta(&profile, mode, &Settings::default()).unwrap()
}

fn test_medium() -> AlphaBetaProfile {
    gaussian(ModeKind::TM, 0.4, 0.4)
}

fn angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (-90.0 + (i as f64 + 0.25) * 360.0 / n as f64).to_radians())
        .collect()
}

/// Small oracle shared by the structural tests.
fn small_oracle() -> &'static DysonOracle {
    static ORACLE: OnceLock<DysonOracle> = OnceLock::new();
    ORACLE.get_or_init(|| {
        DysonOracle::for_incidence(
            &test_medium(),
            0.1,
            0.5,
            &angles(9),
            16,
            &Settings::default(),
        )
        .unwrap()
    })
}

#[test]
fn angular_grid_measure_integrates_cosine() {
    let g = AngularGrid::new(0.3, 24).unwrap();
    assert!(g.p.iter().all(|p| p.abs() < 0.3));
    // ∫dp over (−k, k) equals ∫dφ k cos φ = 2k.
    let total: f64 = g.measure().iter().sum();
    assert!((total - 0.6).abs() < 1e-13);
    // ∫ p² dp = 2k³/3.
    let second: f64 = g.measure().iter().zip(&g.p).map(|(m, p)| m * p * p).sum();
    assert!((second - 2.0 * 0.027 / 3.0).abs() < 1e-13);
}

#[test]
fn projection_is_idempotent() {
    let g = AngularGrid::new(1.0, 8).unwrap();
    let mut set = MomentumSet::angular(&g, &[0.2]).unwrap();
    set.p.extend([1.5, -2.0]);
    set.measure.extend([0.1, 0.1]);
    let once = set.project();
    assert_eq!(once.len(), 9);
    assert_eq!(once.project(), once);
}

fn random_kernel(n: usize, seed: u64) -> OperatorKernel {
    let mut s = seed;
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    OperatorKernel(DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(next(), next())
    }))
}

#[test]
fn identity_and_associativity() {
    let g = AngularGrid::new(0.7, 12).unwrap();
    let set = MomentumSet::angular(&g, &[]).unwrap();
    let id = OperatorKernel::identity(&set).unwrap();
    let a = random_kernel(12, 1);
    let (b, cc) = (random_kernel(12, 2), random_kernel(12, 3));
    assert!(discrepancy(&a.compose(&id, &set), &a) < 1e-14);
    assert!(discrepancy(&id.compose(&a, &set), &a) < 1e-14);
    let left = a.compose(&b, &set).compose(&cc, &set);
    let right = a.compose(&b.compose(&cc, &set), &set);
    assert!(discrepancy(&left, &right) < 1e-13);
}

#[test]
fn multiplication_table() {
    use BasisMatrix::*;
    // Row × column entries: (scalar, product) with None for the zero matrix.
    let table: [[(f64, Option<BasisMatrix>); 5]; 5] = [
        [
            (0.0, None),
            (2.0, Some(SigmaMinus)),
            (1.0, Some(SigmaMinus)),
            (2.0, Some(K)),
            (0.0, None),
        ],
        [
            (2.0, Some(SigmaPlus)),
            (0.0, None),
            (1.0, Some(SigmaPlus)),
            (0.0, None),
            (2.0, Some(KT)),
        ],
        [
            (1.0, Some(SigmaPlus)),
            (1.0, Some(SigmaMinus)),
            (1.0, None),
            (1.0, Some(K)),
            (1.0, Some(KT)),
        ],
        [
            (0.0, None),
            (2.0, Some(KT)),
            (1.0, Some(KT)),
            (2.0, Some(SigmaPlus)),
            (0.0, None),
        ],
        [
            (2.0, Some(K)),
            (0.0, None),
            (1.0, Some(K)),
            (0.0, None),
            (2.0, Some(SigmaMinus)),
        ],
    ];
    for (i, a) in BasisMatrix::ALL.iter().enumerate() {
        for (j, b) in BasisMatrix::ALL.iter().enumerate() {
            let got = a.matrix() * b.matrix();
            let (scale, m) = table[i][j];
            let want = match (m, scale) {
                (None, 0.0) => Matrix2::zeros(),
                (None, _) => Matrix2::identity(),
                (Some(m), s) => m.matrix() * s,
            };
            assert_eq!(got, want, "{a:?}·{b:?}");
        }
    }
}

#[test]
fn block_structure() {
    let o = small_oracle();
    for route in [Route::Closed, Route::Nested] {
        let l10 = o.script_l(1, 0, route).unwrap();
        assert_eq!(l10.entry(1, 1).max_abs(), 0.0);
        assert_eq!(l10.entry(2, 2).max_abs(), 0.0);
        assert!(l10.entry(1, 2).max_abs() > 0.0);
        let l11 = o.script_l(1, 1, route).unwrap();
        assert_eq!(l11.entry(1, 2).max_abs(), 0.0);
        assert_eq!(l11.entry(2, 1).max_abs(), 0.0);
        assert!(l11.entry(1, 1).max_abs() > 0.0);
    }
    assert!(matches!(
        o.script_l(2, 1, Route::Closed),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn zero_medium_gives_zero() {
    let vac = to_alpha_beta(
        &MediumProfile::vacuum(1.0).unwrap(),
        ModeKind::TE,
        &Settings::default(),
    )
    .unwrap();
    let o = DysonOracle::for_incidence(&vac, 0.2, 0.3, &[], 8, &Settings::default()).unwrap();
    for (n, j) in [(1, 0), (1, 1), (2, 0)] {
        let b = o.script_l(n, j, Route::Nested).unwrap();
        assert_eq!(b.max_discrepancy(&b), 0.0);
        for a in 1..=2 {
            for bb in 1..=2 {
                assert_eq!(b.entry(a, bb).max_abs(), 0.0);
            }
        }
    }
    let (w, a) = o.w_kernel(0.5).unwrap();
    assert_eq!(w.max_abs() + a.max_abs(), 0.0);
    let amp =
        series_amplitude(&vac, 0.2, 0.3, &[0.1, 2.0], 8, 0.2, 2, &Settings::default()).unwrap();
    assert!(amp
        .dirac
        .iter()
        .all(|d| d.weight == Complex64::new(0.0, 0.0)));
    assert!(amp.smooth.iter().all(|s| s.1 == Complex64::new(0.0, 0.0)));
}

#[test]
fn w_kernel_matches_trapezoid_oracle() {
    let o = small_oracle();
    let (w, a) = o.w_kernel(0.3).unwrap();
    let k = o.set().k;
    let x = 0.3f64;
    // Trapezoid y-integral of e^{−i q y} f(x, y) on a wide uniform mesh.
    let trap = |f: &dyn Fn(f64) -> f64, q: f64| -> Complex64 {
        let (h, half) = (0.01, 60.0);
        let n = (2.0 * half / h) as i64;
        (0..=n)
            .map(|i| {
                let y = -half + i as f64 * h;
                Complex64::new(0.0, -q * y).exp() * f(y) * h
            })
            .sum::<Complex64>()
            / (2.0 * PI)
    };
    let wa = |y: f64| 0.4 * (-x).exp() * (-y * y / 50.0).exp();
    let va = |y: f64| wa(y) / (1.0 + wa(y));
    let p = &o.set().p;
    for (i, j) in [(0, 0), (3, 7), (15, 2), (18, 20), (5, 24)] {
        let q = p[i] - p[j];
        let want_a = trap(&wa, q);
        let want_w = trap(&va, q) * (p[i] * p[j] / (k * k)) + want_a;
        assert!((a.at(i, j) - want_a).norm() < 1e-8, "{i} {j}");
        assert!((w.at(i, j) - want_w).norm() < 1e-8, "{i} {j}");
    }
}

#[test]
fn constant_slab_kernel_is_diagonal() {
    let z0 = 0.8;
    let slab = to_alpha_beta(
        &MediumProfile::slab(c(z0), c(0.0), 1.0).unwrap(),
        ModeKind::TE,
        &Settings::default(),
    )
    .unwrap();
    let o = DysonOracle::for_incidence(&slab, 1.0, 0.4, &[], 0, &Settings::default()).unwrap();
    let (w, a) = o.w_kernel(0.5).unwrap();
    assert_eq!(o.set().len(), 1);
    assert!((w.at(0, 0) - c(z0)).norm() < 1e-15);
    assert_eq!(a.max_abs(), 0.0);
}

#[test]
fn discrete_medium_rejects_angular_grid() {
    let spec = GratingSpec::new(c(1.0), c(0.2), 1.0, 1.0).unwrap();
    let ab = to_alpha_beta(&spec.medium().unwrap(), ModeKind::TM, &Settings::default()).unwrap();
    let g = AngularGrid::new(1.5, 8).unwrap();
    let set = MomentumSet::angular(&g, &[]).unwrap();
    assert!(matches!(
        DysonOracle::new(&ab, set, &Settings::default()),
        Err(Error::DiscreteOffGrid { .. })
    ));
}

#[test]
fn sign_pattern_without_alpha_contrast() {
    // TE with μ̂ = 1 leaves w_α ≡ 0.
    let ab = gaussian(ModeKind::TE, 0.4, 0.0);
    let o =
        DysonOracle::for_incidence(&ab, 0.1, 0.5, &angles(5), 12, &Settings::default()).unwrap();
    let n11 = o.nab(1, 1, 1, Route::Nested).unwrap();
    let n21 = o.nab(1, 2, 1, Route::Nested).unwrap();
    assert!(n11.max_abs() > 0.0);
    assert!((&n11.0 + &n21.0)
        .iter()
        .all(|z| z.norm() <= 1e-15 * n11.max_abs()));
}

#[test]
fn routes_agree_on_small_grid() {
    let o = small_oracle();
    for (n, j) in [(1, 0), (1, 1), (2, 0)] {
        let (_, d) = o.script_l_checked(n, j).unwrap();
        assert!(d < 1e-6, "({n},{j}): {d}");
    }
    for m in 1..=2 {
        for a in 1..=2 {
            for b in 1..=2 {
                let (_, d) = o.nab_checked(m, a, b).unwrap();
                assert!(d < 1e-6);
            }
        }
    }
}

fn max_rel(a: &[(f64, Complex64)], b: &[(f64, Complex64)]) -> f64 {
    let scale = a.iter().map(|x| x.1.norm()).fold(0.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.1 - y.1).norm())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn matches_lowfreq_on_small_grid() {
    let ab = test_medium();
    let s = Settings::default();
    let model = LowFreqModel::new(&ab, &s).unwrap();
    let th = angles(11);
    for theta0 in [0.5, 3.5] {
        let o = DysonOracle::for_incidence(&ab, 0.1, theta0, &th, 16, &s).unwrap();
        for order in [1, 2] {
            let lf = model.amplitude(0.1, theta0, &th, 0.1, order).unwrap();
            let dy = o.amplitude(theta0, &th, 0.1, order, Route::Nested).unwrap();
            assert!(max_rel(&lf.smooth, &dy.smooth) < 1e-6);
        }
    }
}

#[test]
fn angular_grid_convergence() {
    let ab = test_medium();
    let s = Settings::default();
    let th = angles(7);
    let coarse = series_amplitude(&ab, 0.1, 0.5, &th, 16, 0.1, 2, &s).unwrap();
    let fine = series_amplitude(&ab, 0.1, 0.5, &th, 32, 0.1, 2, &s).unwrap();
    assert!(max_rel(&fine.smooth, &coarse.smooth) < 1e-6);
}

#[test]
fn brewster_transmission_at_first_order() {
    let spec = GratingSpec::new(c(10.58), c(0.07), PI, 1.0).unwrap();
    let b = brewster_setup(&spec).unwrap();
    let ab = to_alpha_beta(&spec.medium().unwrap(), ModeKind::TM, &Settings::default()).unwrap();
    let k = 0.1;
    let amp = series_amplitude(&ab, k, b.theta0, &[], 0, k, 1, &Settings::default()).unwrap();
    let transmitted = amp.dirac_at(b.theta0);
    assert!((transmitted / k - c(7.48)).norm() < 0.005, "{transmitted}");
}

fn dirac_compare(spec: &GratingSpec, k: f64, theta0: f64) {
    let s = Settings::default();
    let ab = to_alpha_beta(&spec.medium().unwrap(), ModeKind::TM, &s).unwrap();
    let o = DysonOracle::for_incidence(&ab, k, theta0, &[], 0, &s).unwrap();
    let weights = o.channel_coefficients(theta0, 2, Route::Nested).unwrap();
    let inc = Incidence::from_angle(k, theta0).unwrap();
    let model = LowFreqModel::new(&ab, &s).unwrap();
    let kin = ScatterKinematics::new(k, theta0, theta0, s.angle_floor).unwrap();
    let (f1, f2) = (model.f1(&kin).unwrap(), model.f2(&kin).unwrap());
    let find = |list: &[bergmann2d::lowfreq::DiracWeight], t: f64| -> Complex64 {
        list.iter()
            .filter(|d| (d.theta - t).abs() < 1e-9)
            .map(|d| d.weight)
            .sum()
    };
    for (theta, _, w) in &weights {
        let (a, b) = (find(f1.dirac(), *theta), find(f2.dirac(), *theta));
        assert!(
            (w[0] - a).norm() <= 1e-9 * (1.0 + a.norm()),
            "order 1 at {theta}: {} vs {a}",
            w[0]
        );
        assert!(
            (w[1] - b).norm() <= 1e-9 * (1.0 + b.norm()),
            "order 2 at {theta}: {} vs {b}",
            w[1]
        );
    }
    for ch in channels(&inc, spec).channels.iter().filter(|ch| ch.j <= 1) {
        for (side, t) in [(Side::Plus, ch.theta_plus), (Side::Minus, ch.theta_minus)] {
            let got = weights
                .iter()
                .find(|w| (w.0 - bergmann2d::lowfreq::wrap_angle(t)).abs() < 1e-9)
                .unwrap()
                .2;
            let want = [
                tau(1, ch.j, side, &inc, spec).unwrap(),
                tau(2, ch.j, side, &inc, spec).unwrap(),
            ];
            for n in 0..2 {
                assert!((got[n] - want[n]).norm() <= 1e-9 * (1.0 + want[n].norm()));
            }
        }
    }
}

#[test]
fn grating_channels_reproduce_closed_forms() {
    let spec = GratingSpec::new(c(10.58), c(0.07), PI, 1.0).unwrap();
    let b = brewster_setup(&spec).unwrap();
    dirac_compare(&spec, 0.95 * PI, b.theta0);
    dirac_compare(&spec, 0.3, b.theta0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn grating_duality(z0 in 0.0f64..4.0, frac in 0.0f64..0.5, k in 0.3f64..2.5, theta0 in -1.4f64..4.5) {
        prop_assume!(theta0.cos().abs() > 0.05);
        let spec = GratingSpec::new(c(z0), c(frac * (z0 + 1.0)), 1.0, 1.0).unwrap();
        let inc = Incidence::from_angle(k, theta0).unwrap();
        prop_assume!(channels(&inc, &spec).channels.iter().all(|ch| ch.cos_plus > 0.05));
        dirac_compare(&spec, k, theta0);
    }
}

//! Randomized consistency checks between independent code paths.

use std::f64::consts::PI;
use std::sync::Arc;

use bergmann2d::cloak::{solve_column, solve_layers, LayerShapes, Sign, SlabSpec};
use bergmann2d::dyson::series_amplitude;
use bergmann2d::grating::{channels, tau, GratingSpec, Incidence, Side};
use bergmann2d::lowfreq::{wrap_angle, LowFreqModel, ScatterKinematics};
use bergmann2d::media::{to_alpha_beta, DecayClass, FnField, MediumProfile, ModeKind};
use bergmann2d::{Error, Settings};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::angle_grid;
use crate::config::SelftestArgs;
use crate::error::CliError;

type C = Complex64;

/// Closed-form grating weights against the Dirac output of the general coefficients.
fn grating_duality(rng: &mut ChaCha8Rng, cases: usize, s: &Settings) -> Result<f64, Error> {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < cases {
        let z0 = C::new(rng.gen_range(0.0..12.0), rng.gen_range(0.0..0.5));
        let z1 = (z0 + 1.0).norm()
            * rng.gen_range(0.0..0.9)
            * C::from_polar(1.0, rng.gen_range(-0.3..0.3));
        let kg = rng.gen_range(0.5..4.0);
        let spec = GratingSpec::new(z0, z1, kg, rng.gen_range(0.05..1.0))?;
        let k = kg * rng.gen_range(0.05..1.0);
        let theta0 = rng.gen_range(-PI..PI);
        let inc = Incidence::from_angle(k, theta0)?;
        let set = channels(&inc, &spec);
        if theta0.cos().abs() < 0.05 || set.channels.iter().any(|ch| ch.cos_plus < 0.05) {
            continue;
        }
        let model = LowFreqModel::new(&to_alpha_beta(&spec.medium()?, ModeKind::TM, s)?, s)?;
        let kin = ScatterKinematics::new(k, theta0, theta0, s.angle_floor)?;
        for (n, coeff) in [(1, model.f1(&kin)?), (2, model.f2(&kin)?)] {
            let (mut scale, mut diff): (f64, f64) = (0.0, 0.0);
            for ch in set.channels.iter().filter(|ch| n == 1 || ch.j <= 1) {
                for (side, t) in [(Side::Plus, ch.theta_plus), (Side::Minus, ch.theta_minus)] {
                    let t = wrap_angle(t);
                    let general: C = coeff
                        .dirac()
                        .iter()
                        .filter(|d| (d.theta - t).abs() < 1e-9)
                        .map(|d| d.weight)
                        .sum();
                    let closed = tau(n, ch.j, side, &inc, &spec)?;
                    scale = scale.max(closed.norm());
                    diff = diff.max((closed - general).norm());
                }
            }
            if diff > 0.0 {
                worst = worst.max(diff / scale);
            }
        }
        done += 1;
    }
    Ok(worst)
}

fn random_lossless_slab(rng: &mut ChaCha8Rng) -> Result<SlabSpec, Error> {
    let ell_star = rng.gen_range(0.2..1.0);
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.0..4.0 / 3.0),
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..PI),
            )
        })
        .collect();
    let width = rng.gen_range(1.0..4.0);
    let dev = move |x: f64, y: f64| {
        let s: f64 = terms
            .iter()
            .map(|(a, b, p)| a * (b * x + p).cos().powi(2))
            .sum();
        C::new(s * (-0.5 * (y / width).powi(2)).exp(), 0.0)
    };
    SlabSpec::new(
        Arc::new(FnField::new("lossless", dev)),
        ell_star,
        DecayClass::Gaussian { width },
    )
}

/// Count of columns where a lossless slab got a real positive coating pair.
fn lossless_no_go(
    rng: &mut ChaCha8Rng,
    cases: usize,
    s: &Settings,
) -> Result<(usize, usize), Error> {
    let ys = [0.0, 0.8, 2.5];
    let (mut columns, mut bad) = (0, 0);
    for _ in 0..cases {
        let slab = random_lossless_slab(rng)?;
        let shapes = LayerShapes::constant(rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0));
        for sigma in [Sign::Plus, Sign::Minus] {
            match solve_layers(&slab, &shapes, sigma, &ys, s) {
                Ok(design) => {
                    for col in &design.columns {
                        columns += 1;
                        let real_positive = [col.eps_minus, col.eps_plus]
                            .iter()
                            .all(|e| e.re > 0.0 && e.im.abs() <= 1e-12 * e.norm());
                        bad += usize::from(real_positive);
                    }
                }
                Err(Error::UMinusZero { .. } | Error::FloorViolation { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok((columns, bad))
}

/// Swapping the layers together with the sign swaps the two permittivities.
fn sign_swap(rng: &mut ChaCha8Rng, cases: usize, s: &Settings) -> Result<f64, Error> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let d = [
            C::new(rng.gen_range(-0.9..0.0), rng.gen_range(-0.3..0.3)),
            C::new(rng.gen_range(0.0..2.0), rng.gen_range(-0.3..0.3)),
        ];
        let (ell_star, lm, lp) = (
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.05..2.0),
        );
        let a = solve_column(0.0, d, ell_star, lm, lp, Sign::Plus, s);
        let b = solve_column(0.0, d, ell_star, lp, lm, Sign::Minus, s);
        if let (Ok(a), Ok(b)) = (a, b) {
            let scale = a.eps_plus.norm().max(a.eps_minus.norm());
            worst = worst.max((a.eps_plus - b.eps_minus).norm() / scale);
            worst = worst.max((a.eps_minus - b.eps_plus).norm() / scale);
        }
    }
    Ok(worst)
}

/// Low-frequency amplitude against the Dyson series on small random Gaussian media.
fn oracle_agreement(rng: &mut ChaCha8Rng, cases: usize, s: &Settings) -> Result<f64, Error> {
    let thetas = angle_grid(9);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let eps = C::new(rng.gen_range(0.1..0.8), rng.gen_range(0.0..0.1));
        let mu = C::new(rng.gen_range(0.0..0.5), 0.0);
        let profile = MediumProfile::gaussian_exp(
            eps,
            mu,
            rng.gen_range(0.5..2.0),
            rng.gen_range(2.0..6.0),
            1.0,
        )?;
        let mode = if rng.gen_bool(0.5) {
            ModeKind::TE
        } else {
            ModeKind::TM
        };
        let ab = to_alpha_beta(&profile, mode, s)?;
        let model = LowFreqModel::new(&ab, s)?;
        let (k, theta0): (f64, f64) = (rng.gen_range(0.02..0.1), rng.gen_range(-1.2..4.3));
        if theta0.cos().abs() < 0.1 {
            continue;
        }
        for order in [1, 2] {
            let lf = model.amplitude(k, theta0, &thetas, k, order)?;
            let dy = series_amplitude(&ab, k, theta0, &thetas, 24, k, order, s)?;
            let scale = lf.smooth.iter().map(|x| x.1.norm()).fold(0.0, f64::max);
            let diff = lf
                .smooth
                .iter()
                .zip(&dy.smooth)
                .map(|(a, b)| (a.1 - b.1).norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

pub fn run(a: &SelftestArgs, seed: u64, s: &Settings) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failed = Vec::new();
    let mut report = |name: &str, pass: bool, detail: String| {
        println!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(name.to_string());
        }
    };

    let d = grating_duality(&mut rng, a.cases, s)?;
    report(
        "grating duality",
        d < 1e-9,
        format!("max relative difference {d:.2e}"),
    );

    let (columns, bad) = lossless_no_go(&mut rng, a.cases, s)?;
    report(
        "lossless no-go",
        bad == 0,
        format!("{bad} real positive pairs in {columns} columns"),
    );

    let w = sign_swap(&mut rng, a.cases, s)?;
    report(
        "sign swap",
        w < 1e-10,
        format!("max relative difference {w:.2e}"),
    );

    let o = oracle_agreement(&mut rng, a.cases.min(4), s)?;
    report(
        "oracle agreement",
        o < s.oracle_tol,
        format!("max relative difference {o:.2e}"),
    );

    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelftestFailed(failed.join(", ")))
    }
}

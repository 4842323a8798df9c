//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is printed by a plain
//! `cargo test`; the process exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bergmann2d::cloak::{
    gaussian_exp_design, gaussian_exp_setup, invisibility_residuals, solve_column, solve_layers,
    CoatedSlab, LayerShapes, Sign, SlabSpec,
};
use bergmann2d::dyson::{DysonOracle, Route};
use bergmann2d::grating::{brewster_setup, channels, fig5_row, tau, GratingSpec, Incidence, Side};
use bergmann2d::lowfreq::{DiracWeight, LowFreqModel, ScatterKinematics};
use bergmann2d::media::{to_alpha_beta, DecayClass, FnField, MediumProfile, ModeKind};
use bergmann2d::{Error, Settings};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex64;
type Verdict = Result<(bool, String), Error>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Verdict + 'a>);

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (-90.0 + (i as f64 + 0.25) * 360.0 / n as f64).to_radians())
        .collect()
}

fn max_rel(reference: &[(f64, C)], other: &[(f64, C)]) -> f64 {
    let scale = reference.iter().map(|x| x.1.norm()).fold(0.0, f64::max);
    reference
        .iter()
        .zip(other)
        .map(|(a, b)| (a.1 - b.1).norm())
        .fold(0.0, f64::max)
        / scale
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn brewster() -> Verdict {
    let spec = GratingSpec::ingaasp();
    let start = Instant::now();
    let b = brewster_setup(&spec)?;
    let elapsed = start.elapsed();
    let theta_b = b.theta_b.to_degrees();
    let ratio = b.kappa0 / spec.k_grating;
    let pass = (theta_b - 73.6).abs() <= 0.05
        && (ratio - 0.510).abs() <= 0.001
        && elapsed < Duration::from_millis(1);
    Ok((
        pass,
        format!(
            "theta_B = {theta_b:.4} deg, kappa0/K = {ratio:.5}, {:.4} ms",
            ms(elapsed)
        ),
    ))
}

fn channel_weights() -> Verdict {
    let spec = GratingSpec::ingaasp();
    let start = Instant::now();
    let b = brewster_setup(&spec)?;
    let inc = b.incidence(0.5 * (b.kappa0 + spec.k_grating));
    let plus = [
        tau(1, 0, Side::Plus, &inc, &spec)?,
        tau(2, 0, Side::Plus, &inc, &spec)?,
    ];
    let minus = [
        tau(1, 0, Side::Minus, &inc, &spec)?,
        tau(2, 0, Side::Minus, &inc, &spec)?,
    ];
    let elapsed = start.elapsed();
    let pass = plus.iter().all(|t| t.norm() < 1e-12)
        && (minus[0] - c(7.48)).norm() <= 0.005
        && (minus[1] - C::new(0.0, 11.15)).norm() <= 0.005
        && elapsed < Duration::from_millis(1);
    let detail = format!(
        "|tau0+| = {:.1e}, {:.1e}; tau0- = {:.4}, {:.4}i (re {:.1e}), {:.4} ms",
        plus[0].norm(),
        plus[1].norm(),
        minus[0].re,
        minus[1].im,
        minus[1].re,
        ms(elapsed)
    );
    Ok((pass, detail))
}

fn threshold_limit() -> Verdict {
    let spec = GratingSpec::ingaasp();
    let b = brewster_setup(&spec)?;
    let (lo, hi) = (0.158, 0.31);
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|i| fig5_row(lo + (hi - lo) * i as f64 / 19.0, &spec, &b))
        .collect::<Result<_, _>>()?;
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    for col in 2..6 {
        let series: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        let ratio = series[0] / series[19];
        worst_ratio = worst_ratio.max(ratio);
        pass &= ratio < 1e-2 && series.windows(2).all(|w| w[1] >= w[0]);
    }
    Ok((pass, format!("kappa0 l = {:.5}, max value ratio 0.158/0.31 = {worst_ratio:.1e}, monotone over 20 points", b.kappa0 * spec.ell)))
}

/// Criteria 4 and 5 share the 48-node oracles.
fn dual_pipeline(route_report: &mut Vec<f64>) -> Verdict {
    let s = Settings::default();
    let profile = MediumProfile::gaussian_exp(c(0.4), c(0.4), 1.0, 5.0, 1.0)?;
    let ab = to_alpha_beta(&profile, ModeKind::TM, &s)?;
    let model = LowFreqModel::new(&ab, &s)?;
    let th = angles(37);
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for kl in [0.05, 0.1] {
        for theta0 in [30.0f64.to_radians(), 210.0f64.to_radians()] {
            let start = Instant::now();
            let oracle = DysonOracle::for_incidence(&ab, kl, theta0, &th, 48, &s)?;
            for order in [1, 2] {
                let lf = model.amplitude(kl, theta0, &th, kl, order)?;
                let dy = oracle.amplitude(theta0, &th, kl, order, Route::Nested)?;
                worst = worst.max(max_rel(&lf.smooth, &dy.smooth));
            }
            slowest = slowest.max(start.elapsed());
            for (n, j) in [(1, 0), (1, 1), (2, 0)] {
                route_report.push(oracle.script_l_checked(n, j)?.1);
            }
        }
    }
    let pass = worst < 1e-6 && slowest < Duration::from_secs(60);
    Ok((
        pass,
        format!(
            "max relative difference {worst:.2e}, slowest oracle {:.2} s",
            slowest.as_secs_f64()
        ),
    ))
}

fn kernel_routes(discrepancies: &[f64]) -> Verdict {
    if discrepancies.len() != 12 {
        return Ok((false, "oracle construction failed".into()));
    }
    let worst = discrepancies.iter().copied().fold(0.0, f64::max);
    Ok((
        worst < 1e-6,
        format!("max closed-form vs nested discrepancy {worst:.2e} over 3 kernels x 4 oracles"),
    ))
}

fn duality() -> Verdict {
    let s = Settings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 20 {
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
        let ab = to_alpha_beta(&spec.medium()?, ModeKind::TM, &s)?;
        let model = LowFreqModel::new(&ab, &s)?;
        let kin = ScatterKinematics::new(k, theta0, theta0, s.angle_floor)?;
        let general = [model.f1(&kin)?, model.f2(&kin)?];
        let find = |list: &[DiracWeight], t: f64| -> C {
            list.iter()
                .filter(|d| (d.theta - t).abs() < 1e-9)
                .map(|d| d.weight)
                .sum()
        };
        for (n, coeff) in [1, 2].into_iter().zip(&general) {
            let mut pairs = Vec::new();
            for ch in set.channels.iter().filter(|ch| n == 1 || ch.j <= 1) {
                for (side, t) in [(Side::Plus, ch.theta_plus), (Side::Minus, ch.theta_minus)] {
                    let t = bergmann2d::lowfreq::wrap_angle(t);
                    pairs.push((tau(n, ch.j, side, &inc, &spec)?, find(coeff.dirac(), t)));
                }
            }
            let scale = pairs.iter().map(|p| p.0.norm()).fold(0.0, f64::max);
            let diff = pairs.iter().map(|p| (p.0 - p.1).norm()).fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
        cases += 1;
    }
    Ok((
        worst < 1e-9,
        format!("max relative difference {worst:.2e} over {cases} random gratings"),
    ))
}

fn cloak_closure() -> Verdict {
    let s = Settings::default();
    let (z, kappa, width, ell_star, alpha) = (0.4, 3.0, 5.0, 1.0 / 3.0, 1.0);
    let ys: Vec<f64> = (0..401).map(|i| -50.0 + 0.25 * i as f64).collect();
    let design = gaussian_exp_design(z, kappa, width, alpha, ell_star, Sign::Minus, &ys, &s)?;
    let re_dev = design
        .columns
        .iter()
        .flat_map(|col| [col.eps_minus.re, col.eps_plus.re])
        .map(|re| (re - 0.87).abs())
        .fold(0.0, f64::max);
    let signs = design
        .columns
        .iter()
        .all(|col| col.eps_plus.im < 0.0 && col.eps_minus.im > 0.0);

    let (slab, shapes) = gaussian_exp_setup(z, kappa, width, alpha, ell_star)?;
    let composite = CoatedSlab::new(slab.clone(), shapes, Sign::Minus, None, &s)?.profile()?;
    let ys21: Vec<f64> = (0..21).map(|i| -15.0 + 1.5 * i as f64).collect();
    let mut residual: f64 = 0.0;
    for mode in [ModeKind::TE, ModeKind::TM] {
        let ab = to_alpha_beta(&composite, mode, &s)?;
        for r in invisibility_residuals(&ab, &ys21, &s)? {
            residual = residual.max(r.max_abs());
        }
    }

    let coated = LowFreqModel::new(&to_alpha_beta(&composite, ModeKind::TM, &s)?, &s)?;
    let bare = LowFreqModel::new(
        &to_alpha_beta(&slab.profile(composite.ell)?, ModeKind::TM, &s)?,
        &s,
    )?;
    let (mut peak, mut worst): (f64, f64) = (0.0, 0.0);
    for theta0 in [-60.0f64, -20.0, 0.0, 35.0, 200.0] {
        for &t in &angles(37) {
            let kin = ScatterKinematics::new(1.0, theta0.to_radians(), t, s.angle_floor)?;
            let amplitude = |m: &LowFreqModel| -> Result<f64, Error> {
                Ok(m.f1(&kin)?.smooth().map_or(0.0, |v| v.norm()))
            };
            peak = peak.max(amplitude(&bare)?);
            worst = worst.max(amplitude(&coated)?);
        }
    }
    let ratio = worst / peak;
    let pass = re_dev <= 0.005 && signs && residual < 1e-8 * composite.ell && ratio < 1e-7;
    Ok((
        pass,
        format!(
            "max |Re eps - 0.87| = {re_dev:.2e}, Im signs {}, residual {residual:.1e} l, |f1| ratio {ratio:.1e}",
            if signs { "ok" } else { "wrong" }
        ),
    ))
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
        c(s * (-0.5 * (y / width).powi(2)).exp())
    };
    SlabSpec::new(
        Arc::new(FnField::new("lossless", dev)),
        ell_star,
        DecayClass::Gaussian { width },
    )
}

fn no_go() -> Verdict {
    let s = Settings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let ys = [0.0, 0.8, 2.5];
    let (mut columns, mut real_positive, mut worst_u0): (usize, usize, f64) = (0, 0, 0.0);
    for _ in 0..50 {
        let slab = random_lossless_slab(&mut rng)?;
        let (lm, lp) = (rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0));
        for sigma in [Sign::Plus, Sign::Minus] {
            match solve_layers(&slab, &LayerShapes::constant(lm, lp), sigma, &ys, &s) {
                Ok(design) => {
                    for col in &design.columns {
                        columns += 1;
                        let both = [col.eps_minus, col.eps_plus];
                        if both
                            .iter()
                            .all(|e| e.re > 0.0 && e.im.abs() <= 1e-12 * e.norm())
                        {
                            real_positive += 1;
                        }
                    }
                }
                Err(Error::UMinusZero { .. } | Error::FloorViolation { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let d = slab.mean_deviations(0.0, &s)?;
        let l = 0.5 * d[1].re * slab.ell_star + rng.gen_range(1e-3..1.0);
        let col = solve_column(0.0, d, slab.ell_star, l, l, Sign::Minus, &s)?;
        worst_u0 = worst_u0.max(if col.u0.im > 0.0 {
            col.u0.re.abs()
        } else {
            f64::INFINITY
        });
    }
    let pass = real_positive == 0 && worst_u0 < 1e-12;
    Ok((pass, format!("{real_positive} real positive pairs in {columns} columns, max |Re u0| = {worst_u0:.1e}")))
}

fn main() -> ExitCode {
    let mut routes = Vec::new();
    let criteria: Vec<Criterion<'_>> = vec![
        ("Brewster setup", Box::new(brewster)),
        ("grating channel weights", Box::new(channel_weights)),
        ("threshold limit of |tau1|^2", Box::new(threshold_limit)),
        (
            "dual-pipeline equivalence",
            Box::new(|| dual_pipeline(&mut routes)),
        ),
    ];
    let mut failures = 0;
    let mut report = |n: usize, name: &str, verdict: Verdict, took: Duration| {
        let (pass, detail) = verdict.unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!pass);
        println!(
            "criterion {n} {}: {name}: {detail} [{:.1} ms]",
            if pass { "PASS" } else { "FAIL" },
            ms(took)
        );
    };
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        report(i + 1, name, verdict, start.elapsed());
    }
    let later: [(&str, &dyn Fn() -> Verdict); 4] = [
        ("kernel route equivalence", &|| kernel_routes(&routes)),
        ("grating/pipeline duality", &duality),
        ("cloak closure", &cloak_closure),
        ("lossless no-go", &no_go),
    ];
    for (i, (name, run)) in later.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        report(i + 5, name, verdict, start.elapsed());
    }
    println!("{} of 8 criteria pass", 8 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Subcommand implementations.

use std::path::Path;
use std::sync::Arc;

use bergmann2d::cloak::{
    default_y_samples, feasibility, gaussian_exp_design, gaussian_exp_setup, solve_layers,
    LayerShapes, Sign, SlabSpec,
};
use bergmann2d::dyson::series_amplitude;
use bergmann2d::grating::{
    brewster_setup, channels, figure_data, tau, tau_approx, Figure, GratingSpec, Incidence, Side,
};
use bergmann2d::lowfreq::{wrap_angle, Amplitude, LowFreqModel};
use bergmann2d::media::{
    to_alpha_beta, AlphaBetaProfile, DecayClass, FnField, MediumFile, SpectralKind,
};
use bergmann2d::{Error, Settings};
use num_complex::Complex64;

use crate::config::{
    AmplitudeArgs, CloakArgs, FiguresArgs, GratingArgs, LayerFile, OracleArgs, SlabFile,
    SlabProfile,
};
use crate::error::CliError;
use crate::output::{emit, line_plot, sibling, Cell, Series, Table};

/// θᵢ = −90° + (i + ¼)·360°/n, which never lands on ±90°.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (-90.0 + (i as f64 + 0.25) * 360.0 / n as f64).to_radians())
        .collect()
}

fn load_medium(path: &Path, s: &Settings) -> Result<AlphaBetaProfile, CliError> {
    let file = MediumFile::load(path)?;
    let profile = file.build()?;
    log::info!(
        "medium {} ({:?}, ell = {})",
        path.display(),
        file.mode,
        profile.ell
    );
    Ok(to_alpha_beta(&profile, file.mode, s)?)
}

fn deg(theta: f64) -> f64 {
    wrap_angle(theta).to_degrees()
}

/// Smooth samples, with zeros on the grid for media whose amplitude is purely discrete.
fn smooth_rows(amp: &Amplitude, thetas: &[f64]) -> Vec<(f64, Complex64)> {
    if amp.smooth.is_empty() {
        thetas
            .iter()
            .map(|&t| (t, Complex64::new(0.0, 0.0)))
            .collect()
    } else {
        amp.smooth.clone()
    }
}

pub fn amplitude(a: &AmplitudeArgs, s: &Settings) -> Result<(), CliError> {
    let ab = load_medium(&a.medium, s)?;
    let model = LowFreqModel::new(&ab, s)?;
    let thetas = angle_grid(a.theta_grid);
    let amp = model.amplitude(
        a.k,
        a.theta0_deg.to_radians(),
        &thetas,
        a.k * ab.ell,
        a.order,
    )?;
    let mut smooth = Table::new(&["theta_deg", "re_f", "im_f", "|f|^2"]);
    for (t, f) in smooth_rows(&amp, &thetas) {
        smooth.push(vec![
            deg(t).into(),
            f.re.into(),
            f.im.into(),
            f.norm_sqr().into(),
        ]);
    }
    let mut dirac = Table::new(&["theta_deg", "re_tau", "im_tau"]);
    let mut weights = amp.dirac.clone();
    weights.sort_by(|x, y| x.theta.total_cmp(&y.theta));
    for d in &weights {
        dirac.push(vec![
            deg(d.theta).into(),
            d.weight.re.into(),
            d.weight.im.into(),
        ]);
    }
    match &a.out {
        Some(path) => {
            smooth.save(path)?;
            dirac.save(&sibling(path, "dirac"))?;
        }
        None => {
            emit(&smooth, None)?;
            println!();
            emit(&dirac, None)?;
        }
    }
    Ok(())
}

pub fn oracle(a: &OracleArgs, s: &Settings) -> Result<(), CliError> {
    let ab = load_medium(&a.medium, s)?;
    let model = LowFreqModel::new(&ab, s)?;
    let discrete = model.kind() == SpectralKind::Discrete;
    let (thetas, nodes) = if discrete {
        (Vec::new(), 0)
    } else {
        (angle_grid(a.theta_grid), a.nodes)
    };
    let theta0 = a.theta0_deg.to_radians();
    let kl = a.k * ab.ell;
    let lf = model.amplitude(a.k, theta0, &thetas, kl, a.order)?;
    let dy = series_amplitude(&ab, a.k, theta0, &thetas, nodes, kl, a.order, s)?;

    let mut rows: Vec<(&str, f64, Complex64, Complex64)> = lf
        .smooth
        .iter()
        .zip(&dy.smooth)
        .map(|(l, d)| ("smooth", l.0, l.1, d.1))
        .collect();
    let mut angles: Vec<f64> = lf.dirac.iter().chain(&dy.dirac).map(|d| d.theta).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    angles.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    rows.extend(
        angles
            .into_iter()
            .map(|t| ("dirac", t, lf.dirac_at(t), dy.dirac_at(t))),
    );

    let mut table = Table::new(&[
        "theta_deg",
        "part",
        "re_lowfreq",
        "im_lowfreq",
        "re_oracle",
        "im_oracle",
        "abs_diff",
    ]);
    let (mut scale, mut worst): (f64, f64) = (0.0, 0.0);
    for &(part, t, l, d) in &rows {
        scale = scale.max(l.norm());
        worst = worst.max((l - d).norm());
        table.push(vec![
            deg(t).into(),
            part.into(),
            l.re.into(),
            l.im.into(),
            d.re.into(),
            d.im.into(),
            (l - d).norm().into(),
        ]);
    }
    emit(&table, a.out.as_deref())?;
    let relative = if worst == 0.0 { 0.0 } else { worst / scale };
    let summary = format!("max_discrepancy abs {worst:.3e} relative {relative:.3e}");
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if relative > s.oracle_tol {
        return Err(Error::RouteMismatch {
            what: "low-frequency amplitude vs Dyson series".into(),
            discrepancy: relative,
            tol: s.oracle_tol,
        }
        .into());
    }
    Ok(())
}

fn figure_kind(n: u8) -> Figure {
    match n {
        3 => Figure::Fig3,
        4 => Figure::Fig4,
        _ => Figure::Fig5,
    }
}

fn numeric_table(t: &bergmann2d::grating::Table) -> Table {
    let header: Vec<&str> = t.columns.iter().map(String::as_str).collect();
    let mut out = Table::new(&header);
    for row in &t.rows {
        out.push(row.iter().map(|&v| Cell::Num(v)).collect());
    }
    out
}

pub fn grating(a: &GratingArgs) -> Result<(), CliError> {
    let spec = GratingSpec::new(a.z0, a.z1, a.k_grating, a.ell)?;
    if let Some(fig) = a.figure {
        let data = figure_data(figure_kind(fig), &spec, a.samples)?;
        return emit(&numeric_table(&data), a.out.as_deref());
    }
    let k =
        a.k.ok_or_else(|| CliError::ConfigInvalid("grating needs --k".into()))?;
    let inc = match (a.brewster, a.theta0_deg) {
        (true, _) => brewster_setup(&spec)?.incidence(k),
        (false, Some(t)) => Incidence::from_angle(k, t.to_radians())?,
        (false, None) => {
            return Err(CliError::ConfigInvalid(
                "grating needs --theta0-deg or --brewster".into(),
            ))
        }
    };
    let or_nan = |r: bergmann2d::Result<Complex64>| -> Result<Complex64, CliError> {
        match r {
            Ok(v) => Ok(v),
            Err(Error::NotDerived(_)) => Ok(Complex64::new(f64::NAN, f64::NAN)),
            Err(e) => Err(e.into()),
        }
    };
    let mut table = Table::new(&[
        "j",
        "side",
        "theta_deg",
        "re_tau1",
        "im_tau1",
        "re_tau2",
        "im_tau2",
        "re_tau_approx",
        "im_tau_approx",
    ]);
    for ch in &channels(&inc, &spec).channels {
        for (side, label, theta) in [
            (Side::Plus, "+", ch.theta_plus),
            (Side::Minus, "-", ch.theta_minus),
        ] {
            let t1 = tau(1, ch.j, side, &inc, &spec)?;
            let t2 = or_nan(tau(2, ch.j, side, &inc, &spec))?;
            let approx = or_nan(tau_approx(a.order, ch.j, side, &inc, &spec))?;
            table.push(vec![
                (ch.j as f64).into(),
                label.into(),
                deg(theta).into(),
                t1.re.into(),
                t1.im.into(),
                t2.re.into(),
                t2.im.into(),
                approx.re.into(),
                approx.im.into(),
            ]);
        }
    }
    emit(&table, a.out.as_deref())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
}

fn build_slab(file: &SlabFile) -> Result<SlabSpec, CliError> {
    Ok(match file.profile {
        SlabProfile::GaussianExp { z, kappa, width } => {
            SlabSpec::gaussian_exp(z, kappa, width, file.ell_star)?
        }
        SlabProfile::Uniform { eps, width } => {
            let amp = eps.value();
            let field = FnField::new("uniform slab", move |_, y: f64| {
                amp * (-0.5 * (y / width).powi(2)).exp()
            });
            SlabSpec::new(
                Arc::new(field),
                file.ell_star,
                DecayClass::Gaussian { width },
            )?
        }
    })
}

fn build_layers(file: &LayerFile) -> LayerShapes {
    match *file {
        LayerFile::Gaussian { amp, width } => LayerShapes::gaussian(amp, width),
        LayerFile::Constant { minus, plus } => LayerShapes::constant(minus, plus),
    }
}

fn y_net(decay: &DecayClass, count: Option<usize>) -> Vec<f64> {
    let net = default_y_samples(decay);
    match count {
        None => net,
        Some(1) => vec![0.5 * (net[0] + net[net.len() - 1])],
        Some(n) => {
            let (lo, hi) = (net[0], net[net.len() - 1]);
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
    }
}

pub fn cloak(a: &CloakArgs, s: &Settings) -> Result<(), CliError> {
    let slab_file: SlabFile = read_json(&a.slab)?;
    let (slab, shapes) = if a.layers == "builtin:gaussian_exp" {
        let SlabProfile::GaussianExp { z, kappa, width } = slab_file.profile else {
            return Err(CliError::ConfigInvalid(
                "builtin:gaussian_exp layers need a gaussian_exp slab".into(),
            ));
        };
        gaussian_exp_setup(z, kappa, width, a.alpha, slab_file.ell_star)?
    } else {
        let layers: LayerFile = read_json(Path::new(&a.layers))?;
        (build_slab(&slab_file)?, build_layers(&layers))
    };
    let ys = y_net(&slab.decay, a.y_samples);
    log::info!("cloak: {} y-samples, layers {}", ys.len(), shapes.label());
    let design = solve_layers(&slab, &shapes, a.sigma, &ys, s)?;
    let reports = feasibility(&slab, &shapes, &ys, s)?;
    let mut table = Table::new(&[
        "y",
        "ell_minus",
        "ell_plus",
        "re_eps_minus",
        "im_eps_minus",
        "re_eps_plus",
        "im_eps_plus",
        "residual_1",
        "residual_2",
        "feasible",
    ]);
    for (col, rep) in design.columns.iter().zip(&reports) {
        table.push(vec![
            col.y.into(),
            col.ell_minus.into(),
            col.ell_plus.into(),
            col.eps_minus.re.into(),
            col.eps_minus.im.into(),
            col.eps_plus.re.into(),
            col.eps_plus.im.into(),
            col.residuals[0].norm().into(),
            col.residuals[1].norm().into(),
            Cell::Text(u8::from(rep.positive_real_parts).to_string()),
        ]);
    }
    emit(&table, a.out.as_deref())
}

/// ε̂±(y) of the worked Gaussian-exponential coating.
pub fn fig7_table(samples: usize) -> Result<Table, CliError> {
    let n = samples.max(2);
    let ys: Vec<f64> = (0..=n)
        .map(|i| -15.0 + 30.0 * i as f64 / n as f64)
        .collect();
    let design = gaussian_exp_design(
        0.4,
        3.0,
        5.0,
        1.0,
        1.0 / 3.0,
        Sign::Minus,
        &ys,
        &Settings::default(),
    )?;
    let mut table = Table::new(&[
        "y",
        "re_eps_minus",
        "im_eps_minus",
        "re_eps_plus",
        "im_eps_plus",
    ]);
    for col in &design.columns {
        table.push(vec![
            col.y.into(),
            col.eps_minus.re.into(),
            col.eps_minus.im.into(),
            col.eps_plus.re.into(),
            col.eps_plus.im.into(),
        ]);
    }
    Ok(table)
}

fn series_of(table: &Table, x: &str, ys: &[(&str, &str)]) -> Vec<Series> {
    let xs = table.column(x).unwrap_or_default();
    ys.iter()
        .map(|(col, label)| Series {
            label: label.to_string(),
            points: xs
                .iter()
                .copied()
                .zip(table.column(col).unwrap_or_default())
                .collect(),
        })
        .collect()
}

pub fn figures(a: &FiguresArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.out_dir.display())))?;
    let all = a.which.iter().any(|w| w == "all");
    let wanted = |n: &str| all || a.which.iter().any(|w| w == n);
    let spec = GratingSpec::ingaasp();
    let mut jobs: Vec<(&str, Table, String)> = Vec::new();
    if wanted("3") {
        let t = numeric_table(&figure_data(Figure::Fig3, &spec, a.samples)?);
        let plot = line_plot(
            "first-order diffraction angles",
            "k/K",
            "theta (deg)",
            &series_of(
                &t,
                "k_over_K",
                &[
                    ("theta1_plus_deg", "theta1+"),
                    ("theta1_minus_deg", "theta1-"),
                ],
            ),
        );
        jobs.push(("fig3", t, plot));
    }
    if wanted("4") {
        let t = numeric_table(&figure_data(Figure::Fig4, &spec, a.samples)?);
        let plot = line_plot(
            "tau0- (approximations)",
            "k l",
            "tau0-",
            &series_of(
                &t,
                "kl",
                &[
                    ("re_tau0m_o1", "Re, order 1"),
                    ("re_tau0m_o2", "Re, order 2"),
                    ("im_tau0m_o2", "Im, order 2"),
                ],
            ),
        );
        jobs.push(("fig4", t, plot));
    }
    if wanted("5") {
        let t = numeric_table(&figure_data(Figure::Fig5, &spec, a.samples)?);
        let plot = line_plot(
            "|tau1|^2 x 1e4 (approximations)",
            "k l",
            "|tau1|^2 x 1e4",
            &series_of(
                &t,
                "kl",
                &[
                    ("tau1p_sq_o1", "+, order 1"),
                    ("tau1m_sq_o1", "-, order 1"),
                    ("tau1p_sq_o2", "+, order 2"),
                    ("tau1m_sq_o2", "-, order 2"),
                ],
            ),
        );
        jobs.push(("fig5", t, plot));
    }
    if wanted("7") {
        let t = fig7_table(a.samples)?;
        let plot = line_plot(
            "coating permittivities",
            "y / l",
            "eps",
            &series_of(
                &t,
                "y",
                &[
                    ("re_eps_minus", "Re eps-"),
                    ("re_eps_plus", "Re eps+"),
                    ("im_eps_minus", "Im eps-"),
                    ("im_eps_plus", "Im eps+"),
                ],
            ),
        );
        jobs.push(("fig7", t, plot));
    }
    for (name, table, svg) in jobs {
        table.save(&a.out_dir.join(format!("{name}.csv")))?;
        let path = a.out_dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        log::info!("wrote {name}");
    }
    Ok(())
}

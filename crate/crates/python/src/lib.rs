//! Python bindings. Angles cross the boundary in degrees, complex numbers as
//! Python `complex`.

use std::f64::consts::PI;
use std::path::PathBuf;

use bergmann2d::cloak::{self, CoatedSlab, LayerSolution, Sign};
use bergmann2d::dyson::series_amplitude;
use bergmann2d::grating::{self, Figure, GratingSpec, Incidence, Side};
use bergmann2d::lowfreq::{Amplitude, LowFreqModel};
use bergmann2d::media::{to_alpha_beta, AlphaBetaProfile, MediumFile, MediumProfile, ModeKind};
use bergmann2d::{Error, Settings};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(bergmann2d, BergmannError, PyValueError);

fn err(e: Error) -> PyErr {
    let kind = format!("{e:?}")
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string();
    let py_err = match e {
        Error::Io(m) => return PyOSError::new_err(m),
        e => BergmannError::new_err(e.to_string()),
    };
    Python::attach(|py| {
        let _ = py_err.value(py).setattr("kind", kind);
    });
    py_err
}

fn mode(name: &str) -> PyResult<ModeKind> {
    match name.to_ascii_uppercase().as_str() {
        "TE" => Ok(ModeKind::TE),
        "TM" => Ok(ModeKind::TM),
        _ => Err(PyValueError::new_err(format!(
            "mode must be 'TE' or 'TM', got {name:?}"
        ))),
    }
}

fn side(name: &str) -> PyResult<Side> {
    match name {
        "+" => Ok(Side::Plus),
        "-" => Ok(Side::Minus),
        _ => Err(PyValueError::new_err(format!(
            "side must be '+' or '-', got {name:?}"
        ))),
    }
}

fn sign(name: &str) -> PyResult<Sign> {
    name.parse().map_err(err)
}

/// The default 37-angle net, offset from the axes to avoid grazing directions.
fn angle_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (-90.0 + (i as f64 + 0.25) * 360.0 / n as f64).to_radians())
        .collect()
}

/// Permittivity and permeability deviations on a strip, with a polarization.
#[pyclass(frozen, module = "bergmann2d")]
struct Medium {
    profile: MediumProfile,
    mode: ModeKind,
}

impl Medium {
    fn alpha_beta(&self, s: &Settings) -> PyResult<AlphaBetaProfile> {
        to_alpha_beta(&self.profile, self.mode, s).map_err(err)
    }
}

#[pymethods]
impl Medium {
    /// Load a medium JSON file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = MediumFile::load(&path).map_err(err)?;
        Ok(Medium {
            profile: file.build().map_err(err)?,
            mode: file.mode,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file = MediumFile::parse(text).map_err(err)?;
        Ok(Medium {
            profile: file.build().map_err(err)?,
            mode: file.mode,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (mode_name = "TM", ell = 1.0))]
    fn vacuum(mode_name: &str, ell: f64) -> PyResult<Self> {
        Ok(Medium {
            profile: MediumProfile::vacuum(ell).map_err(err)?,
            mode: mode(mode_name)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (eps, mu, mode_name = "TM", ell = 1.0))]
    fn slab(eps: Complex64, mu: Complex64, mode_name: &str, ell: f64) -> PyResult<Self> {
        Ok(Medium {
            profile: MediumProfile::slab(eps, mu, ell).map_err(err)?,
            mode: mode(mode_name)?,
        })
    }

    /// ε̂ = 1 + z0 + z1 e^{iKy}, nonmagnetic.
    #[staticmethod]
    #[pyo3(signature = (z0, z1, k_grating, ell, mode_name = "TM"))]
    fn grating(
        z0: Complex64,
        z1: Complex64,
        k_grating: f64,
        ell: f64,
        mode_name: &str,
    ) -> PyResult<Self> {
        Ok(Medium {
            profile: MediumProfile::grating(z0, z1, k_grating, ell).map_err(err)?,
            mode: mode(mode_name)?,
        })
    }

    /// Deviations amp·e^{−κx}e^{−y²/2L²} in ε̂ and μ̂.
    #[staticmethod]
    #[pyo3(signature = (eps_amp, mu_amp, kappa, width, mode_name = "TM", ell = 1.0))]
    fn gaussian_exp(
        eps_amp: Complex64,
        mu_amp: Complex64,
        kappa: f64,
        width: f64,
        mode_name: &str,
        ell: f64,
    ) -> PyResult<Self> {
        Ok(Medium {
            profile: MediumProfile::gaussian_exp(eps_amp, mu_amp, kappa, width, ell)
                .map_err(err)?,
            mode: mode(mode_name)?,
        })
    }

    /// The Gaussian-exponential slab with its two-layer coating, as a TM medium.
    #[staticmethod]
    #[pyo3(signature = (z, kappa, width, alpha, ell_star, sigma = "-"))]
    fn coated_gaussian_exp(
        z: f64,
        kappa: f64,
        width: f64,
        alpha: f64,
        ell_star: f64,
        sigma: &str,
    ) -> PyResult<Self> {
        let (slab, shapes) =
            cloak::gaussian_exp_setup(z, kappa, width, alpha, ell_star).map_err(err)?;
        let coated =
            CoatedSlab::new(slab, shapes, sign(sigma)?, None, &Settings::default()).map_err(err)?;
        Ok(Medium {
            profile: coated.profile().map_err(err)?,
            mode: ModeKind::TM,
        })
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.profile.ell
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.mode {
            ModeKind::TE => "TE",
            ModeKind::TM => "TM",
        }
    }

    fn __repr__(&self) -> String {
        format!("Medium(mode={}, ell={})", self.mode(), self.profile.ell)
    }
}

type Samples = Vec<(f64, Complex64)>;

fn split(amp: Amplitude) -> (Samples, Samples) {
    let smooth = amp
        .smooth
        .into_iter()
        .map(|(t, f)| (t.to_degrees(), f))
        .collect();
    let mut dirac: Samples = amp
        .dirac
        .into_iter()
        .map(|d| (d.theta.to_degrees(), d.weight))
        .collect();
    dirac.sort_by(|a, b| a.0.total_cmp(&b.0));
    (smooth, dirac)
}

fn thetas(thetas_deg: Option<Vec<f64>>) -> Vec<f64> {
    thetas_deg
        .map(|v| v.into_iter().map(f64::to_radians).collect())
        .unwrap_or_else(|| angle_grid(37))
}

/// Low-frequency amplitude up to `order`: (smooth samples, Dirac weights),
/// each a list of (angle in degrees, complex value). Discrete and vacuum
/// media have no smooth part.
#[pyfunction]
#[pyo3(signature = (medium, k, theta0_deg, thetas_deg = None, order = 1))]
fn amplitude(
    py: Python<'_>,
    medium: &Medium,
    k: f64,
    theta0_deg: f64,
    thetas_deg: Option<Vec<f64>>,
    order: usize,
) -> PyResult<(Samples, Samples)> {
    let s = Settings::default();
    let thetas = thetas(thetas_deg);
    let ab = medium.alpha_beta(&s)?;
    let amp = py
        .detach(|| {
            LowFreqModel::new(&ab, &s)?.amplitude(
                k,
                theta0_deg.to_radians(),
                &thetas,
                k * ab.ell,
                order,
            )
        })
        .map_err(err)?;
    Ok(split(amp))
}

/// The same amplitude from a discretized operator series on `nodes` angles.
#[pyfunction]
#[pyo3(signature = (medium, k, theta0_deg, thetas_deg = None, order = 1, nodes = 48))]
fn oracle_amplitude(
    py: Python<'_>,
    medium: &Medium,
    k: f64,
    theta0_deg: f64,
    thetas_deg: Option<Vec<f64>>,
    order: usize,
    nodes: usize,
) -> PyResult<(Samples, Samples)> {
    let s = Settings::default();
    let thetas = thetas(thetas_deg);
    let ab = medium.alpha_beta(&s)?;
    let amp = py
        .detach(|| {
            series_amplitude(
                &ab,
                k,
                theta0_deg.to_radians(),
                &thetas,
                nodes,
                k * ab.ell,
                order,
                &s,
            )
        })
        .map_err(err)?;
    Ok(split(amp))
}

/// Single-harmonic grating ε̂ = 1 + z0 + z1 e^{iKy} on a strip of thickness ell.
#[pyclass(frozen, module = "bergmann2d")]
struct Grating {
    spec: GratingSpec,
}

impl Grating {
    fn incidence(&self, k: f64, theta0_deg: Option<f64>) -> PyResult<Incidence> {
        match theta0_deg {
            Some(t) => Incidence::from_angle(k, t.to_radians()).map_err(err),
            None => Ok(grating::brewster_setup(&self.spec)
                .map_err(err)?
                .incidence(k)),
        }
    }
}

#[pymethods]
impl Grating {
    #[new]
    #[pyo3(signature = (
        z0 = Complex64::new(10.58, 0.0),
        z1 = Complex64::new(0.07, 0.0),
        k_grating = PI,
        ell = 0.1,
    ))]
    fn new(z0: Complex64, z1: Complex64, k_grating: f64, ell: f64) -> PyResult<Self> {
        Ok(Grating {
            spec: GratingSpec::new(z0, z1, k_grating, ell).map_err(err)?,
        })
    }

    /// Brewster angle, the matching incidence angle and the threshold wavenumber.
    fn brewster<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let b = grating::brewster_setup(&self.spec).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("theta_b_deg", b.theta_b.to_degrees())?;
        d.set_item("theta0_deg", b.theta0.to_degrees())?;
        d.set_item("kappa0", b.kappa0)?;
        Ok(d)
    }

    /// Closed-form channel weight of order `n`; Brewster incidence when
    /// `theta0_deg` is omitted.
    #[pyo3(signature = (n, j, side_name, k, theta0_deg = None))]
    fn tau(
        &self,
        n: usize,
        j: usize,
        side_name: &str,
        k: f64,
        theta0_deg: Option<f64>,
    ) -> PyResult<Complex64> {
        let inc = self.incidence(k, theta0_deg)?;
        grating::tau(n, j, side(side_name)?, &inc, &self.spec).map_err(err)
    }

    #[pyo3(signature = (order, j, side_name, k, theta0_deg = None))]
    fn tau_approx(
        &self,
        order: usize,
        j: usize,
        side_name: &str,
        k: f64,
        theta0_deg: Option<f64>,
    ) -> PyResult<Complex64> {
        let inc = self.incidence(k, theta0_deg)?;
        grating::tau_approx(order, j, side(side_name)?, &inc, &self.spec).map_err(err)
    }

    /// Figure table 3, 4 or 5 as a dict of columns.
    #[pyo3(signature = (which, samples = 200))]
    fn figure<'py>(
        &self,
        py: Python<'py>,
        which: u8,
        samples: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let fig = match which {
            3 => Figure::Fig3,
            4 => Figure::Fig4,
            5 => Figure::Fig5,
            _ => {
                return Err(PyValueError::new_err(format!(
                    "figure must be 3, 4 or 5, got {which}"
                )))
            }
        };
        let table = grating::figure_data(fig, &self.spec, samples).map_err(err)?;
        let d = PyDict::new(py);
        for (i, name) in table.columns.iter().enumerate() {
            let col: Vec<f64> = table.rows.iter().map(|r| r[i]).collect();
            d.set_item(name, col)?;
        }
        Ok(d)
    }
}

fn column_dict<'py>(py: Python<'py>, c: &LayerSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("y", c.y)?;
    d.set_item("ell_minus", c.ell_minus)?;
    d.set_item("ell_plus", c.ell_plus)?;
    d.set_item("mean_minus", c.e_minus)?;
    d.set_item("mean_plus", c.e_plus)?;
    d.set_item("u_minus", c.u_minus)?;
    d.set_item("u_plus", c.u_plus)?;
    d.set_item("u0", c.u0)?;
    d.set_item("eps_minus", c.eps_minus)?;
    d.set_item("eps_plus", c.eps_plus)?;
    d.set_item("residuals", (c.residuals[0].norm(), c.residuals[1].norm()))?;
    d.set_item("coated", c.coated)?;
    Ok(d)
}

/// Coating permittivities on one column from the slab deviations d± = 𝓔± − 1.
#[pyfunction]
#[pyo3(signature = (d_minus, d_plus, ell_star, ell_minus, ell_plus, sigma = "-", y = 0.0))]
fn solve_column<'py>(
    py: Python<'py>,
    d_minus: Complex64,
    d_plus: Complex64,
    ell_star: f64,
    ell_minus: f64,
    ell_plus: f64,
    sigma: &str,
    y: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sol = cloak::solve_column(
        y,
        [d_minus, d_plus],
        ell_star,
        ell_minus,
        ell_plus,
        sign(sigma)?,
        &Settings::default(),
    )
    .map_err(err)?;
    column_dict(py, &sol)
}

/// Coating of the Gaussian-exponential slab, one dict per y-sample.
#[pyfunction]
#[pyo3(signature = (z, kappa, width, alpha, ell_star, ys, sigma = "-"))]
fn gaussian_exp_design<'py>(
    py: Python<'py>,
    z: f64,
    kappa: f64,
    width: f64,
    alpha: f64,
    ell_star: f64,
    ys: Vec<f64>,
    sigma: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let sigma = sign(sigma)?;
    let s = Settings::default();
    let design = py
        .detach(|| cloak::gaussian_exp_design(z, kappa, width, alpha, ell_star, sigma, &ys, &s))
        .map_err(err)?;
    design.columns.iter().map(|c| column_dict(py, c)).collect()
}

/// Common real part of ε̂± in the Gaussian-exponential design.
#[pyfunction]
fn gaussian_exp_real_part(z: f64, kappa: f64, alpha: f64, ell_star: f64) -> f64 {
    cloak::gaussian_exp_real_part(z, kappa, alpha, ell_star)
}

/// Column residuals ∫dx/α − ℓ, ∫ε̂dx − ℓ, ∫μ̂dx − ℓ as (y, inv_alpha, eps, mu).
#[pyfunction]
fn invisibility_residuals(
    py: Python<'_>,
    medium: &Medium,
    ys: Vec<f64>,
) -> PyResult<Vec<(f64, Complex64, Complex64, Complex64)>> {
    let s = Settings::default();
    let ab = medium.alpha_beta(&s)?;
    let rows = py
        .detach(|| cloak::invisibility_residuals(&ab, &ys, &s))
        .map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.y, r.inv_alpha, r.eps, r.mu))
        .collect())
}

#[pymodule]
#[pyo3(name = "bergmann2d")]
fn bergmann2d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BergmannError", m.py().get_type::<BergmannError>())?;
    m.add_class::<Medium>()?;
    m.add_class::<Grating>()?;
    m.add_function(wrap_pyfunction!(amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(solve_column, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_exp_design, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_exp_real_part, m)?)?;
    m.add_function(wrap_pyfunction!(invisibility_residuals, m)?)?;
    Ok(())
}

//! JSON medium descriptions and CSV grid ingestion.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{FieldRef, GridField, Zero};
use super::{DecayClass, MediumProfile, ModeKind};
use crate::error::{Error, Result};

/// A complex number written either as a plain real or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexSpec::Real(r) => Complex64::new(r, 0.0),
            ComplexSpec::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl Default for ComplexSpec {
    fn default() -> Self {
        ComplexSpec::Real(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Homogeneous slab with constant deviations.
    Slab {
        #[serde(default)]
        eps: ComplexSpec,
        #[serde(default)]
        mu: ComplexSpec,
    },
    /// ε̂ = 1 + z0 + z1 e^{iKy}, nonmagnetic.
    Grating {
        z0: ComplexSpec,
        z1: ComplexSpec,
        #[serde(rename = "K")]
        k_grating: f64,
    },
    /// w = amp·e^{−κx}e^{−y²/2L²} in ε̂ and/or μ̂.
    GaussianExp {
        #[serde(default)]
        eps_amp: ComplexSpec,
        #[serde(default)]
        mu_amp: ComplexSpec,
        kappa: f64,
        #[serde(rename = "L")]
        width: f64,
    },
    /// CSV with columns x̌, y, Re w_ε, Im w_ε, Re w_μ, Im w_μ on a full tensor grid.
    Grid { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumFile {
    pub mode: ModeKind,
    pub ell: f64,
    pub profile: ProfileSpec,
}

impl MediumFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("medium JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut file = Self::parse(&text)?;
        if let ProfileSpec::Grid { path: grid } = &mut file.profile {
            if grid.is_relative() {
                if let Some(dir) = path.parent() {
                    *grid = dir.join(&*grid);
                }
            }
        }
        Ok(file)
    }

    pub fn build(&self) -> Result<MediumProfile> {
        match &self.profile {
            ProfileSpec::Slab { eps, mu } => MediumProfile::slab(eps.value(), mu.value(), self.ell),
            ProfileSpec::Grating { z0, z1, k_grating } => {
                MediumProfile::grating(z0.value(), z1.value(), *k_grating, self.ell)
            }
            ProfileSpec::GaussianExp {
                eps_amp,
                mu_amp,
                kappa,
                width,
            } => MediumProfile::gaussian_exp(
                eps_amp.value(),
                mu_amp.value(),
                *kappa,
                *width,
                self.ell,
            ),
            ProfileSpec::Grid { path } => {
                let (eps, mu, range) = read_grid(path)?;
                MediumProfile::new(
                    eps,
                    mu,
                    self.ell,
                    DecayClass::CompactSupport {
                        y_min: range.0,
                        y_max: range.1,
                    },
                )
            }
        }
    }
}

fn read_grid(path: &Path) -> Result<(FieldRef, FieldRef, (f64, f64))> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<[f64; 6]> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("grid CSV: {e}")))?;
        if rec.len() != 6 {
            return Err(Error::InvalidInput(format!(
                "grid CSV rows need 6 columns, got {}",
                rec.len()
            )));
        }
        let mut row = [0.0; 6];
        for (slot, s) in row.iter_mut().zip(rec.iter()) {
            *slot = s
                .parse()
                .map_err(|_| Error::InvalidInput(format!("grid CSV: bad number {s:?}")))?;
        }
        rows.push(row);
    }
    let axis = |i: usize| -> Vec<f64> {
        let mut v: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    };
    let (xs, ys) = (axis(0), axis(1));
    if xs.len() * ys.len() != rows.len() {
        return Err(Error::InvalidInput(
            "grid CSV does not form a full tensor grid".into(),
        ));
    }
    let mut eps = vec![Complex64::new(0.0, 0.0); rows.len()];
    let mut mu = eps.clone();
    for r in &rows {
        let ix = xs.partition_point(|v| *v < r[0]);
        let iy = ys.partition_point(|v| *v < r[1]);
        eps[iy * xs.len() + ix] = Complex64::new(r[2], r[3]);
        mu[iy * xs.len() + ix] = Complex64::new(r[4], r[5]);
    }
    let range = (ys[0], ys[ys.len() - 1]);
    let wrap = |vals: Vec<Complex64>| -> Result<FieldRef> {
        let g = GridField::new(xs.clone(), ys.clone(), vals)?;
        Ok(if super::Field::is_zero(&g) {
            Arc::new(Zero)
        } else {
            Arc::new(g)
        })
    };
    Ok((wrap(eps)?, wrap(mu)?, range))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins() {
        let f = MediumFile::parse(r#"{"mode":"TM","ell":1.0,"profile":{"kind":"grating","z0":10.58,"z1":[0.07,0.0],"K":3.14}}"#)
            .unwrap();
        assert_eq!(f.mode, ModeKind::TM);
        let m = f.build().unwrap();
        assert!(matches!(m.decay, DecayClass::SingleHarmonic { .. }));
        let g = MediumFile::parse(
            r#"{"mode":"TE","ell":2.0,"profile":{"kind":"gaussian_exp","eps_amp":0.4,"kappa":0.5,"L":5}}"#,
        )
        .unwrap();
        assert!(g.build().unwrap().w_mu.is_zero());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(MediumFile::parse(
            r#"{"mode":"TM","ell":1,"profile":{"kind":"slab","epsilon":1}}"#
        )
        .is_err());
    }

    #[test]
    fn reads_grid_csv() {
        let dir = std::env::temp_dir().join(format!("bergmann2d-grid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut text = String::from("x,y,re_eps,im_eps,re_mu,im_mu\n");
        for y in [-1.0, 0.0, 1.0] {
            for x in [0.0, 1.0] {
                text += &format!("{x},{y},{},0,0,0\n", 1.0 - f64::abs(y));
            }
        }
        std::fs::write(dir.join("g.csv"), text).unwrap();
        std::fs::write(
            dir.join("m.json"),
            r#"{"mode":"TM","ell":1,"profile":{"kind":"grid","path":"g.csv"}}"#,
        )
        .unwrap();
        let m = MediumFile::load(&dir.join("m.json"))
            .unwrap()
            .build()
            .unwrap();
        assert!((m.w_eps.value(0.5, 0.5) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(m.w_mu.is_zero());
        std::fs::remove_dir_all(dir).ok();
    }
}

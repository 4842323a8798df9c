//! Run configuration shared by the command line and JSON config files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use bergmann2d::cloak::Sign;
use bergmann2d::media::ComplexSpec;
use bergmann2d::Settings;
use clap::{Args, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything one invocation needs; round-trips through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub command: Command,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.settings
            .validate()
            .map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        if self.threads == Some(0) {
            return Err(CliError::ConfigInvalid("threads must be at least 1".into()));
        }
        self.command.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Low-frequency amplitude f = f1 kl + f2 (kl)^2 on an angular grid.
    Amplitude(AmplitudeArgs),
    /// Low-frequency amplitude side by side with the Dyson-series oracle.
    Oracle(OracleArgs),
    /// Channel weights of the single-harmonic grating, or its figure data.
    Grating(GratingArgs),
    /// Two-layer coating permittivities for a slab.
    Cloak(CloakArgs),
    /// Regenerate figure data as CSV plus SVG line plots.
    Figures(FiguresArgs),
    /// Randomized consistency checks driven by --seed.
    Selftest(SelftestArgs),
}

impl Command {
    fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::ConfigInvalid(m));
        let order_ok = |o: usize| (1..=2).contains(&o);
        match self {
            Command::Amplitude(a) => {
                check_k(a.k)?;
                if !order_ok(a.order) {
                    return invalid(format!("order must be 1 or 2, got {}", a.order));
                }
                if a.theta_grid == 0 {
                    return invalid("theta-grid must be positive".into());
                }
            }
            Command::Oracle(a) => {
                check_k(a.k)?;
                if !order_ok(a.order) {
                    return invalid(format!("order must be 1 or 2, got {}", a.order));
                }
                if a.nodes == 0 || a.theta_grid == 0 {
                    return invalid("nodes and theta-grid must be positive".into());
                }
            }
            Command::Grating(a) => {
                if !order_ok(a.order) {
                    return invalid(format!("order must be 1 or 2, got {}", a.order));
                }
                match (a.figure, a.k) {
                    (Some(f), _) if !(3..=5).contains(&f) => {
                        return invalid(format!("figure must be 3, 4 or 5, got {f}"));
                    }
                    (Some(_), _) => {}
                    (None, None) => return invalid("grating needs --k or --figure".into()),
                    (None, Some(k)) => {
                        check_k(k)?;
                        if a.theta0_deg.is_none() && !a.brewster {
                            return invalid("grating needs --theta0-deg or --brewster".into());
                        }
                    }
                }
                if a.samples == 0 {
                    return invalid("samples must be positive".into());
                }
            }
            Command::Cloak(a) => {
                if a.y_samples == Some(0) {
                    return invalid("y-samples must be positive".into());
                }
                if !(a.alpha > 0.0) {
                    return invalid(format!("alpha must be positive, got {}", a.alpha));
                }
            }
            Command::Figures(a) => {
                if a.samples == 0 {
                    return invalid("samples must be positive".into());
                }
                for w in &a.which {
                    if !["3", "4", "5", "7", "all"].contains(&w.as_str()) {
                        return invalid(format!("unknown figure {w:?}"));
                    }
                }
            }
            Command::Selftest(a) => {
                if a.cases == 0 {
                    return invalid("cases must be positive".into());
                }
            }
        }
        Ok(())
    }
}

fn check_k(k: f64) -> Result<(), CliError> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(CliError::ConfigInvalid(format!(
            "k must be positive, got {k}"
        )))
    }
}

fn default_order() -> usize {
    1
}

fn default_theta_grid() -> usize {
    37
}

fn default_nodes() -> usize {
    48
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeArgs {
    /// Medium description (JSON).
    #[arg(long)]
    pub medium: PathBuf,
    #[arg(long)]
    pub k: f64,
    #[arg(long = "theta0-deg", allow_negative_numbers = true)]
    pub theta0_deg: f64,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "default_order")]
    pub order: usize,
    /// Number of outgoing angles, offset to avoid grazing directions.
    #[arg(long = "theta-grid", default_value_t = 37)]
    #[serde(default = "default_theta_grid")]
    pub theta_grid: usize,
    /// CSV destination; stdout when absent. Dirac weights go to <stem>_dirac.csv.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    #[arg(long)]
    pub medium: PathBuf,
    #[arg(long)]
    pub k: f64,
    #[arg(long = "theta0-deg", allow_negative_numbers = true)]
    pub theta0_deg: f64,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "default_order")]
    pub order: usize,
    /// Angular nodes of the operator grid.
    #[arg(long, default_value_t = 48)]
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[arg(long = "theta-grid", default_value_t = 37)]
    #[serde(default = "default_theta_grid")]
    pub theta_grid: usize,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingArgs {
    #[arg(long, default_value = "10.58", value_parser = parse_complex, allow_negative_numbers = true)]
    #[serde(with = "complex_spec")]
    pub z0: Complex64,
    #[arg(long, default_value = "0.07", value_parser = parse_complex, allow_negative_numbers = true)]
    #[serde(with = "complex_spec")]
    pub z1: Complex64,
    /// Grating wavenumber.
    #[arg(long = "K", default_value_t = PI)]
    #[serde(rename = "K")]
    pub k_grating: f64,
    #[arg(long, default_value_t = 0.1)]
    pub ell: f64,
    #[arg(long)]
    #[serde(default)]
    pub k: Option<f64>,
    #[arg(
        long = "theta0-deg",
        allow_negative_numbers = true,
        conflicts_with = "brewster"
    )]
    #[serde(default)]
    pub theta0_deg: Option<f64>,
    /// Incidence at 180 deg + the Brewster angle of the mean permittivity.
    #[arg(long)]
    #[serde(default)]
    pub brewster: bool,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long)]
    #[serde(default)]
    pub figure: Option<u8>,
    /// Abscissa samples for figures 3 and 5.
    #[arg(long, default_value_t = 200)]
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloakArgs {
    /// Slab description (JSON).
    #[arg(long)]
    pub slab: PathBuf,
    /// Layer thickness profiles (JSON), or builtin:gaussian_exp.
    #[arg(long)]
    pub layers: String,
    /// Coating budget for builtin:gaussian_exp, as a multiple of the slab thickness.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value = "-", value_parser = parse_sign, allow_hyphen_values = true)]
    pub sigma: Sign,
    /// Number of uniform y-samples; the decay-class default net when absent.
    #[arg(long = "y-samples")]
    #[serde(default)]
    pub y_samples: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresArgs {
    /// Figures to regenerate: 3, 4, 5, 7 or all.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    pub which: Vec<String>,
    #[arg(long = "out-dir", default_value = "figures")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestArgs {
    /// Random cases per check.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    s.parse::<Complex64>().map_err(|e| format!("{s:?}: {e}"))
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    s.parse::<Sign>().map_err(|e| e.to_string())
}

/// Complex values as a plain real or `[re, im]`, matching the medium files.
mod complex_spec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        ComplexSpec::Pair([z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Ok(ComplexSpec::deserialize(d)?.value())
    }
}

/// Slab files for the `cloak` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabFile {
    pub ell_star: f64,
    pub profile: SlabProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlabProfile {
    /// ε⋆ − 1 = z e^{−κx} e^{−y²/2L²}.
    GaussianExp {
        z: f64,
        kappa: f64,
        #[serde(rename = "L")]
        width: f64,
    },
    /// ε⋆ − 1 = eps e^{−y²/2L²}, uniform across the slab.
    Uniform {
        eps: ComplexSpec,
        #[serde(rename = "L")]
        width: f64,
    },
}

/// Layer files for the `cloak` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerFile {
    /// ℓ₋ = ℓ₊ = amp e^{−y²/2L²}.
    Gaussian {
        amp: f64,
        #[serde(rename = "L")]
        width: f64,
    },
    Constant {
        minus: f64,
        plus: f64,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_defaults_match_module_defaults() {
        let c = RunConfig::parse(
            r#"{"command":{"subcommand":"amplitude","medium":"m.json","k":0.1,"theta0_deg":30}}"#,
        )
        .unwrap();
        assert_eq!(c.settings, Settings::default());
        let Command::Amplitude(a) = c.command else {
            panic!()
        };
        assert_eq!((a.order, a.theta_grid, a.out), (1, 37, None));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"command":{"subcommand":"amplitude","medium":"m","k":-1,"theta0_deg":0}}"#,
            r#"{"command":{"subcommand":"amplitude","medium":"m","k":1,"theta0_deg":0,"order":3}}"#,
            r#"{"command":{"subcommand":"amplitude","medium":"m","k":1,"theta0_deg":0,"extra":1}}"#,
            r#"{"settings":{"f2_tol":0},"command":{"subcommand":"selftest","cases":1}}"#,
            r#"{"command":{"subcommand":"figures","which":["6"],"out_dir":"f","samples":3}}"#,
        ] {
            assert!(
                matches!(RunConfig::parse(text), Err(CliError::ConfigInvalid(_))),
                "{text}"
            );
        }
    }
}

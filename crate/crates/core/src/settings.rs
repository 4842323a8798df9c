use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances and node counts shared by all modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Relative size below which a y-spectrum counts as negligible.
    pub spectral_tol: f64,
    /// Floor for |1 + w_alpha| and |eps_pm|.
    pub delta_floor: f64,
    /// Gauss–Legendre nodes per x̌ panel.
    pub x_nodes: usize,
    /// Truncation threshold for geometric harmonic series.
    pub series_tol: f64,
    /// Minimum |cos θ| accepted as non-grazing.
    pub angle_floor: f64,
    /// Gauss–Legendre nodes for the φ-integral of the second-order amplitude.
    pub phi_nodes: usize,
    /// Relative change allowed when doubling φ-nodes.
    pub f2_tol: f64,
    /// Relative discrepancy allowed between independent routes.
    pub oracle_tol: f64,
    /// Residual tolerance for invisibility conditions, in units of ℓ.
    pub residual_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            spectral_tol: 1e-10,
            delta_floor: 1e-6,
            x_nodes: 32,
            series_tol: 1e-16,
            angle_floor: 1e-6,
            phi_nodes: 64,
            f2_tol: 1e-8,
            oracle_tol: 1e-6,
            residual_tol: 1e-8,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spectral_tol", self.spectral_tol),
            ("delta_floor", self.delta_floor),
            ("series_tol", self.series_tol),
            ("angle_floor", self.angle_floor),
            ("f2_tol", self.f2_tol),
            ("oracle_tol", self.oracle_tol),
            ("residual_tol", self.residual_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.x_nodes == 0 || self.phi_nodes == 0 {
            return Err(Error::InvalidInput("node counts must be positive".into()));
        }
        Ok(())
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// How the kinematic condition at the moving wall is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Coupling {
    /// Normal velocity trace set to the plate velocity after every stage.
    Strong,
    /// Weak enforcement through a `(1/kappa) * mismatch` exchange flux.
    Penalty { kappa: f64 },
    /// Plate/fluid substeps subiterated until the trace mismatch drops
    /// below `tol` (under-relaxed by `relax`), then the step commits.
    Monolithic { tol: f64, max_iter: usize, relax: f64 },
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling::Strong
    }
}

impl Coupling {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Coupling::Penalty { kappa } if kappa <= 0.0 => Err(SimError::Param(format!(
                "penalty weight kappa must be positive, got {kappa}"
            ))),
            Coupling::Monolithic { tol, max_iter, relax } => {
                if tol <= 0.0 || max_iter == 0 || !(0.0 < relax && relax <= 1.0) {
                    Err(SimError::Param(format!(
                        "monolithic coupling needs tol > 0, max_iter > 0, 0 < relax <= 1; got ({tol}, {max_iter}, {relax})"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Physical and approximation constants of the rescaled system.
///
/// `eps` is the Mach number and `nu` the inverse Reynolds number; the
/// pressure gradient is scaled by `1/eps^2` and the viscous stress by `nu`.
/// `delta`/`beta` control the artificial pressure `delta * rho^beta` and
/// `kappa` the kinematic penalty weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Adiabatic exponent of the barotropic pressure law, > 1.
    pub gamma: f64,
    /// Shear viscosity coefficient, > 0.
    pub mu: f64,
    /// Bulk viscosity coefficient; requires `lambda + 2 mu / 3 >= 0`.
    pub lambda: f64,
    /// Inverse Reynolds number scaling the viscous stress, >= 0.
    pub nu: f64,
    /// Mach number scaling the pressure gradient as `1/eps^2`, > 0.
    pub eps: f64,
    /// Plate damping coefficient, >= 0.
    pub nu_s: f64,
    /// Friction coefficient on the moving (top) wall, >= 0.
    pub alpha: f64,
    /// Friction coefficient on the rigid bottom wall, >= 0.
    pub alpha0: f64,
    /// Artificial-pressure weight, >= 0.
    pub delta: f64,
    /// Artificial-pressure exponent; >= 4 whenever `delta > 0`.
    pub beta: f64,
    /// Reference density, > 0.
    pub rho_bar: f64,
    /// Spatial dimension; 2 is the supported desk-scale configuration.
    pub dim: usize,
    /// Gap below which the run aborts with a degeneracy report.
    pub contact_floor: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gamma: 2.0,
            mu: 1.0,
            lambda: 0.0,
            nu: 0.05,
            eps: 0.1,
            nu_s: 0.1,
            alpha: 0.0,
            alpha0: 0.0,
            delta: 0.0,
            beta: 4.0,
            rho_bar: 1.0,
            dim: 2,
            contact_floor: 0.05,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::Param(msg));
        if !(self.gamma > 1.0) {
            return fail(format!("gamma must be > 1, got {}", self.gamma));
        }
        if !(self.mu > 0.0) {
            return fail(format!("mu must be > 0, got {}", self.mu));
        }
        if self.lambda + 2.0 * self.mu / 3.0 < 0.0 {
            return fail(format!(
                "viscosity condition lambda + 2 mu / 3 >= 0 violated: {} + {}",
                self.lambda,
                2.0 * self.mu / 3.0
            ));
        }
        if !(self.eps > 0.0) {
            return fail(format!("eps must be > 0, got {}", self.eps));
        }
        if self.nu < 0.0 || self.nu_s < 0.0 || self.alpha < 0.0 || self.alpha0 < 0.0 {
            return fail("nu, nu_s, alpha, alpha0 must all be >= 0".into());
        }
        if self.delta < 0.0 {
            return fail(format!("delta must be >= 0, got {}", self.delta));
        }
        if self.delta > 0.0 && self.beta < 4.0 {
            return fail(format!("beta must be >= 4 when delta > 0, got {}", self.beta));
        }
        if !(self.rho_bar > 0.0) {
            return fail(format!("rho_bar must be > 0, got {}", self.rho_bar));
        }
        if self.dim != 2 && self.dim != 3 {
            return fail(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if !(self.contact_floor > 0.0 && self.contact_floor < 1.0) {
            return fail(format!("contact_floor must lie in (0, 1), got {}", self.contact_floor));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Params::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_gamma() {
        let p = Params { gamma: 1.0, ..Params::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_viscosity_condition_violation() {
        let p = Params { lambda: -1.0, mu: 1.0, ..Params::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn accepts_negative_lambda_within_condition() {
        let p = Params { lambda: -0.5, mu: 1.0, ..Params::default() };
        p.validate().unwrap();
    }

    #[test]
    fn rejects_small_beta_only_with_artificial_pressure() {
        let p = Params { delta: 0.0, beta: 2.0, ..Params::default() };
        p.validate().unwrap();
        let p = Params { delta: 1e-3, beta: 2.0, ..Params::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn coupling_validation() {
        Coupling::Strong.validate().unwrap();
        Coupling::Penalty { kappa: 1e-3 }.validate().unwrap();
        assert!(Coupling::Penalty { kappa: 0.0 }.validate().is_err());
        assert!(Coupling::Monolithic { tol: 1e-10, max_iter: 0, relax: 0.7 }
            .validate()
            .is_err());
    }
}

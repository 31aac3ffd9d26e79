//! Named initial-condition profiles and the well-prepared construction:
//! density is a Mach-scaled perturbation of the reference value while the
//! velocity and plate data are Mach-independent, with the velocity corrected
//! to satisfy the kinematic condition at the top wall and impermeability at
//! the bottom.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::params::Params;
use crate::state::State;
use crate::stencil::ddx_periodic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum DensityProfile {
    Zero,
    /// Localized positive bump `a ((1 + cos(x - pi))/2) sin(pi z)`.
    Bump { amplitude: f64 },
    /// `a cos(m x)`, vertically uniform.
    CosX { amplitude: f64, mode: u32 },
}

impl DensityProfile {
    fn eval(&self, x: f64, z: f64) -> f64 {
        match *self {
            DensityProfile::Zero => 0.0,
            DensityProfile::Bump { amplitude } => {
                amplitude * 0.5 * (1.0 + (x - PI).cos()) * (PI * z).sin()
            }
            DensityProfile::CosX { amplitude, mode } => amplitude * (mode as f64 * x).cos(),
        }
    }

    fn sup(&self) -> f64 {
        match *self {
            DensityProfile::Zero => 0.0,
            DensityProfile::Bump { amplitude } | DensityProfile::CosX { amplitude, .. } => {
                amplitude.abs()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum VelocityProfile {
    Zero,
    /// Solenoidal cell: stream function `a sin(x) sin(pi z)`, tangential at
    /// both walls.
    Vortex { amplitude: f64 },
    /// Horizontal shear `a sin(pi z) cos(x)` with zero vertical component.
    Shear { amplitude: f64 },
}

impl VelocityProfile {
    fn eval(&self, x: f64, z: f64) -> [f64; 2] {
        match *self {
            VelocityProfile::Zero => [0.0, 0.0],
            VelocityProfile::Vortex { amplitude } => [
                amplitude * PI * x.sin() * (PI * z).cos(),
                -amplitude * x.cos() * (PI * z).sin(),
            ],
            VelocityProfile::Shear { amplitude } => [amplitude * (PI * z).sin() * x.cos(), 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum PlateProfile {
    Zero,
    Cos { amplitude: f64, mode: u32 },
    Sin { amplitude: f64, mode: u32 },
}

impl PlateProfile {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            PlateProfile::Zero => 0.0,
            PlateProfile::Cos { amplitude, mode } => amplitude * (mode as f64 * x).cos(),
            PlateProfile::Sin { amplitude, mode } => amplitude * (mode as f64 * x).sin(),
        }
    }
}

/// Initial-condition specification: base perturbation profiles plus the
/// admissible perturbation bound `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub rho1: DensityProfile,
    pub velocity: VelocityProfile,
    pub w0: PlateProfile,
    pub w1: PlateProfile,
    pub d_bound: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            rho1: DensityProfile::Zero,
            velocity: VelocityProfile::Zero,
            w0: PlateProfile::Zero,
            w1: PlateProfile::Zero,
            d_bound: 1.0,
        }
    }
}

/// Builds the well-prepared initial state: `rho_0 = rho_bar + eps rho_1`
/// with `sup |rho_1| <= D`, Mach-independent `u_0, w_0, w_1`, and the
/// velocity corrected so the kinematic condition holds against `w_1` at the
/// top wall and the bottom wall is impermeable.
pub fn well_prepared_ic(spec: &InitialSpec, grid: &Arc<Grid>, params: &Params) -> Result<State> {
    if spec.rho1.sup() > spec.d_bound + 1e-12 {
        return Err(SimError::Param(format!(
            "density perturbation amplitude {} exceeds the declared bound D = {}",
            spec.rho1.sup(),
            spec.d_bound
        )));
    }
    let eps = params.eps;
    let rho_hat = ScalarField::from_fn(grid, |x, z| params.rho_bar + eps * spec.rho1.eval(x, z));
    let mut u_hat = VectorField::from_fn(grid, |x, z| spec.velocity.eval(x, z));
    let w: Vec<f64> = (0..grid.nx).map(|i| spec.w0.eval(grid.x(i))).collect();
    let w_t: Vec<f64> = (0..grid.nx).map(|i| spec.w1.eval(grid.x(i))).collect();

    // Kinematic correction: a vertically linear vertical-velocity shift that
    // vanishes at the bottom and closes the top mismatch against w_1.
    let w_x = ddx_periodic(&w, grid.hx());
    let jtop = grid.nz - 1;
    let mismatch: Vec<f64> = (0..grid.nx)
        .map(|i| {
            let ut = u_hat.at(i, jtop);
            w_t[i] - (-w_x[i] * ut[0] + ut[1])
        })
        .collect();
    for j in 0..grid.nz {
        let zhat = grid.z(j);
        for i in 0..grid.nx {
            u_hat.at_mut(i, j)[1] += zhat * mismatch[i];
        }
    }
    for i in 0..grid.nx {
        u_hat.at_mut(i, 0)[1] = 0.0;
    }

    let state = State { t: 0.0, rho_hat, u_hat, w, w_t };
    state.validate(params.contact_floor)?;
    Ok(state)
}

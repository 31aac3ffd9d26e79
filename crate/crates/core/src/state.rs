use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::grid::{Grid, ScalarField, VectorField};

/// Full unknowns at one instant: fluid pair pulled back to the reference
/// slab plus the plate pair on the horizontal torus.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// Density pulled back to the reference grid, positive everywhere.
    pub rho_hat: ScalarField,
    /// Velocity pulled back to the reference grid.
    pub u_hat: VectorField,
    /// Plate displacement samples on the torus (one per horizontal node).
    pub w: Vec<f64>,
    /// Plate velocity samples.
    pub w_t: Vec<f64>,
}

impl State {
    /// Quiescent state at the reference density.
    pub fn rest(grid: &Arc<Grid>, rho_bar: f64) -> State {
        State {
            t: 0.0,
            rho_hat: ScalarField::constant(grid, rho_bar),
            u_hat: VectorField::zeros(grid),
            w: vec![0.0; grid.nx],
            w_t: vec![0.0; grid.nx],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho_hat.grid()
    }

    /// Structural and physical admissibility: shared grid, finite samples,
    /// positive density, gap above the contact floor.
    pub fn validate(&self, contact_floor: f64) -> Result<()> {
        self.rho_hat.same_grid(&self.u_hat.component(0))?;
        let nx = self.grid().nx;
        if self.w.len() != nx || self.w_t.len() != nx {
            return Err(SimError::GridMismatch(format!(
                "plate sample count {} vs grid nx {}",
                self.w.len(),
                nx
            )));
        }
        if !self.rho_hat.all_finite()
            || !self.u_hat.all_finite()
            || !self.w.iter().all(|v| v.is_finite())
            || !self.w_t.iter().all(|v| v.is_finite())
        {
            return Err(SimError::BlowUp { t: self.t });
        }
        let min_rho = self.rho_hat.min();
        if min_rho <= 0.0 {
            return Err(SimError::Positivity { t: self.t, min_rho });
        }
        let min_gap = self.min_gap();
        if min_gap <= contact_floor {
            return Err(SimError::Degeneracy { t: self.t, min_gap });
        }
        Ok(())
    }

    /// Smallest `1 + w` over the torus.
    pub fn min_gap(&self) -> f64 {
        self.w.iter().fold(f64::INFINITY, |m, &v| m.min(1.0 + v))
    }

    /// Max-norm distance between two states over all unknowns.
    pub fn distance_inf(&self, other: &State) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.rho_hat.data().iter().zip(other.rho_hat.data()) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.u_hat.data().iter().zip(other.u_hat.data()) {
            d = d.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        for (a, b) in self.w.iter().zip(&other.w) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.w_t.iter().zip(&other.w_t) {
            d = d.max((a - b).abs());
        }
        d
    }
}

//! Flow maps between the reference slab and the deformed domain, deformed
//! normals, composed maps between two deformed domains, and the Piola
//! transform with its identities.

mod compose;
mod cutoff;
mod piola;
mod surface;

pub use compose::{compose_psi, ComposedMap};
pub use cutoff::{build_cutoff, CutoffProfile};
pub use piola::{
    divergence_physical, gradient_physical, piola_apply, piola_identity_residual, piola_transform,
    scalar_gradient_physical,
};
pub use surface::{general_flow_map, general_flow_map_inverse, Sphere, SurfacePack, SurfacePoint, TorusOfRevolution};

use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::grid::Grid;
use crate::la::{Mat2, Vec2};
use crate::stencil::ddx_periodic;

/// Flow map of the flat geometry: the boundary restriction moves the top
/// wall to height `1 + w(x)` and the interior extension stretches the slab
/// linearly in the vertical, so `J_w = 1 + w` is independent of `z` and the
/// inverse is exact.
///
/// Horizontal slopes are central differences of the stored samples; every
/// derived quantity (gradient, Jacobian, normals) uses those same slopes, so
/// the map identities hold at the stencil's order and exactly for constant
/// displacements.
#[derive(Debug, Clone)]
pub struct FlatMap {
    grid: Arc<Grid>,
    w: Vec<f64>,
    w_x: Vec<f64>,
    w_t: Vec<f64>,
    w_tx: Vec<f64>,
}

impl FlatMap {
    pub fn build(grid: &Arc<Grid>, w: &[f64], w_t: &[f64], contact_floor: f64) -> Result<FlatMap> {
        if w.len() != grid.nx || w_t.len() != grid.nx {
            return Err(SimError::GridMismatch(format!(
                "plate samples {} vs grid nx {}",
                w.len(),
                grid.nx
            )));
        }
        let min_gap = w.iter().fold(f64::INFINITY, |m, &v| m.min(1.0 + v));
        if min_gap <= contact_floor {
            return Err(SimError::Degeneracy { t: f64::NAN, min_gap });
        }
        let hx = grid.hx();
        Ok(FlatMap {
            grid: Arc::clone(grid),
            w: w.to_vec(),
            w_x: ddx_periodic(w, hx),
            w_t: w_t.to_vec(),
            w_tx: ddx_periodic(w_t, hx),
        })
    }

    pub fn identity(grid: &Arc<Grid>) -> FlatMap {
        FlatMap {
            grid: Arc::clone(grid),
            w: vec![0.0; grid.nx],
            w_x: vec![0.0; grid.nx],
            w_t: vec![0.0; grid.nx],
            w_tx: vec![0.0; grid.nx],
        }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn displacement(&self, i: usize) -> f64 {
        self.w[i]
    }

    #[inline]
    pub fn slope(&self, i: usize) -> f64 {
        self.w_x[i]
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> f64 {
        self.w_t[i]
    }

    #[inline]
    pub fn velocity_slope(&self, i: usize) -> f64 {
        self.w_tx[i]
    }

    /// `J_w = 1 + w`, independent of the vertical coordinate.
    #[inline]
    pub fn jacobian(&self, i: usize) -> f64 {
        1.0 + self.w[i]
    }

    /// Image of the reference node `(i, j)`.
    #[inline]
    pub fn forward_idx(&self, i: usize, j: usize) -> Vec2 {
        [self.grid.x(i), self.grid.z(j) * self.jacobian(i)]
    }

    /// `grad Phi_w` at node `(i, j)`; lower triangular.
    #[inline]
    pub fn gradient_idx(&self, i: usize, j: usize) -> Mat2 {
        let zhat = self.grid.z(j);
        [[1.0, 0.0], [zhat * self.w_x[i], self.jacobian(i)]]
    }

    /// `A_w = (grad Phi_w)^{-1}` at node `(i, j)`.
    #[inline]
    pub fn inv_gradient_idx(&self, i: usize, j: usize) -> Mat2 {
        let jw = self.jacobian(i);
        let zhat = self.grid.z(j);
        [[1.0, 0.0], [-zhat * self.w_x[i] / jw, 1.0 / jw]]
    }

    /// `J_w A_w` at node `(i, j)`; its second row at the top wall is the
    /// pulled-back weighted normal.
    #[inline]
    pub fn jac_times_inv_idx(&self, i: usize, j: usize) -> Mat2 {
        let zhat = self.grid.z(j);
        [[self.jacobian(i), 0.0], [-zhat * self.w_x[i], 1.0]]
    }

    /// Mesh velocity `d/dt Phi_w` at node `(i, j)`.
    #[inline]
    pub fn mesh_velocity_idx(&self, i: usize, j: usize) -> Vec2 {
        [0.0, self.grid.z(j) * self.w_t[i]]
    }

    /// Weighted deformed normal pulled back to the torus: `(-w'(x), 1)`.
    #[inline]
    pub fn normal_weighted_idx(&self, i: usize) -> Vec2 {
        [-self.w_x[i], 1.0]
    }

    /// Area Jacobian `sqrt(1 + |w'|^2)` of the moving wall.
    #[inline]
    pub fn area_jacobian_idx(&self, i: usize) -> f64 {
        (1.0 + self.w_x[i] * self.w_x[i]).sqrt()
    }

    /// Periodic linear interpolation of the displacement and slope.
    fn interp_w(&self, xhat: f64) -> (f64, f64) {
        let nx = self.grid.nx;
        let hx = self.grid.hx();
        let s = (xhat / hx).rem_euclid(nx as f64);
        let i0 = (s.floor() as usize) % nx;
        let i1 = (i0 + 1) % nx;
        let f = s - s.floor();
        (
            self.w[i0] * (1.0 - f) + self.w[i1] * f,
            self.w_x[i0] * (1.0 - f) + self.w_x[i1] * f,
        )
    }

    /// Map an arbitrary reference point.
    pub fn forward(&self, xhat: f64, zhat: f64) -> Vec2 {
        let (w, _) = self.interp_w(xhat);
        [xhat, zhat * (1.0 + w)]
    }

    /// Exact inverse of the vertical stretch.
    pub fn inverse(&self, x: f64, z: f64) -> Vec2 {
        let (w, _) = self.interp_w(x);
        [x, z / (1.0 + w)]
    }

    /// `grad Phi_w` at an arbitrary reference point.
    pub fn gradient(&self, xhat: f64, zhat: f64) -> Mat2 {
        let (w, wx) = self.interp_w(xhat);
        [[1.0, 0.0], [zhat * wx, 1.0 + w]]
    }
}

/// Bundled evaluation of the flat flow map at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct FlatMapEval {
    pub point: Vec2,
    pub gradient: Mat2,
    pub jacobian: f64,
    pub mesh_velocity: Vec2,
}

/// One-call form of the flat flow map for a single point.
pub fn flat_flow_map(map: &FlatMap, i: usize, j: usize) -> FlatMapEval {
    FlatMapEval {
        point: map.forward_idx(i, j),
        gradient: map.gradient_idx(i, j),
        jacobian: map.jacobian(i),
        mesh_velocity: map.mesh_velocity_idx(i, j),
    }
}

/// Deformed weighted normal `(-w'(x), 1)` from plate samples at node `i`.
pub fn deformed_normal_flat(map: &FlatMap, i: usize) -> Vec2 {
    map.normal_weighted_idx(i)
}

/// Area Jacobian `sqrt(1 + |w'|^2)` at node `i`.
pub fn area_jacobian(map: &FlatMap, i: usize) -> f64 {
    map.area_jacobian_idx(i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::{dot2, hadamard_bound_holds, matvec2};
    use proptest::prelude::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::standard(32, 9).unwrap())
    }

    #[test]
    fn identity_for_zero_displacement() {
        let g = grid();
        let m = FlatMap::identity(&g);
        for j in 0..g.nz {
            for i in 0..g.nx {
                let p = m.forward_idx(i, j);
                assert_eq!(p, [g.x(i), g.z(j)]);
                assert_eq!(m.jacobian(i), 1.0);
            }
        }
    }

    #[test]
    fn constant_displacement_moves_top_wall() {
        let g = grid();
        let w = vec![0.2; g.nx];
        let m = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
        let p = m.forward_idx(0, g.nz - 1);
        assert!((p[1] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn sine_displacement_arithmetic() {
        let g = grid();
        let w: Vec<f64> = (0..g.nx).map(|i| 0.1 * g.x(i).sin()).collect();
        let m = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
        // At x = 0 the displacement is 0.1 sin(0) = 0, so J_w = 1.1 requires
        // sampling where sin is 1; use the quarter-period node.
        let iq = g.nx / 4;
        assert!((m.jacobian(iq) - 1.1).abs() < 1e-12);
        let p = m.forward(g.x(0), 0.5);
        assert!((p[0] - 0.0).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn contact_detection() {
        let g = grid();
        let w = vec![-0.96; g.nx];
        assert!(matches!(
            FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05),
            Err(SimError::Degeneracy { .. })
        ));
    }

    #[test]
    fn normal_dot_reference_direction_is_one() {
        let g = grid();
        let w: Vec<f64> = (0..g.nx).map(|i| 0.25 * (2.0 * g.x(i)).cos()).collect();
        let m = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
        for i in 0..g.nx {
            let n = deformed_normal_flat(&m, i);
            assert_eq!(dot2([0.0, 1.0], n), 1.0);
        }
    }

    #[test]
    fn area_jacobian_arithmetic() {
        let g = grid();
        let m = FlatMap::identity(&g);
        assert_eq!(area_jacobian(&m, 0), 1.0);
        // Slope 0.1 gives sqrt(1.01).
        let mut m2 = m.clone();
        m2.w_x[0] = 0.1;
        assert!((area_jacobian(&m2, 0) - 1.01f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inverse_composition_on_grid() {
        let g = grid();
        let w: Vec<f64> = (0..g.nx).map(|i| 0.2 * g.x(i).sin() + 0.05 * (3.0 * g.x(i)).cos()).collect();
        let m = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let p = m.forward_idx(i, j);
                let back = m.inverse(p[0], p[1]);
                worst = worst.max((back[0] - g.x(i)).abs()).max((back[1] - g.z(j)).abs());
            }
        }
        assert!(worst < 1e-10, "inverse composition defect {worst}");
    }

    proptest! {
        #[test]
        fn hadamard_bound_at_samples(a in -0.3f64..0.3, m in 1usize..4) {
            let g = grid();
            let w: Vec<f64> = (0..g.nx).map(|i| a * (m as f64 * g.x(i)).sin()).collect();
            let map = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
            for j in 0..g.nz {
                for i in 0..g.nx {
                    prop_assert!(hadamard_bound_holds(map.gradient_idx(i, j)));
                }
            }
        }

        #[test]
        fn gradient_consistent_with_map(a in -0.25f64..0.25) {
            let g = grid();
            let w: Vec<f64> = (0..g.nx).map(|i| a * g.x(i).cos()).collect();
            let map = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
            // J from the stored Jacobian equals det of the gradient.
            for j in 0..g.nz {
                for i in 0..g.nx {
                    let grad = map.gradient_idx(i, j);
                    prop_assert!((crate::la::det2(grad) - map.jacobian(i)).abs() < 1e-14);
                    let a_w = map.inv_gradient_idx(i, j);
                    let prod = matvec2(crate::la::matmul2(grad, a_w), [1.0, 1.0]);
                    prop_assert!((prod[0] - 1.0).abs() < 1e-13 && (prod[1] - 1.0).abs() < 1e-13);
                }
            }
        }
    }
}

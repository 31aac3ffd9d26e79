use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::grid::Grid;
use crate::la::{Mat2, Vec2};
use crate::stencil::ddx_periodic;

/// Composition `Psi = Phi_eta o Phi_w^{-1}` between two deformed slabs.
///
/// For the flat vertical-stretch maps this is `Psi(x, z) = (x, z s(x))` with
/// `s = (1 + eta)/(1 + w)`, so `J = s` and everything is algebraic in the
/// displacement samples and their central-difference slopes. Quantities are
/// exposed pulled back to the reference grid of the source displacement.
#[derive(Debug, Clone)]
pub struct ComposedMap {
    grid: Arc<Grid>,
    w: Vec<f64>,
    s: Vec<f64>,
    s_x: Vec<f64>,
    s_xx: Vec<f64>,
    s_t: Vec<f64>,
    s_tx: Vec<f64>,
}

/// Builds the composed map from source displacement `w` to target `eta`.
pub fn compose_psi(
    grid: &Arc<Grid>,
    w: &[f64],
    w_t: &[f64],
    eta: &[f64],
    eta_t: &[f64],
    contact_floor: f64,
) -> Result<ComposedMap> {
    ComposedMap::build(grid, w, w_t, eta, eta_t, contact_floor)
}

impl ComposedMap {
    pub fn build(
        grid: &Arc<Grid>,
        w: &[f64],
        w_t: &[f64],
        eta: &[f64],
        eta_t: &[f64],
        contact_floor: f64,
    ) -> Result<ComposedMap> {
        let nx = grid.nx;
        if w.len() != nx || eta.len() != nx || w_t.len() != nx || eta_t.len() != nx {
            return Err(SimError::GridMismatch("displacement sample counts differ from grid".into()));
        }
        for (&a, &b) in w.iter().zip(eta) {
            if 1.0 + a <= contact_floor || 1.0 + b <= contact_floor {
                return Err(SimError::Degeneracy {
                    t: f64::NAN,
                    min_gap: (1.0 + a).min(1.0 + b),
                });
            }
        }
        let hx = grid.hx();
        let w_x = ddx_periodic(w, hx);
        let w_tx = ddx_periodic(w_t, hx);
        let eta_x = ddx_periodic(eta, hx);
        let eta_tx = ddx_periodic(eta_t, hx);

        let mut s = Vec::with_capacity(nx);
        let mut s_x = Vec::with_capacity(nx);
        let mut s_t = Vec::with_capacity(nx);
        let mut s_tx = Vec::with_capacity(nx);
        for i in 0..nx {
            let aw = 1.0 + w[i];
            let ae = 1.0 + eta[i];
            s.push(ae / aw);
            let num = eta_x[i] * aw - ae * w_x[i];
            s_x.push(num / (aw * aw));
            s_t.push((eta_t[i] * aw - ae * w_t[i]) / (aw * aw));
            let num_t = eta_tx[i] * aw + eta_x[i] * w_t[i]
                - eta_t[i] * w_x[i]
                - ae * w_tx[i];
            s_tx.push(num_t / (aw * aw) - 2.0 * w_t[i] * num / (aw * aw * aw));
        }
        let s_xx = ddx_periodic(&s_x, hx);
        Ok(ComposedMap { grid: Arc::clone(grid), w: w.to_vec(), s, s_x, s_xx, s_t, s_tx })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Physical height of the reference node `(i, j)` in the source domain.
    #[inline]
    fn z_w(&self, i: usize, j: usize) -> f64 {
        self.grid.z(j) * (1.0 + self.w[i])
    }

    /// `J = det grad Psi`, independent of the vertical coordinate.
    #[inline]
    pub fn jacobian(&self, i: usize) -> f64 {
        self.s[i]
    }

    /// `grad Psi` pulled back to the reference node `(i, j)`.
    #[inline]
    pub fn grad_psi_idx(&self, i: usize, j: usize) -> Mat2 {
        [[1.0, 0.0], [self.z_w(i, j) * self.s_x[i], self.s[i]]]
    }

    /// `A = (grad Psi)^{-1}` at node `(i, j)`.
    #[inline]
    pub fn inv_grad_idx(&self, i: usize, j: usize) -> Mat2 {
        let s = self.s[i];
        [[1.0, 0.0], [-self.z_w(i, j) * self.s_x[i] / s, 1.0 / s]]
    }

    /// `J A` at node `(i, j)`.
    #[inline]
    pub fn jac_times_inv_idx(&self, i: usize, j: usize) -> Mat2 {
        [[self.s[i], 0.0], [-self.z_w(i, j) * self.s_x[i], 1.0]]
    }

    /// `d/dt Psi` at the fixed physical source point of node `(i, j)`.
    #[inline]
    pub fn dt_psi_idx(&self, i: usize, j: usize) -> Vec2 {
        [0.0, self.z_w(i, j) * self.s_t[i]]
    }

    /// `d/dt (J A)` at the fixed physical source point of node `(i, j)`.
    #[inline]
    pub fn dt_jac_inv_idx(&self, i: usize, j: usize) -> Mat2 {
        [[self.s_t[i], 0.0], [-self.z_w(i, j) * self.s_tx[i], 0.0]]
    }

    /// Physical-space gradient of the `J A` entries at node `(i, j)`:
    /// `out[k]` is the derivative with respect to source coordinate `k`.
    pub fn grad_jac_inv_idx(&self, i: usize, j: usize) -> [Mat2; 2] {
        let zw = self.z_w(i, j);
        let dx = [[self.s_x[i], 0.0], [-zw * self.s_xx[i], 0.0]];
        let dz = [[0.0, 0.0], [-self.s_x[i], 0.0]];
        [dx, dz]
    }

    /// Time derivatives of the stretch factor at node `i`:
    /// `(dt s, dt s_x, s_x)`, for callers assembling reference-frame
    /// derivatives of the pulled-back map entries.
    #[inline]
    pub fn dt_entries(&self, i: usize) -> (f64, f64, f64) {
        (self.s_t[i], self.s_tx[i], self.s_x[i])
    }

    /// Evaluate `Psi` at an arbitrary physical source point.
    pub fn psi(&self, x: f64, z_w: f64) -> Vec2 {
        let nx = self.grid.nx;
        let hx = self.grid.hx();
        let t = (x / hx).rem_euclid(nx as f64);
        let i0 = (t.floor() as usize) % nx;
        let i1 = (i0 + 1) % nx;
        let f = t - t.floor();
        let s = self.s[i0] * (1.0 - f) + self.s[i1] * f;
        [x, z_w * s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FlatMap;
    use crate::la::{inv2, matmul2};

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::standard(32, 9).unwrap())
    }

    fn trig(grid: &Grid, a: f64, m: f64, phase: f64) -> Vec<f64> {
        (0..grid.nx).map(|i| a * (m * grid.x(i) + phase).cos()).collect()
    }

    #[test]
    fn equal_displacements_give_identity() {
        let g = grid();
        let w = trig(&g, 0.2, 2.0, 0.3);
        let zero = vec![0.0; g.nx];
        let m = compose_psi(&g, &w, &zero, &w, &zero, 0.05).unwrap();
        for j in 0..g.nz {
            for i in 0..g.nx {
                assert_eq!(m.jacobian(i), 1.0);
                let a = m.inv_grad_idx(i, j);
                assert_eq!(a, [[1.0, 0.0], [-0.0, 1.0]]);
            }
        }
    }

    #[test]
    fn constant_stretch() {
        let g = grid();
        let zero = vec![0.0; g.nx];
        let eta = vec![0.1; g.nx];
        let m = compose_psi(&g, &zero, &zero, &eta, &zero, 0.05).unwrap();
        for i in 0..g.nx {
            assert!((m.jacobian(i) - 1.1).abs() < 1e-15);
        }
        let p = m.psi(1.0, 0.5);
        assert!((p[1] - 0.55).abs() < 1e-14);
    }

    #[test]
    fn chain_rule_consistency() {
        let g = grid();
        let zero = vec![0.0; g.nx];
        let w = trig(&g, 0.15, 1.0, 0.0);
        let eta = trig(&g, 0.1, 2.0, 0.7);
        let m = compose_psi(&g, &w, &zero, &eta, &zero, 0.05).unwrap();
        let fw = FlatMap::build(&g, &w, &zero, 0.05).unwrap();
        let fe = FlatMap::build(&g, &eta, &zero, 0.05).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let composed = m.grad_psi_idx(i, j);
                let product = matmul2(fe.gradient_idx(i, j), inv2(fw.gradient_idx(i, j)));
                for r in 0..2 {
                    for c in 0..2 {
                        worst = worst.max((composed[r][c] - product[r][c]).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-12, "chain rule defect {worst}");
    }

    #[test]
    fn psi_composed_with_source_map_matches_target_map() {
        let g = grid();
        let zero = vec![0.0; g.nx];
        let w = trig(&g, 0.2, 1.0, 0.4);
        let eta = trig(&g, 0.12, 3.0, 1.1);
        let m = compose_psi(&g, &w, &zero, &eta, &zero, 0.05).unwrap();
        let fw = FlatMap::build(&g, &w, &zero, 0.05).unwrap();
        let fe = FlatMap::build(&g, &eta, &zero, 0.05).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let through = m.psi(fw.forward_idx(i, j)[0], fw.forward_idx(i, j)[1]);
                let direct = fe.forward_idx(i, j);
                worst = worst.max((through[0] - direct[0]).abs()).max((through[1] - direct[1]).abs());
            }
        }
        assert!(worst < 1e-8, "composition defect {worst}");
    }

    #[test]
    fn degenerate_target_rejected() {
        let g = grid();
        let zero = vec![0.0; g.nx];
        let eta = vec![-0.96; g.nx];
        assert!(compose_psi(&g, &zero, &zero, &eta, &zero, 0.05).is_err());
    }
}

use crate::error::Result;
use crate::grid::{ScalarField, TensorField, VectorField};
use crate::la::{matvec2, Mat2};
use crate::stencil::{ddx, ddz};

use super::{ComposedMap, FlatMap};

/// Piola transform of a target-domain field onto the source domain:
/// `v = J A (v_tilde o Psi)`.
///
/// Fields are carried as pullbacks on the shared reference grid, where the
/// composition with `Psi` is the identity in reference coordinates, so the
/// transform is pointwise.
pub fn piola_transform(v_tilde: &VectorField, map: &ComposedMap) -> Result<VectorField> {
    let g = map.grid().clone();
    v_tilde.component(0).same_grid(&ScalarField::zeros(&g))?;
    let mut out = VectorField::zeros(&g);
    for j in 0..g.nz {
        for i in 0..g.nx {
            let ja = map.jac_times_inv_idx(i, j);
            *out.at_mut(i, j) = matvec2(ja, v_tilde.at(i, j));
        }
    }
    Ok(out)
}

/// Pointwise Piola kernel, for maps given in closed form.
#[inline]
pub fn piola_apply(jac: f64, inv_grad: Mat2, v: [f64; 2]) -> [f64; 2] {
    let ja = [
        [jac * inv_grad[0][0], jac * inv_grad[0][1]],
        [jac * inv_grad[1][0], jac * inv_grad[1][1]],
    ];
    matvec2(ja, v)
}

/// Max-norm of the discrete row divergence of `J A^T` in source physical
/// coordinates. Analytically zero; discretely `O(h^2)` for smooth maps and
/// exactly zero for constant displacements.
pub fn piola_identity_residual(map: &ComposedMap, source: &FlatMap) -> f64 {
    let g = map.grid().clone();
    // Entry fields of M = J A^T.
    let mut entries = [
        ScalarField::zeros(&g),
        ScalarField::zeros(&g),
        ScalarField::zeros(&g),
        ScalarField::zeros(&g),
    ];
    for j in 0..g.nz {
        for i in 0..g.nx {
            let ja = map.jac_times_inv_idx(i, j);
            // M[r][c] = (J A)[c][r]
            *entries[0].at_mut(i, j) = ja[0][0];
            *entries[1].at_mut(i, j) = ja[1][0];
            *entries[2].at_mut(i, j) = ja[0][1];
            *entries[3].at_mut(i, j) = ja[1][1];
        }
    }
    let d = [
        [ddx(&entries[0]), ddz(&entries[0])],
        [ddx(&entries[1]), ddz(&entries[1])],
        [ddx(&entries[2]), ddz(&entries[2])],
        [ddx(&entries[3]), ddz(&entries[3])],
    ];
    let mut worst: f64 = 0.0;
    for j in 0..g.nz {
        for i in 0..g.nx {
            let a_w = source.inv_gradient_idx(i, j);
            for r in 0..2 {
                // residual_r = sum_c d/dx_c M[r][c], chain rule through Phi_w
                let mut res = 0.0;
                for c in 0..2 {
                    let e = 2 * r + c;
                    res += a_w[0][c] * d[e][0].at(i, j) + a_w[1][c] * d[e][1].at(i, j);
                }
                worst = worst.max(res.abs());
            }
        }
    }
    worst
}

/// Physical-coordinate divergence of a pulled-back vector field.
pub fn divergence_physical(v: &VectorField, map: &FlatMap) -> ScalarField {
    let g = map.grid().clone();
    let v0 = v.component(0);
    let v1 = v.component(1);
    let d = [[ddx(&v0), ddz(&v0)], [ddx(&v1), ddz(&v1)]];
    let mut out = ScalarField::zeros(&g);
    for j in 0..g.nz {
        for i in 0..g.nx {
            let a_w = map.inv_gradient_idx(i, j);
            let mut s = 0.0;
            for k in 0..2 {
                s += a_w[0][k] * d[k][0].at(i, j) + a_w[1][k] * d[k][1].at(i, j);
            }
            *out.at_mut(i, j) = s;
        }
    }
    out
}

/// Physical-coordinate velocity gradient `(grad v)_{ik} = dv_i/dx_k` of a
/// pulled-back vector field.
pub fn gradient_physical(v: &VectorField, map: &FlatMap) -> TensorField {
    let g = map.grid().clone();
    let v0 = v.component(0);
    let v1 = v.component(1);
    let d = [[ddx(&v0), ddz(&v0)], [ddx(&v1), ddz(&v1)]];
    let mut out = TensorField::zeros(&g);
    for j in 0..g.nz {
        for i in 0..g.nx {
            let a_w = map.inv_gradient_idx(i, j);
            let m = out.at_mut(i, j);
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] = a_w[0][c] * d[r][0].at(i, j) + a_w[1][c] * d[r][1].at(i, j);
                }
            }
        }
    }
    out
}

/// Physical-coordinate gradient of a pulled-back scalar field.
pub fn scalar_gradient_physical(f: &ScalarField, map: &FlatMap) -> VectorField {
    let g = map.grid().clone();
    let dx = ddx(f);
    let dz = ddz(f);
    let mut out = VectorField::zeros(&g);
    for j in 0..g.nz {
        for i in 0..g.nx {
            let a_w = map.inv_gradient_idx(i, j);
            *out.at_mut(i, j) = [
                a_w[0][0] * dx.at(i, j) + a_w[1][0] * dz.at(i, j),
                a_w[0][1] * dx.at(i, j) + a_w[1][1] * dz.at(i, j),
            ];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compose::compose_psi;
    use crate::grid::Grid;
    use crate::la::IDENTITY;
    use std::sync::Arc;

    fn grid(nx: usize, nz: usize) -> Arc<Grid> {
        Arc::new(Grid::standard(nx, nz).unwrap())
    }

    fn trig(grid: &Grid, terms: &[(f64, f64, f64)]) -> Vec<f64> {
        (0..grid.nx)
            .map(|i| {
                terms
                    .iter()
                    .map(|&(a, m, p)| a * (m * grid.x(i) + p).cos())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn identity_map_is_identity_on_fields() {
        let g = grid(24, 9);
        let zero = vec![0.0; g.nx];
        let w = trig(&g, &[(0.2, 1.0, 0.1)]);
        let m = compose_psi(&g, &w, &zero, &w, &zero, 0.05).unwrap();
        let v = VectorField::from_fn(&g, |x, z| [x.sin() + z, (2.0 * x).cos() * z]);
        let out = piola_transform(&v, &m).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in out.data().iter().zip(v.data()) {
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        assert!(worst < 1e-13, "identity transform defect {worst}");
    }

    #[test]
    fn uniform_dilation_closed_form() {
        // Psi(x) = 2x in d = 2: J = 4, A = I/2, so v(x) = 2 vtilde(2x).
        let vt = |p: [f64; 2]| [p[0] + p[1], p[0] - 2.0 * p[1]];
        let x = [0.3, 0.7];
        let image = [2.0 * x[0], 2.0 * x[1]];
        let half = [[0.5, 0.0], [0.0, 0.5]];
        let v = piola_apply(4.0, half, vt(image));
        assert!((v[0] - 2.0 * vt(image)[0]).abs() < 1e-15);
        assert!((v[1] - 2.0 * vt(image)[1]).abs() < 1e-15);
    }

    #[test]
    fn identity_residual_zero_for_identity_and_uniform_stretch() {
        let g = grid(24, 9);
        let zero = vec![0.0; g.nx];
        let id = compose_psi(&g, &zero, &zero, &zero, &zero, 0.05).unwrap();
        let src = FlatMap::identity(&g);
        assert!(piola_identity_residual(&id, &src) < 1e-13);

        let eta = vec![0.1; g.nx];
        let stretch = compose_psi(&g, &zero, &zero, &eta, &zero, 0.05).unwrap();
        assert!(piola_identity_residual(&stretch, &src) < 1e-10);
    }

    #[test]
    fn identity_residual_second_order() {
        let run = |n: usize| -> f64 {
            let g = grid(n, n / 2 + 1);
            let zero = vec![0.0; g.nx];
            let w = trig(&g, &[(0.15, 1.0, 0.2), (0.05, 3.0, 1.0)]);
            let eta = trig(&g, &[(0.1, 2.0, 0.5), (0.08, 1.0, 2.0)]);
            let m = compose_psi(&g, &w, &zero, &eta, &zero, 0.05).unwrap();
            let src = FlatMap::build(&g, &w, &zero, 0.05).unwrap();
            piola_identity_residual(&m, &src)
        };
        let e0 = run(32);
        let e1 = run(64);
        let e2 = run(128);
        let order = ((e0 / e1).log2()).min((e1 / e2).log2());
        assert!(order >= 1.9, "order {order} from residuals {e0} {e1} {e2}");
    }

    #[test]
    fn divergence_free_preserved_at_second_order() {
        // vtilde = curl of a stream function on the target domain, evaluated
        // through Phi_eta; div of the transformed field measured on the
        // source domain should shrink at second order.
        let run = |n: usize| -> f64 {
            let g = grid(n, n / 2 + 1);
            let zero = vec![0.0; g.nx];
            let w = trig(&g, &[(0.2, 1.0, 0.0)]);
            let eta = trig(&g, &[(0.1, 2.0, 0.9)]);
            let m = compose_psi(&g, &w, &zero, &eta, &zero, 0.05).unwrap();
            let src = FlatMap::build(&g, &w, &zero, 0.05).unwrap();
            let tgt = FlatMap::build(&g, &eta, &zero, 0.05).unwrap();
            // stream psi(x, z) = sin(x) cos(z): vtilde = (d_z psi, -d_x psi).
            let mut vt = VectorField::zeros(&g);
            for j in 0..g.nz {
                for i in 0..g.nx {
                    let p = tgt.forward_idx(i, j);
                    *vt.at_mut(i, j) = [-p[0].sin() * p[1].sin(), -p[0].cos() * p[1].cos()];
                }
            }
            let v = piola_transform(&vt, &m).unwrap();
            divergence_physical(&v, &src).max_abs()
        };
        let e0 = run(32);
        let e1 = run(64);
        let e2 = run(128);
        let order = ((e0 / e1).log2()).min((e1 / e2).log2());
        assert!(order >= 1.9, "order {order} from divergences {e0} {e1} {e2}");
    }

    #[test]
    fn gradient_physical_identity_map_matches_reference() {
        let g = grid(64, 33);
        let m = FlatMap::identity(&g);
        let v = VectorField::from_fn(&g, |x, z| [x.sin() * z, x.cos() + z * z]);
        let grad = gradient_physical(&v, &m);
        // Interior spot check against the analytic gradient.
        let (i, j) = (7, 8);
        let (x, z) = (g.x(i), g.z(j));
        let exact = [[x.cos() * z, x.sin()], [-x.sin(), 2.0 * z]];
        let got = grad.at(i, j);
        for r in 0..2 {
            for c in 0..2 {
                assert!((got[r][c] - exact[r][c]).abs() < 5e-3, "entry {r}{c}");
            }
        }
        let a = m.inv_gradient_idx(0, 0);
        assert_eq!(a, IDENTITY);
    }
}

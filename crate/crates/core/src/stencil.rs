//! Second-order differential stencils on the reference grid: central
//! differences with periodic wrap horizontally and one-sided second-order
//! closures at the walls. All operators annihilate constants exactly.

use crate::grid::{Grid, ScalarField, VectorField};

/// Central derivative of periodic samples (spacing `h`).
#[inline]
pub fn ddx_periodic_at(samples: &[f64], i: usize, h: f64) -> f64 {
    let n = samples.len();
    let ip = if i + 1 == n { 0 } else { i + 1 };
    let im = if i == 0 { n - 1 } else { i - 1 };
    (samples[ip] - samples[im]) / (2.0 * h)
}

/// Derivative of a whole periodic sample vector.
pub fn ddx_periodic(samples: &[f64], h: f64) -> Vec<f64> {
    (0..samples.len()).map(|i| ddx_periodic_at(samples, i, h)).collect()
}

/// d/dx of a scalar field (periodic direction).
pub fn ddx(f: &ScalarField) -> ScalarField {
    let g = f.grid().clone();
    let h = g.hx();
    let mut out = ScalarField::zeros(&g);
    for j in 0..g.nz {
        for i in 0..g.nx {
            let ip = if i + 1 == g.nx { 0 } else { i + 1 };
            let im = if i == 0 { g.nx - 1 } else { i - 1 };
            *out.at_mut(i, j) = (f.at(ip, j) - f.at(im, j)) / (2.0 * h);
        }
    }
    out
}

/// d/dz of a scalar field: central inside, one-sided second order at walls.
pub fn ddz(f: &ScalarField) -> ScalarField {
    let g = f.grid().clone();
    let h = g.hz();
    let nz = g.nz;
    let mut out = ScalarField::zeros(&g);
    for i in 0..g.nx {
        *out.at_mut(i, 0) = (-3.0 * f.at(i, 0) + 4.0 * f.at(i, 1) - f.at(i, 2)) / (2.0 * h);
        *out.at_mut(i, nz - 1) =
            (3.0 * f.at(i, nz - 1) - 4.0 * f.at(i, nz - 2) + f.at(i, nz - 3)) / (2.0 * h);
    }
    for j in 1..nz - 1 {
        for i in 0..g.nx {
            *out.at_mut(i, j) = (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h);
        }
    }
    out
}

/// Reference-domain gradient `(d/dx f, d/dz f)`.
pub fn grad(f: &ScalarField) -> VectorField {
    let gx = ddx(f);
    let gz = ddz(f);
    let g = f.grid().clone();
    let mut out = VectorField::zeros(&g);
    for (o, (a, b)) in out
        .data_mut()
        .iter_mut()
        .zip(gx.data().iter().zip(gz.data().iter()))
    {
        *o = [*a, *b];
    }
    out
}

/// Reference-domain divergence `d/dx v1 + d/dz v2`.
pub fn div(v: &VectorField) -> ScalarField {
    let vx = v.component(0);
    let vz = v.component(1);
    let dx = ddx(&vx);
    let dz = ddz(&vz);
    let g = v.grid().clone();
    let mut out = ScalarField::zeros(&g);
    for (o, (a, b)) in out
        .data_mut()
        .iter_mut()
        .zip(dx.data().iter().zip(dz.data().iter()))
    {
        *o = a + b;
    }
    out
}

impl Grid {
    /// Wall-aware vertical cell size used by flux-difference forms: half
    /// cells at the walls so divergence sums telescope against the
    /// trapezoidal quadrature.
    #[inline]
    pub fn dz_cell(&self, j: usize) -> f64 {
        if j == 0 || j == self.nz - 1 {
            0.5 * self.hz()
        } else {
            self.hz()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::sync::Arc;

    fn grid(nx: usize, nz: usize) -> Arc<Grid> {
        Arc::new(Grid::standard(nx, nz).unwrap())
    }

    #[test]
    fn grad_of_constant_is_zero() {
        let g = grid(16, 9);
        let f = ScalarField::constant(&g, 3.25);
        let gf = grad(&f);
        assert!(gf.max_abs() < 1e-14);
    }

    #[test]
    fn div_of_linear_vertical_field() {
        // v = (z, 0) is divergence free; v = (0, z) has divergence one.
        // One-sided closures are exact on linear data.
        let g = grid(16, 9);
        let v1 = VectorField::from_fn(&g, |_, z| [z, 0.0]);
        let v2 = VectorField::from_fn(&g, |_, z| [0.0, z]);
        assert!(div(&v1).max_abs() < 1e-13);
        let d2 = div(&v2);
        for &v in d2.data() {
            assert!((v - 1.0).abs() < 1e-12, "got {v}");
        }
    }

    // Refinement oracle: halve h twice on smooth periodic data and check the
    // observed order of both stencil directions.
    #[test]
    fn stencils_second_order_on_smooth_data() {
        let exact_err = |n: usize| -> (f64, f64) {
            let g = grid(n, n / 2 + 1);
            let f = ScalarField::from_fn(&g, |x, z| (2.0 * x).sin() * (1.5 + (std::f64::consts::PI * z).cos()));
            let fx = ScalarField::from_fn(&g, |x, z| {
                2.0 * (2.0 * x).cos() * (1.5 + (std::f64::consts::PI * z).cos())
            });
            let fz = ScalarField::from_fn(&g, |x, z| {
                -(2.0 * x).sin() * std::f64::consts::PI * (std::f64::consts::PI * z).sin()
            });
            let dx = ddx(&f);
            let dz = ddz(&f);
            let ex = dx
                .data()
                .iter()
                .zip(fx.data())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let ez = dz
                .data()
                .iter()
                .zip(fz.data())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            (ex, ez)
        };
        let (ex0, ez0) = exact_err(16);
        let (ex1, ez1) = exact_err(32);
        let (ex2, ez2) = exact_err(64);
        let order_x = ((ex0 / ex1).log2()).min((ex1 / ex2).log2());
        let order_z = ((ez0 / ez1).log2()).min((ez1 / ez2).log2());
        assert!(order_x >= 1.9, "x order {order_x}");
        assert!(order_z >= 1.9, "z order {order_z}");
    }
}

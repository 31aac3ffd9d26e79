//! Manufactured-solution consistency of the fluid spatial operator on a
//! deformed domain: analytic fields are pulled back to the reference grid,
//! the discrete tendencies are compared to the analytic Eulerian right-hand
//! side at interior nodes, and the residual order in `h` is measured. The
//! upwinded continuity flux limits the overall order to one.

use std::sync::Arc;

use slabfsi::fluid::fluid_rhs;
use slabfsi::geometry::FlatMap;
use slabfsi::grid::{Grid, ScalarField, VectorField};
use slabfsi::state::State;
use slabfsi::{Coupling, Params};

struct Analytic;

impl Analytic {
    fn rho(x: f64, z: f64) -> f64 {
        2.0 + 0.2 * x.sin() * z.cos()
    }
    fn rho_x(x: f64, z: f64) -> f64 {
        0.2 * x.cos() * z.cos()
    }
    fn rho_z(x: f64, z: f64) -> f64 {
        -0.2 * x.sin() * z.sin()
    }
    fn u1(x: f64, z: f64) -> f64 {
        0.3 * x.cos() * z.sin()
    }
    fn u1_x(x: f64, z: f64) -> f64 {
        -0.3 * x.sin() * z.sin()
    }
    fn u1_z(x: f64, z: f64) -> f64 {
        0.3 * x.cos() * z.cos()
    }
    fn u1_lap(x: f64, z: f64) -> f64 {
        -0.6 * x.cos() * z.sin()
    }
    fn u2(x: f64, z: f64) -> f64 {
        0.25 * (2.0 * x).sin() * z.cos()
    }
    fn u2_x(x: f64, z: f64) -> f64 {
        0.5 * (2.0 * x).cos() * z.cos()
    }
    fn u2_z(x: f64, z: f64) -> f64 {
        -0.25 * (2.0 * x).sin() * z.sin()
    }
    fn u2_lap(x: f64, z: f64) -> f64 {
        -1.25 * (2.0 * x).sin() * z.cos()
    }
    /// d/dx of div u and d/dz of div u.
    fn div_grad(x: f64, z: f64) -> (f64, f64) {
        let ddx = -0.3 * x.cos() * z.sin() - 0.5 * (2.0 * x).cos() * z.sin();
        let ddz = -0.3 * x.sin() * z.cos() - 0.25 * (2.0 * x).sin() * z.cos();
        (ddx, ddz)
    }
}

fn residuals(n: usize, params: &Params) -> (f64, f64) {
    let grid = Arc::new(Grid::standard(n, n / 2 + 1).unwrap());
    let w: Vec<f64> = (0..grid.nx).map(|i| 0.1 * grid.x(i).cos()).collect();
    let w_t = vec![0.0; grid.nx];
    let map = FlatMap::build(&grid, &w, &w_t, 0.01).unwrap();

    let mut rho_hat = ScalarField::zeros(&grid);
    let mut u_hat = VectorField::zeros(&grid);
    for j in 0..grid.nz {
        for i in 0..grid.nx {
            let p = map.forward_idx(i, j);
            *rho_hat.at_mut(i, j) = Analytic::rho(p[0], p[1]);
            *u_hat.at_mut(i, j) = [Analytic::u1(p[0], p[1]), Analytic::u2(p[0], p[1])];
        }
    }
    let state = State { t: 0.0, rho_hat, u_hat, w: w.clone(), w_t };
    let rhs = fluid_rhs(&state, &map, params, &Coupling::Strong).unwrap();

    let mut worst_rho: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    for j in 1..grid.nz - 1 {
        for i in 0..grid.nx {
            let p = map.forward_idx(i, j);
            let (x, z) = (p[0], p[1]);
            let (rho, u1, u2) = (Analytic::rho(x, z), Analytic::u1(x, z), Analytic::u2(x, z));
            let div_u = Analytic::u1_x(x, z) + Analytic::u2_z(x, z);
            // Continuity: d/dt (J rho) = -J div(rho u).
            let div_rho_u = Analytic::rho_x(x, z) * u1
                + rho * Analytic::u1_x(x, z)
                + Analytic::rho_z(x, z) * u2
                + rho * Analytic::u2_z(x, z);
            let d_jrho_exact = -map.jacobian(i) * div_rho_u;
            worst_rho = worst_rho.max((rhs.d_jrho.at(i, j) - d_jrho_exact).abs());

            // Momentum in velocity form.
            let inv_eps2 = 1.0 / (params.eps * params.eps);
            let (dgx, dgz) = Analytic::div_grad(x, z);
            let visc = [
                params.mu * Analytic::u1_lap(x, z) + (params.mu + params.lambda) * dgx,
                params.mu * Analytic::u2_lap(x, z) + (params.mu + params.lambda) * dgz,
            ];
            let conv = [
                u1 * Analytic::u1_x(x, z) + u2 * Analytic::u1_z(x, z),
                u1 * Analytic::u2_x(x, z) + u2 * Analytic::u2_z(x, z),
            ];
            let grad_p = [
                params.gamma * rho.powf(params.gamma - 1.0) * Analytic::rho_x(x, z),
                params.gamma * rho.powf(params.gamma - 1.0) * Analytic::rho_z(x, z),
            ];
            for r in 0..2 {
                let exact =
                    -conv[r] - inv_eps2 * grad_p[r] / rho + params.nu * visc[r] / rho;
                worst_u = worst_u.max((rhs.d_u.at(i, j)[r] - exact).abs());
            }
            let _ = div_u;
        }
    }
    (worst_rho, worst_u)
}

#[test]
fn manufactured_solution_orders() {
    let params = Params {
        gamma: 2.0,
        mu: 1.0,
        lambda: 0.1,
        nu: 0.05,
        eps: 1.0,
        ..Params::default()
    };
    let mut rho_err = Vec::new();
    let mut u_err = Vec::new();
    for n in [32usize, 64, 128] {
        let (a, b) = residuals(n, &params);
        rho_err.push(a);
        u_err.push(b);
    }
    let order = |e: &[f64]| ((e[0] / e[1]).log2()).min((e[1] / e[2]).log2());
    let o_rho = order(&rho_err);
    let o_u = order(&u_err);
    println!("continuity residual order {o_rho:.3} ({rho_err:?})");
    println!("momentum residual order {o_u:.3} ({u_err:?})");
    assert!(o_rho >= 1.0, "continuity order {o_rho} from {rho_err:?}");
    assert!(o_u >= 1.0, "momentum order {o_u} from {u_err:?}");
}

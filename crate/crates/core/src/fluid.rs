//! Spatial semi-discretization of the rescaled compressible equations in ALE
//! form on the reference slab.
//!
//! Continuity is advanced in the conservative form
//! `d/dt (J rho) + div_ref(J A rho (u - u_mesh)) = 0` with first-order
//! upwinding at the full characteristic speed, so discrete mass telescopes to
//! the wall fluxes. Momentum is advanced for the velocity: central convective
//! terms plus flux-form pressure and viscous contributions whose wall fluxes
//! are the slip tractions.

use crate::error::{Result, SimError};
use crate::geometry::{gradient_physical, FlatMap};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::la::{dot2, matvec2, Mat2, Vec2};
use crate::params::{Coupling, Params};
use crate::state::State;
use crate::stencil::{ddx, ddz};

pub const DEFAULT_CFL: f64 = 0.4;

/// Barotropic pressure `rho^gamma`.
pub fn pressure(rho: f64, params: &Params) -> Result<f64> {
    if rho < 0.0 {
        return Err(SimError::Positivity { t: f64::NAN, min_rho: rho });
    }
    Ok(rho.powf(params.gamma))
}

/// Regularized pressure `rho^gamma + delta rho^beta`.
pub fn pressure_delta(rho: f64, params: &Params) -> Result<f64> {
    if rho < 0.0 {
        return Err(SimError::Positivity { t: f64::NAN, min_rho: rho });
    }
    Ok(rho.powf(params.gamma) + params.delta * rho.powf(params.beta))
}

#[inline]
fn pressure_delta_unchecked(rho: f64, params: &Params) -> f64 {
    if params.delta == 0.0 {
        rho.powf(params.gamma)
    } else {
        rho.powf(params.gamma) + params.delta * rho.powf(params.beta)
    }
}

/// Squared sound speed `p_delta'(rho)` of the regularized law.
#[inline]
pub fn sound_speed_sq(rho: f64, params: &Params) -> f64 {
    let mut c2 = params.gamma * rho.powf(params.gamma - 1.0);
    if params.delta > 0.0 {
        c2 += params.delta * params.beta * rho.powf(params.beta - 1.0);
    }
    c2
}

/// Viscous stress `S(G) = mu (G + G^T) + lambda tr(G) I` (without the `nu`
/// prefactor, which scales the whole viscous term).
pub fn stress_tensor(grad_u: Mat2, params: &Params) -> Mat2 {
    let tr = grad_u[0][0] + grad_u[1][1];
    let mut s = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            s[r][c] = params.mu * (grad_u[r][c] + grad_u[c][r]);
        }
        s[r][r] += params.lambda * tr;
    }
    s
}

/// Boundary traction record of one RHS evaluation.
#[derive(Debug, Clone)]
pub struct BoundaryTraction {
    /// Slip traction vector at the moving wall (tangential part), per node.
    pub top_tangential: Vec<Vec2>,
    /// Normal viscous traction `nu (S n^w) . n_hat` at the moving wall.
    pub top_normal: Vec<f64>,
    /// Tangential traction (x component) at the rigid bottom wall.
    pub bottom_tangential: Vec<f64>,
}

/// Slip/penalty boundary contributions for the current state.
#[derive(Debug, Clone)]
pub struct SlipBc {
    pub traction: BoundaryTraction,
    /// Kinematic mismatch `u . n^w o Phi_w - w_t` per top node.
    pub mismatch: Vec<f64>,
    /// Penalty exchange flux `(1/kappa) * mismatch`, when in penalty mode.
    pub penalty_flux: Option<Vec<f64>>,
}

/// Tangential projection with respect to the unit deformed normal.
#[inline]
fn tangential(v: Vec2, n_weighted: Vec2) -> Vec2 {
    let n2 = dot2(n_weighted, n_weighted);
    let vn = dot2(v, n_weighted) / n2;
    [v[0] - vn * n_weighted[0], v[1] - vn * n_weighted[1]]
}

/// Evaluates the slip tractions and the kinematic mismatch on both walls.
pub fn apply_slip_bc(
    state: &State,
    map: &FlatMap,
    params: &Params,
    coupling: &Coupling,
) -> Result<SlipBc> {
    let g = state.grid().clone();
    let grad_u = gradient_physical(&state.u_hat, map);
    let jtop = g.nz - 1;
    let mut top_tangential = Vec::with_capacity(g.nx);
    let mut top_normal = Vec::with_capacity(g.nx);
    let mut bottom_tangential = Vec::with_capacity(g.nx);
    let mut mismatch = Vec::with_capacity(g.nx);
    for i in 0..g.nx {
        let n = map.normal_weighted_idx(i);
        let u_top = state.u_hat.at(i, jtop);
        let slip = [u_top[0], u_top[1] - state.w_t[i]];
        let t_tau = tangential(slip, n);
        top_tangential.push([
            -params.alpha * params.nu * t_tau[0],
            -params.alpha * params.nu * t_tau[1],
        ]);
        let s_top = stress_tensor(grad_u.at(i, jtop), params);
        let t_nat = matvec2(s_top, n);
        let n2 = dot2(n, n);
        top_normal.push(params.nu * dot2(t_nat, n) / n2.sqrt());
        bottom_tangential.push(-params.alpha0 * params.nu * state.u_hat.at(i, 0)[0]);
        mismatch.push(dot2(u_top, n) - state.w_t[i]);
    }
    let penalty_flux = match coupling {
        Coupling::Penalty { kappa } => {
            if *kappa <= 0.0 {
                return Err(SimError::Param("kappa must be positive in penalty mode".into()));
            }
            Some(mismatch.iter().map(|m| m / kappa).collect())
        }
        _ => None,
    };
    Ok(SlipBc {
        traction: BoundaryTraction { top_tangential, top_normal, bottom_tangential },
        mismatch,
        penalty_flux,
    })
}

/// Tendencies produced by one evaluation of the spatial operator.
#[derive(Debug, Clone)]
pub struct FluidRhs {
    /// Time derivative of the conservative density `J_w rho_hat`.
    pub d_jrho: ScalarField,
    /// Time derivative of the pulled-back velocity with the map frozen.
    pub d_u: VectorField,
    pub traction: BoundaryTraction,
}

/// Acoustic CFL bound `cfl * min(h) / (max |u| + max c_s / eps)`.
pub fn acoustic_cfl(state: &State, grid: &Grid, params: &Params) -> f64 {
    let umax = state.u_hat.max_abs();
    let cmax = state
        .rho_hat
        .data()
        .iter()
        .fold(0.0f64, |m, &r| m.max(sound_speed_sq(r, params)))
        .sqrt();
    DEFAULT_CFL * grid.hx().min(grid.hz()) / (umax + cmax / params.eps)
}

/// Explicit diffusion stability bound for the viscous terms.
pub fn viscous_dt_bound(state: &State, grid: &Grid, params: &Params) -> f64 {
    let coeff = params.nu * (2.0 * params.mu + params.lambda.abs());
    if coeff <= 0.0 {
        return f64::INFINITY;
    }
    let rho_min = state.rho_hat.min().max(1e-12);
    let gap = state.min_gap().max(1e-3);
    let hx2 = grid.hx() * grid.hx();
    // The vertical metric contracts by J_w, so the effective spacing shrinks
    // with the gap.
    let hz2 = (grid.hz() * gap) * (grid.hz() * gap);
    0.9 * rho_min / (2.0 * coeff * (1.0 / hx2 + 1.0 / hz2))
}

/// Full spatial operator. `rho_hat` must be positive; wall rows of `d_u`
/// carry the natural tendencies and are overridden by the coupling mode in
/// the time integrator.
pub fn fluid_rhs(state: &State, map: &FlatMap, params: &Params, coupling: &Coupling) -> Result<FluidRhs> {
    let g = state.grid().clone();
    let (nx, nz) = (g.nx, g.nz);
    let hx = g.hx();
    let hz = g.hz();
    let jtop = nz - 1;
    let rho = &state.rho_hat;
    let u = &state.u_hat;
    let min_rho = rho.min();
    if min_rho <= 0.0 {
        return Err(SimError::Positivity { t: state.t, min_rho });
    }

    let slip = apply_slip_bc(state, map, params, coupling)?;
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let p_ref = pressure_delta_unchecked(params.rho_bar, params);

    // Node-centered helpers.
    let q = rho.map(|r| pressure_delta_unchecked(r, params) - p_ref);
    let grad_u_phys = gradient_physical(u, map);
    let visc = params.nu > 0.0 && (params.mu != 0.0 || params.lambda != 0.0);

    // Transport velocity c = J A (u - u_mesh) per node.
    let mut c_field = VectorField::zeros(&g);
    for j in 0..nz {
        for i in 0..nx {
            let ja = map.jac_times_inv_idx(i, j);
            let um = map.mesh_velocity_idx(i, j);
            let uu = u.at(i, j);
            *c_field.at_mut(i, j) = matvec2(ja, [uu[0] - um[0], uu[1] - um[1]]);
        }
    }

    // --- continuity: Rusanov fluxes on faces, prescribed wall fluxes ---
    let mut fx = vec![0.0; nx * nz]; // flux through face (i + 1/2, j)
    for j in 0..nz {
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let cf = 0.5 * (c_field.at(i, j)[0] + c_field.at(ip, j)[0]);
            let jf = 0.5 * (map.jacobian(i) + map.jacobian(ip));
            let csf = 0.5
                * (sound_speed_sq(rho.at(i, j), params).sqrt()
                    + sound_speed_sq(rho.at(ip, j), params).sqrt());
            let lam = cf.abs() + jf * csf / params.eps;
            fx[g.idx(i, j)] =
                0.5 * cf * (rho.at(i, j) + rho.at(ip, j)) - 0.5 * lam * (rho.at(ip, j) - rho.at(i, j));
        }
    }
    // fz[i + nx*j] = flux through the face below node row j (j = 0 is the
    // bottom wall, j = nz is the top wall).
    let mut fz = vec![0.0; nx * (nz + 1)];
    for j in 1..nz {
        for i in 0..nx {
            let cf = 0.5 * (c_field.at(i, j - 1)[1] + c_field.at(i, j)[1]);
            let zf = (g.z(j - 1) + g.z(j)) * 0.5;
            let wx = map.slope(i);
            let metric = (1.0 + zf * wx * zf * wx).sqrt().max(1.0);
            let csf = 0.5
                * (sound_speed_sq(rho.at(i, j - 1), params).sqrt()
                    + sound_speed_sq(rho.at(i, j), params).sqrt());
            let lam = cf.abs() + metric * csf / params.eps;
            fz[i + nx * j] =
                0.5 * cf * (rho.at(i, j - 1) + rho.at(i, j)) - 0.5 * lam * (rho.at(i, j) - rho.at(i, j - 1));
        }
    }
    for i in 0..nx {
        // Impermeable bottom; the top flux is the kinematic mismatch flux,
        // which vanishes under strong coupling.
        fz[i] = 0.0;
        fz[i + nx * nz] = rho.at(i, jtop) * slip.mismatch[i];
    }

    let mut d_jrho = ScalarField::zeros(&g);
    for j in 0..nz {
        let dzc = g.dz_cell(j);
        for i in 0..nx {
            let im = (i + nx - 1) % nx;
            let div = (fx[g.idx(i, j)] - fx[g.idx(im, j)]) / hx
                + (fz[i + nx * (j + 1)] - fz[i + nx * j]) / dzc;
            *d_jrho.at_mut(i, j) = -div;
        }
    }

    // --- momentum: convective term (central) ---
    let u0 = u.component(0);
    let u1 = u.component(1);
    let du = [[ddx(&u0), ddz(&u0)], [ddx(&u1), ddz(&u1)]];
    let mut d_u = VectorField::zeros(&g);
    for j in 0..nz {
        for i in 0..nx {
            let a_w = map.inv_gradient_idx(i, j);
            let um = map.mesh_velocity_idx(i, j);
            let uu = u.at(i, j);
            let ca = matvec2(a_w, [uu[0] - um[0], uu[1] - um[1]]);
            let out = d_u.at_mut(i, j);
            for r in 0..2 {
                out[r] = -(ca[0] * du[r][0].at(i, j) + ca[1] * du[r][1].at(i, j));
            }
        }
    }

    // --- momentum: pressure + viscous fluxes ---
    // Flux of momentum component r: (1/eps^2) J A_{.r} q - nu (J A S^T)_{.r}.
    // x faces.
    let mut gx = vec![[0.0f64; 2]; nx * nz];
    for j in 0..nz {
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let ja_l = map.jac_times_inv_idx(i, j);
            let ja_r = map.jac_times_inv_idx(ip, j);
            let ja = avg_mat(ja_l, ja_r);
            let qf = 0.5 * (q.at(i, j) + q.at(ip, j));
            let mut flux = [inv_eps2 * ja[0][0] * qf, inv_eps2 * ja[0][1] * qf];
            if visc {
                // Face-centered physical velocity gradient: compact in x,
                // averaged in z.
                let a_f = avg_mat(map.inv_gradient_idx(i, j), map.inv_gradient_idx(ip, j));
                let mut gref = [[0.0; 2]; 2];
                for r in 0..2 {
                    gref[r][0] = (u.at(ip, j)[r] - u.at(i, j)[r]) / hx;
                    gref[r][1] = 0.5 * (du[r][1].at(i, j) + du[r][1].at(ip, j));
                }
                let gphys = ref_to_phys(gref, a_f);
                let s = stress_tensor(gphys, params);
                for r in 0..2 {
                    flux[r] -= params.nu * (ja[0][0] * s[r][0] + ja[0][1] * s[r][1]);
                }
            }
            gx[g.idx(i, j)] = flux;
        }
    }
    // z faces (interior) plus prescribed wall fluxes.
    let mut gz = vec![[0.0f64; 2]; nx * (nz + 1)];
    for j in 1..nz {
        for i in 0..nx {
            let ja = avg_mat(
                map.jac_times_inv_idx(i, j - 1),
                map.jac_times_inv_idx(i, j),
            );
            let qf = 0.5 * (q.at(i, j - 1) + q.at(i, j));
            let mut flux = [inv_eps2 * ja[1][0] * qf, inv_eps2 * ja[1][1] * qf];
            if visc {
                let a_f = avg_mat(map.inv_gradient_idx(i, j - 1), map.inv_gradient_idx(i, j));
                let mut gref = [[0.0; 2]; 2];
                for r in 0..2 {
                    gref[r][0] = 0.5 * (du[r][0].at(i, j - 1) + du[r][0].at(i, j));
                    gref[r][1] = (u.at(i, j)[r] - u.at(i, j - 1)[r]) / hz;
                }
                let gphys = ref_to_phys(gref, a_f);
                let s = stress_tensor(gphys, params);
                for r in 0..2 {
                    flux[r] -= params.nu * (ja[1][0] * s[r][0] + ja[1][1] * s[r][1]);
                }
            }
            gz[i + nx * j] = flux;
        }
    }
    for i in 0..nx {
        // Bottom wall: pressure flux with the natural trace; viscous flux
        // from the slip traction in the tangential direction and the natural
        // normal stress (that row is overridden by impermeability).
        let qb = q.at(i, 0);
        let mut fb = [0.0, inv_eps2 * qb];
        if visc {
            let s = stress_tensor(grad_u_phys.at(i, 0), params);
            fb[0] = slip.traction.bottom_tangential[i];
            fb[1] -= params.nu * s[1][1];
        }
        gz[i] = fb;

        // Top wall: pressure flux with the natural trace against the
        // weighted normal; viscous flux is minus the composite traction
        // (prescribed tangential slip law plus natural normal part).
        let n = map.normal_weighted_idx(i);
        let qt = q.at(i, jtop);
        let mut ft = [inv_eps2 * n[0] * qt, inv_eps2 * n[1] * qt];
        if visc {
            let s = stress_tensor(grad_u_phys.at(i, jtop), params);
            let t_nat = matvec2(s, n);
            let n2 = dot2(n, n);
            let tn = dot2(t_nat, n) / n2;
            let t_comp = [
                params.nu * tn * n[0] + slip.traction.top_tangential[i][0],
                params.nu * tn * n[1] + slip.traction.top_tangential[i][1],
            ];
            ft[0] -= t_comp[0];
            ft[1] -= t_comp[1];
        }
        gz[i + nx * nz] = ft;
    }

    for j in 0..nz {
        let dzc = g.dz_cell(j);
        for i in 0..nx {
            let im = (i + nx - 1) % nx;
            let jrho = map.jacobian(i) * rho.at(i, j);
            let out = d_u.at_mut(i, j);
            for r in 0..2 {
                let div = (gx[g.idx(i, j)][r] - gx[g.idx(im, j)][r]) / hx
                    + (gz[i + nx * (j + 1)][r] - gz[i + nx * j][r]) / dzc;
                out[r] -= div / jrho;
            }
        }
    }

    let rhs = FluidRhs { d_jrho, d_u, traction: slip.traction };
    if !rhs.d_jrho.all_finite() || !rhs.d_u.all_finite() {
        return Err(SimError::BlowUp { t: state.t });
    }
    Ok(rhs)
}

#[inline]
fn avg_mat(a: Mat2, b: Mat2) -> Mat2 {
    [
        [0.5 * (a[0][0] + b[0][0]), 0.5 * (a[0][1] + b[0][1])],
        [0.5 * (a[1][0] + b[1][0]), 0.5 * (a[1][1] + b[1][1])],
    ]
}

/// Physical gradient from a reference gradient: `(grad_x u)_{rk} =
/// sum_j dref_j u_r A_{jk}`.
#[inline]
fn ref_to_phys(gref: Mat2, a: Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            out[r][k] = gref[r][0] * a[0][k] + gref[r][1] * a[1][k];
        }
    }
    out
}

/// Enforces the strong wall conditions: impermeable bottom and, at the top,
/// the minimal-norm correction putting `u . n^w o Phi_w = w_t`.
pub fn enforce_strong_bcs(u_hat: &mut VectorField, map: &FlatMap, w_t: &[f64], top_strong: bool) {
    let g = u_hat.grid().clone();
    let jtop = g.nz - 1;
    for i in 0..g.nx {
        u_hat.at_mut(i, 0)[1] = 0.0;
        if top_strong {
            let n = map.normal_weighted_idx(i);
            let n2 = dot2(n, n);
            let v = u_hat.at(i, jtop);
            let corr = (w_t[i] - dot2(v, n)) / n2;
            let out = u_hat.at_mut(i, jtop);
            out[0] += corr * n[0];
            out[1] += corr * n[1];
        }
    }
}

/// Outcome of the exact penalty relaxation over one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct PenaltyExchange {
    /// `(1/kappa) int int |mismatch|^2` over the step, weighted by the area
    /// Jacobian (the energy dissipated by the exchange).
    pub dissipation: f64,
    /// Plain `int int mismatch^2 dx dt` over the step.
    pub mismatch_sq_dt: f64,
}

/// Integrates the stiff penalty exchange between the top fluid trace and the
/// plate velocity exactly over `dt` (each node relaxes at rate
/// `lambda = (1/kappa) sqrt(g) (|n|^2 / m_f + 1)` with `m_f` the half-cell
/// fluid mass), then redistributes the momentum change consistently.
pub fn penalty_relaxation(
    u_hat: &mut VectorField,
    w_t: &mut [f64],
    rho_hat: &ScalarField,
    map: &FlatMap,
    kappa: f64,
    dt: f64,
) -> PenaltyExchange {
    let g = u_hat.grid().clone();
    let jtop = g.nz - 1;
    let hz = g.hz();
    let hx = g.hx();
    let mut out = PenaltyExchange::default();
    for i in 0..g.nx {
        let n = map.normal_weighted_idx(i);
        let n2 = dot2(n, n);
        let sqrt_g = n2.sqrt();
        let m_fluid = rho_hat.at(i, jtop) * map.jacobian(i) * 0.5 * hz;
        let a = sqrt_g * n2 / (kappa * m_fluid);
        let b = sqrt_g / kappa;
        let lambda = a + b;
        let v = u_hat.at(i, jtop);
        let m0 = dot2(v, n) - w_t[i];
        let decay = (-lambda * dt).exp();
        let m1 = m0 * decay;
        let dm = m1 - m0;
        // Fluid share along the weighted normal, plate share on w_t.
        let corr = (a / lambda) * dm / n2;
        let uu = u_hat.at_mut(i, jtop);
        uu[0] += corr * n[0];
        uu[1] += corr * n[1];
        w_t[i] -= (b / lambda) * dm;
        let msq_int = m0 * m0 * (1.0 - decay * decay) / (2.0 * lambda);
        out.mismatch_sq_dt += msq_int * hx;
        out.dissipation += sqrt_g * msq_int * hx / kappa;
    }
    out
}

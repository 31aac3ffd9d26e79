//! Singular-limit experiment harness: well-prepared data, a proxy reference
//! solution computed at much smaller Mach and viscosity numbers on a finer
//! grid, domain-to-domain comparison through the Piola transform, parameter
//! sweeps and rate fits.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{relative_energy, TestTriple};
use crate::error::{Result, SimError};
use crate::fluid::{fluid_rhs, pressure};
use crate::geometry::{
    compose_psi, divergence_physical, gradient_physical, piola_transform, scalar_gradient_physical,
    ComposedMap, FlatMap,
};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::la::{dot2, matvec2};
use crate::params::{Coupling, Params};
use crate::plate::{compute_plate_load, plate_acceleration};
use crate::scheme::{run, RunConfig};
use crate::spectral::PlateSpectral;
use crate::state::State;

pub use crate::profiles::well_prepared_ic;

/// Characteristic scales of the dimensional problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicValues {
    /// Fluid velocity scale.
    pub u_f: f64,
    /// Fluid pressure scale.
    pub p_f: f64,
    /// Fluid density scale.
    pub rho_f: f64,
    /// Length scale.
    pub l: f64,
    /// Fluid viscosity scale.
    pub nu_f: f64,
    /// Structure density scale.
    pub rho_s: f64,
    /// Plate thickness.
    pub h: f64,
    /// Young modulus scale.
    pub e: f64,
    /// Displacement scale.
    pub w: f64,
    /// Structural time scale.
    pub t_s: f64,
    /// Structural damping scale.
    pub n_s: f64,
}

/// Nondimensional groups plus the structural ratios the scaling sets to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondimReport {
    pub eps: f64,
    pub nu: f64,
    /// `rho_s U_s^2 / (rho_f U_f^2)`, `W^4 E / (L^4 rho_f U_f^2)`,
    /// `W N_s / (L^2 T_s rho_f U_f^2)`.
    pub structural_ratios: [f64; 3],
    /// True when some ratio differs from one by more than 10 percent.
    pub warn_unbalanced: bool,
}

/// Mach and inverse Reynolds numbers from characteristic values.
pub fn nondimensionalize(cv: &CharacteristicValues) -> Result<NondimReport> {
    let vals = [
        cv.u_f, cv.p_f, cv.rho_f, cv.l, cv.nu_f, cv.rho_s, cv.h, cv.e, cv.w, cv.t_s, cv.n_s,
    ];
    if vals.iter().any(|v| !(*v > 0.0)) {
        return Err(SimError::Param("characteristic values must all be positive".into()));
    }
    let eps = cv.u_f / (cv.p_f / cv.rho_f).sqrt();
    let nu = cv.nu_f / (cv.rho_f * cv.u_f * cv.l);
    let u_s = cv.w / cv.t_s;
    let dyn_p = cv.rho_f * cv.u_f * cv.u_f;
    let ratios = [
        cv.rho_s * u_s * u_s / dyn_p,
        cv.w.powi(4) * cv.e / (cv.l.powi(4) * dyn_p),
        cv.w * cv.n_s / (cv.l * cv.l * cv.t_s * dyn_p),
    ];
    let warn = ratios.iter().any(|r| (r - 1.0).abs() > 0.1);
    Ok(NondimReport { eps, nu, structural_ratios: ratios, warn_unbalanced: warn })
}

/// Where a reference solution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceProvider {
    ProxyRun,
    Manufactured,
}

/// One recorded frame of the reference solution on its (fine) grid.
#[derive(Debug, Clone)]
pub struct RefFrame {
    pub t: f64,
    pub v: VectorField,
    /// Reference-frame time derivative of the pulled-back velocity.
    pub dt_v: VectorField,
    /// Pressure fluctuation `(p(rho) - p(rho_bar)) / eps0^2`.
    pub pi: ScalarField,
    pub eta: Vec<f64>,
    pub eta_t: Vec<f64>,
    pub eta_tt: Vec<f64>,
}

/// Reference solution sampled over output times.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub provider: ReferenceProvider,
    pub grid: Arc<Grid>,
    /// Refinement factor of the reference grid over the sweep grid.
    pub refine: usize,
    pub frames: Vec<RefFrame>,
    /// Largest flux-consistent divergence defect after projection.
    pub projection_defect: f64,
    /// Largest divergence defect before projection, for scale.
    pub raw_divergence: f64,
}

/// Specification of the proxy reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub eps0: f64,
    pub nu0: f64,
    pub refine: usize,
}

/// Runs the compressible solver at `(eps0, nu0)` on a grid refined by
/// `refine`, projects the velocity to the discretely divergence-free space,
/// and records the fields a comparison triple needs.
pub fn reference_proxy(base: &RunConfig, spec: &ReferenceSpec) -> Result<ReferenceSolution> {
    if spec.refine < 1 {
        return Err(SimError::Param("refinement factor must be >= 1".into()));
    }
    let min_eps = base.params.eps;
    if spec.eps0 > min_eps / 4.0 + 1e-15 {
        return Err(SimError::Param(format!(
            "proxy eps0 = {} must be at most a quarter of the smallest sweep eps = {min_eps}",
            spec.eps0
        )));
    }
    let fine_grid = Grid {
        nx: base.grid.nx * spec.refine,
        nz: (base.grid.nz - 1) * spec.refine + 1,
        ny: None,
        period: base.grid.period,
    };
    let cfg = RunConfig {
        params: Params { eps: spec.eps0, nu: spec.nu0, ..base.params },
        grid: fine_grid,
        ..base.clone()
    };
    let traj = run(&cfg)?;
    let grid = traj.snapshots[0].state.grid().clone();
    let sp = PlateSpectral::new(grid.nx, grid.period);

    let mut frames = Vec::with_capacity(traj.snapshots.len());
    let mut worst_defect: f64 = 0.0;
    let mut worst_raw: f64 = 0.0;
    for snap in &traj.snapshots {
        let s = &snap.state;
        let map = FlatMap::build(&grid, &s.w, &s.w_t, cfg.params.contact_floor)?;
        let raw = divergence_physical(&s.u_hat, &map).max_abs();
        worst_raw = worst_raw.max(raw);
        let (v, defect) = project_divergence_free(&s.u_hat, &map, &grid)?;
        worst_defect = worst_defect.max(defect);
        let rhs = fluid_rhs(s, &map, &cfg.params, &cfg.coupling)?;
        let (load, _) = compute_plate_load(s, &map, &cfg.params, None)?;
        let eta_tt = plate_acceleration(&s.w, &s.w_t, &load, &cfg.params, &sp);
        let p_ref = pressure(cfg.params.rho_bar, &cfg.params)?;
        let inv_eps0_sq = 1.0 / (spec.eps0 * spec.eps0);
        let pi = s
            .rho_hat
            .map(|r| (r.powf(cfg.params.gamma) - p_ref) * inv_eps0_sq);
        frames.push(RefFrame {
            t: s.t,
            v,
            dt_v: rhs.d_u,
            pi,
            eta: s.w.clone(),
            eta_t: s.w_t.clone(),
            eta_tt,
        });
    }
    Ok(ReferenceSolution {
        provider: ReferenceProvider::ProxyRun,
        grid,
        refine: spec.refine,
        frames,
        projection_defect: worst_defect,
        raw_divergence: worst_raw,
    })
}

/// One pressure-Poisson projection `v <- v - grad phi` with
/// `div grad phi = div v` in the node-centered discrete operators.
///
/// The correction potential is found by defect correction on the node
/// operator, preconditioned by a compact five-point solve with the diagonal
/// part of the metric (symmetric positive definite, solved by conjugate
/// gradients). Null components of the node operator are filtered from the
/// right side; whatever lives in them is reported in the residual defect.
pub fn project_divergence_free(
    v: &VectorField,
    map: &FlatMap,
    grid: &Arc<Grid>,
) -> Result<(VectorField, f64)> {
    let mut rhs = divergence_physical(v, map);
    remove_null_components(&mut rhs, grid);
    let mut phi = ScalarField::zeros(grid);
    let rhs_scale = max_abs(&rhs).max(1e-300);
    let mut best = f64::INFINITY;
    let mut stagnant = 0;
    for _ in 0..200 {
        let mut res = rhs.clone();
        let lphi = apply_poisson(&phi, map);
        for (r, l) in res.data_mut().iter_mut().zip(lphi.data()) {
            *r -= l;
        }
        remove_null_components(&mut res, grid);
        let rn = max_abs(&res);
        if rn < best * 0.995 {
            best = rn;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 3 {
                break;
            }
        }
        if rn < 1e-11 * rhs_scale {
            break;
        }
        let delta = cg_compact(&res, map, grid, 1e-6, 600);
        for (p, d) in phi.data_mut().iter_mut().zip(delta.data()) {
            *p += d;
        }
    }
    if !phi.all_finite() {
        return Err(SimError::Param("divergence projection produced non-finite values".into()));
    }
    let gphi = scalar_gradient_physical(&phi, map);
    let mut out = v.clone();
    for (o, g) in out.data_mut().iter_mut().zip(gphi.data()) {
        o[0] -= g[0];
        o[1] -= g[1];
    }
    let defect = divergence_physical(&out, map).max_abs();
    Ok((out, defect))
}

fn max_abs(f: &ScalarField) -> f64 {
    f.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Removes the discrete null components of the wide divergence-gradient
/// operator from a right-hand side: the mean and the horizontal Nyquist
/// column.
fn remove_null_components(f: &mut ScalarField, grid: &Arc<Grid>) {
    let mut total = 0.0;
    let mut vol = 0.0;
    for j in 0..grid.nz {
        let w = grid.weight(j);
        for i in 0..grid.nx {
            total += w * f.at(i, j);
            vol += w;
        }
    }
    let mean = total / vol;
    for v in f.data_mut() {
        *v -= mean;
    }
    if grid.nx % 2 == 0 {
        // Zero the x-Nyquist mode row by row.
        for j in 0..grid.nz {
            let mut c = 0.0;
            for i in 0..grid.nx {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                c += sign * f.at(i, j);
            }
            c /= grid.nx as f64;
            for i in 0..grid.nx {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                *f.at_mut(i, j) -= sign * c;
            }
        }
    }
}

fn apply_poisson(phi: &ScalarField, map: &FlatMap) -> ScalarField {
    divergence_physical(&scalar_gradient_physical(phi, map), map)
}

/// Compact five-point operator with the diagonal metric coefficients
/// `K11 = J`, `K22 = (1 + z^2 w_x^2)/J` and zero wall fluxes. Symmetric
/// positive semidefinite in the cell-volume inner product.
fn apply_compact(phi: &ScalarField, map: &FlatMap, grid: &Arc<Grid>) -> ScalarField {
    let (nx, nz) = (grid.nx, grid.nz);
    let hx = grid.hx();
    let hz = grid.hz();
    let mut out = ScalarField::zeros(grid);
    for j in 0..nz {
        let dzc = grid.dz_cell(j);
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = (i + nx - 1) % nx;
            let k11p = 0.5 * (map.jacobian(i) + map.jacobian(ip));
            let k11m = 0.5 * (map.jacobian(i) + map.jacobian(im));
            let fxp = k11p * (phi.at(ip, j) - phi.at(i, j)) / hx;
            let fxm = k11m * (phi.at(i, j) - phi.at(im, j)) / hx;
            let k22 = |zf: f64| {
                let wx = map.slope(i);
                (1.0 + zf * zf * wx * wx) / map.jacobian(i)
            };
            let fzp = if j + 1 < nz {
                let zf = (grid.z(j) + grid.z(j + 1)) * 0.5;
                k22(zf) * (phi.at(i, j + 1) - phi.at(i, j)) / hz
            } else {
                0.0
            };
            let fzm = if j > 0 {
                let zf = (grid.z(j - 1) + grid.z(j)) * 0.5;
                k22(zf) * (phi.at(i, j) - phi.at(i, j - 1)) / hz
            } else {
                0.0
            };
            *out.at_mut(i, j) = (fxp - fxm) / hx + (fzp - fzm) / dzc;
        }
    }
    out
}

/// Conjugate gradients solving `L_compact x = rhs` through the positive
/// definite operator `-L_compact`, to a relative residual tolerance.
fn cg_compact(
    rhs: &ScalarField,
    map: &FlatMap,
    grid: &Arc<Grid>,
    rel_tol: f64,
    max_iter: usize,
) -> ScalarField {
    let dotw = |a: &ScalarField, b: &ScalarField| -> f64 {
        let mut s = 0.0;
        for j in 0..grid.nz {
            let w = grid.weight(j);
            for i in 0..grid.nx {
                s += w * a.at(i, j) * b.at(i, j);
            }
        }
        s
    };
    let apply_pd = |phi: &ScalarField| -> ScalarField {
        let mut out = apply_compact(phi, map, grid);
        for v in out.data_mut() {
            *v = -*v;
        }
        out
    };
    let mut x = ScalarField::zeros(grid);
    let mut r = rhs.map(|v| -v);
    let mut p = r.clone();
    let mut rr = dotw(&r, &r);
    let target = rel_tol * rel_tol * rr.max(1e-300);
    for _ in 0..max_iter {
        if rr <= target {
            break;
        }
        let ap = apply_pd(&p);
        let pap = dotw(&p, &ap);
        if pap <= 1e-300 {
            break;
        }
        let alpha = rr / pap;
        for k in 0..grid.len() {
            x.data_mut()[k] += alpha * p.data()[k];
            r.data_mut()[k] -= alpha * ap.data()[k];
        }
        let rr_new = dotw(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..grid.len() {
            p.data_mut()[k] = r.data()[k] + beta * p.data()[k];
        }
    }
    x
}

/// The transformed forcing groups of the reference system on the current
/// moving domain, with norms of both sides of the forcing bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcingRecord {
    /// `rho_bar J A (dt Psi . grad vtilde)`
    pub advect_mesh_l2: f64,
    /// `rho_bar dt(J A) vtilde`
    pub dt_ja_l2: f64,
    /// `rho_bar (v . grad (J A)) vtilde`
    pub grad_ja_l2: f64,
    /// `rho_bar (J - 1) J A (vtilde . grad vtilde)`
    pub jac_defect_l2: f64,
    /// `(grad Psi - I) grad Pi`
    pub metric_pressure_l2: f64,
    /// `L^2` norm of the total forcing.
    pub total_l2: f64,
    /// Plate-difference seminorm bounding the forcing: sum of the
    /// `L^2(Gamma)` norms of `grad(w_t - eta_t)`, `w_t - eta_t`,
    /// `Delta(w - eta)`.
    pub plate_difference_norm: f64,
}

/// Restriction of a fine-grid frame onto the coarse grid by exact
/// subsampling (the grids nest).
fn restrict_scalar(f: &ScalarField, coarse: &Arc<Grid>, r: usize) -> ScalarField {
    let mut out = ScalarField::zeros(coarse);
    for j in 0..coarse.nz {
        for i in 0..coarse.nx {
            *out.at_mut(i, j) = f.at(i * r, j * r);
        }
    }
    out
}

fn restrict_vector(f: &VectorField, coarse: &Arc<Grid>, r: usize) -> VectorField {
    let mut out = VectorField::zeros(coarse);
    for j in 0..coarse.nz {
        for i in 0..coarse.nx {
            *out.at_mut(i, j) = f.at(i * r, j * r);
        }
    }
    out
}

fn restrict_plate(f: &[f64], coarse_nx: usize, r: usize) -> Vec<f64> {
    (0..coarse_nx).map(|i| f[i * r]).collect()
}

/// Builds the admissible comparison triple `(rho_bar, Piola(vtilde), eta)`
/// for the state's domain, plus the transformed forcing diagnostics.
pub fn transform_reference(
    reference: &ReferenceSolution,
    state: &State,
    params: &Params,
) -> Result<(TestTriple, ForcingRecord)> {
    let grid = state.grid().clone();
    let r = reference.refine;
    let frame = reference
        .frames
        .iter()
        .find(|f| (f.t - state.t).abs() < 1e-9)
        .ok_or_else(|| {
            SimError::Param(format!("reference has no frame at t = {}", state.t))
        })?;

    let v_c = restrict_vector(&frame.v, &grid, r);
    let dtv_c = restrict_vector(&frame.dt_v, &grid, r);
    let pi_c = restrict_scalar(&frame.pi, &grid, r);
    let eta = restrict_plate(&frame.eta, grid.nx, r);
    let eta_t = restrict_plate(&frame.eta_t, grid.nx, r);
    let eta_tt = restrict_plate(&frame.eta_tt, grid.nx, r);

    let psi = compose_psi(&grid, &state.w, &state.w_t, &eta, &eta_t, 1e-9)?;
    let u = piola_transform(&v_c, &psi)?;

    // Reference-frame time derivative of the pulled-back Piola field:
    // dt(JA)|ref * vtilde + JA * dt vtilde.
    let mut dt_u = VectorField::zeros(&grid);
    for j in 0..grid.nz {
        for i in 0..grid.nx {
            let ja = psi.jac_times_inv_idx(i, j);
            let dja = dt_jac_inv_ref(&psi, state, &eta_t, i, j, &grid);
            let a = matvec2(dja, v_c.at(i, j));
            let b = matvec2(ja, dtv_c.at(i, j));
            *dt_u.at_mut(i, j) = [a[0] + b[0], a[1] + b[1]];
        }
    }

    let triple = TestTriple {
        r: ScalarField::constant(&grid, params.rho_bar),
        dt_r: ScalarField::zeros(&grid),
        u,
        dt_u,
        w: eta.clone(),
        w_t: eta_t.clone(),
        w_tt: eta_tt,
    };

    let forcing = forcing_record(&psi, state, &v_c, &pi_c, &eta, &eta_t, params)?;
    Ok((triple, forcing))
}

/// `d/dt (J A)` of the composed map at a fixed reference node, which tracks
/// the source-map motion as well.
fn dt_jac_inv_ref(
    psi: &ComposedMap,
    state: &State,
    eta_t: &[f64],
    i: usize,
    j: usize,
    grid: &Arc<Grid>,
) -> crate::la::Mat2 {
    // J A = [[s, 0], [-zhat (1 + w) s_x, 1]]; at fixed (xhat, zhat) the time
    // derivative needs dt s, dt s_x and w_t.
    let _ = eta_t;
    let zhat = grid.z(j);
    let dt = psi.dt_entries(i);
    let w_t = state.w_t[i];
    let one_w = 1.0 + state.w[i];
    [[dt.0, 0.0], [-zhat * (w_t * dt.2 + one_w * dt.1), 0.0]]
}

fn forcing_record(
    psi: &ComposedMap,
    state: &State,
    v_c: &VectorField,
    pi_c: &ScalarField,
    eta: &[f64],
    eta_t: &[f64],
    params: &Params,
) -> Result<ForcingRecord> {
    let grid = state.grid().clone();
    let rb = params.rho_bar;
    // Physical gradients of vtilde and Pi on the target domain, pulled back.
    let eta_map = FlatMap::build(&grid, eta, eta_t, 1e-9)?;
    let grad_v = gradient_physical(v_c, &eta_map);
    let grad_pi = scalar_gradient_physical(pi_c, &eta_map);
    let u = piola_transform(v_c, psi)?;

    let jw = {
        let mut f = ScalarField::zeros(&grid);
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                *f.at_mut(i, j) = 1.0 + state.w[i];
            }
        }
        f
    };
    let mut sq = [ScalarField::zeros(&grid), ScalarField::zeros(&grid), ScalarField::zeros(&grid), ScalarField::zeros(&grid), ScalarField::zeros(&grid), ScalarField::zeros(&grid)];
    for j in 0..grid.nz {
        for i in 0..grid.nx {
            let ja = psi.jac_times_inv_idx(i, j);
            let dpsi = psi.dt_psi_idx(i, j);
            let gv = grad_v.at(i, j);
            let vt = v_c.at(i, j);
            // advective mesh term
            let conv = [
                dpsi[0] * gv[0][0] + dpsi[1] * gv[0][1],
                dpsi[0] * gv[1][0] + dpsi[1] * gv[1][1],
            ];
            let g1 = matvec2(ja, conv);
            let g1 = [rb * g1[0], rb * g1[1]];
            // dt(JA) at fixed physical point
            let dja = psi.dt_jac_inv_idx(i, j);
            let g2v = matvec2(dja, vt);
            let g2 = [rb * g2v[0], rb * g2v[1]];
            // v . grad (JA)
            let grads = psi.grad_jac_inv_idx(i, j);
            let uu = u.at(i, j);
            let vg = [
                [
                    uu[0] * grads[0][0][0] + uu[1] * grads[1][0][0],
                    uu[0] * grads[0][0][1] + uu[1] * grads[1][0][1],
                ],
                [
                    uu[0] * grads[0][1][0] + uu[1] * grads[1][1][0],
                    uu[0] * grads[0][1][1] + uu[1] * grads[1][1][1],
                ],
            ];
            let g3v = matvec2(vg, vt);
            let g3 = [rb * g3v[0], rb * g3v[1]];
            // (J - 1) J A (vtilde . grad vtilde)
            let sd = [
                vt[0] * gv[0][0] + vt[1] * gv[0][1],
                vt[0] * gv[1][0] + vt[1] * gv[1][1],
            ];
            let g4v = matvec2(ja, sd);
            let jm1 = psi.jacobian(i) - 1.0;
            let g4 = [rb * jm1 * g4v[0], rb * jm1 * g4v[1]];
            // (grad Psi - I) grad Pi
            let gpsi = psi.grad_psi_idx(i, j);
            let gp = grad_pi.at(i, j);
            let g5 = [
                (gpsi[0][0] - 1.0) * gp[0] + gpsi[0][1] * gp[1],
                gpsi[1][0] * gp[0] + (gpsi[1][1] - 1.0) * gp[1],
            ];
            let tot = [
                g1[0] + g2[0] + g3[0] + g4[0] + g5[0],
                g1[1] + g2[1] + g3[1] + g4[1] + g5[1],
            ];
            *sq[0].at_mut(i, j) = dot2(g1, g1);
            *sq[1].at_mut(i, j) = dot2(g2, g2);
            *sq[2].at_mut(i, j) = dot2(g3, g3);
            *sq[3].at_mut(i, j) = dot2(g4, g4);
            *sq[4].at_mut(i, j) = dot2(g5, g5);
            *sq[5].at_mut(i, j) = dot2(tot, tot);
        }
    }
    let l2 = |f: &ScalarField| -> Result<f64> {
        Ok(crate::grid::integrate_reference(f, &jw)?.max(0.0).sqrt())
    };

    let sp = PlateSpectral::new(grid.nx, grid.period);
    let dwt: Vec<f64> = state.w_t.iter().zip(eta_t).map(|(a, b)| a - b).collect();
    let dw: Vec<f64> = state.w.iter().zip(eta).map(|(a, b)| a - b).collect();
    let lap = sp.laplacian(&dw);
    let lap_sq: Vec<f64> = lap.iter().map(|v| v * v).collect();
    let wt_sq: Vec<f64> = dwt.iter().map(|v| v * v).collect();
    let plate_norm = sp.grad_norm_sq(&dwt).sqrt()
        + crate::grid::integrate_plate(&wt_sq, grid.hx()).sqrt()
        + crate::grid::integrate_plate(&lap_sq, grid.hx()).sqrt();

    Ok(ForcingRecord {
        advect_mesh_l2: l2(&sq[0])?,
        dt_ja_l2: l2(&sq[1])?,
        grad_ja_l2: l2(&sq[2])?,
        jac_defect_l2: l2(&sq[3])?,
        metric_pressure_l2: l2(&sq[4])?,
        total_l2: l2(&sq[5])?,
        plate_difference_norm: plate_norm,
    })
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub nu: f64,
    pub sup_rel_energy: f64,
    pub terminal_rel_energy: f64,
    pub initial_rel_energy: f64,
    pub status: String,
    /// Largest relative energy-inequality violation of the row's run.
    pub energy_violation: f64,
    /// Discrete surrogates of `max_t || grad w ||_{W^{1,p}}` for
    /// `p in {4, 2 gamma/(gamma-1)}`.
    pub surrogate_norms: [f64; 2],
}

/// Least-squares fit of `log(sup E - floor)` against `log(eps + nu)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub fit: RateFit,
    /// Discrimination floor: the proxy compared to itself on the sweep grid.
    pub floor: f64,
    pub projection_defect: f64,
    /// Reference divergence defect before projection, for scale.
    pub raw_divergence: f64,
}

/// Sweep specification. `pairs` lists the `(eps, nu)` grid explicitly, so a
/// diagonal and a fixed-`nu` column are both just lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub pairs: Vec<(f64, f64)>,
    pub reference: ReferenceSpec,
    pub workers: usize,
    /// Rows whose energy violation exceeds this saturate and leave the fit.
    pub energy_tol: f64,
}

/// Runs the sweep: one run per `(eps, nu)` pair, each compared to the
/// transformed reference triple; fits the convergence rate above the
/// measured discrimination floor. Row failures are recorded, not fatal.
pub fn sweep(base: &RunConfig, spec: &SweepSpec) -> Result<SweepTable> {
    if spec.pairs.is_empty() {
        return Err(SimError::Param("sweep needs at least one (eps, nu) pair".into()));
    }
    let min_eps = spec.pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let base_for_ref = RunConfig {
        params: Params { eps: min_eps, ..base.params },
        ..base.clone()
    };
    let reference = reference_proxy(&base_for_ref, &spec.reference)?;

    // Discrimination floor: the proxy parameters run on the sweep grid.
    let floor = {
        let row = evaluate_row(base, &reference, spec.reference.eps0, spec.reference.nu0)?;
        row.sup_rel_energy
    };

    let n = spec.pairs.len();
    let results: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; n]);
    let workers = spec.workers.max(1).min(n);
    std::thread::scope(|scope| {
        for wkr in 0..workers {
            let results = &results;
            let reference = &reference;
            let pairs = &spec.pairs;
            scope.spawn(move || {
                let mut idx = wkr;
                while idx < n {
                    let (eps, nu) = pairs[idx];
                    let row = match evaluate_row(base, reference, eps, nu) {
                        Ok(r) => r,
                        Err(e) => SweepRow {
                            eps,
                            nu,
                            sup_rel_energy: f64::NAN,
                            terminal_rel_energy: f64::NAN,
                            initial_rel_energy: f64::NAN,
                            status: format!("failed: {e}"),
                            energy_violation: f64::NAN,
                            surrogate_norms: [f64::NAN; 2],
                        },
                    };
                    results.lock().unwrap()[idx] = Some(row);
                    idx += workers;
                }
            });
        }
    });
    let rows: Vec<SweepRow> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("all rows evaluated"))
        .collect();

    let fit = fit_rows(&rows, floor, spec.energy_tol);
    Ok(SweepTable {
        rows,
        fit,
        floor,
        projection_defect: reference.projection_defect,
        raw_divergence: reference.raw_divergence,
    })
}

fn evaluate_row(
    base: &RunConfig,
    reference: &ReferenceSolution,
    eps: f64,
    nu: f64,
) -> Result<SweepRow> {
    let cfg = RunConfig {
        params: Params { eps, nu, ..base.params },
        ..base.clone()
    };
    let traj = run(&cfg)?;
    let grid = traj.snapshots[0].state.grid().clone();
    let sp = PlateSpectral::new(grid.nx, grid.period);
    let mut sup = f64::NEG_INFINITY;
    let mut first = 0.0;
    let mut last = 0.0;
    let mut surro: [f64; 2] = [0.0; 2];
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let (triple, _) = transform_reference(reference, &snap.state, &cfg.params)?;
        let e = relative_energy(&snap.state, &triple, &cfg.params, &sp)?;
        if k == 0 {
            first = e;
        }
        sup = sup.max(e);
        last = e;
        let sn = surrogate_norms(&snap.state, &grid, cfg.params.gamma);
        surro[0] = surro[0].max(sn[0]);
        surro[1] = surro[1].max(sn[1]);
    }
    Ok(SweepRow {
        eps,
        nu,
        sup_rel_energy: sup,
        terminal_rel_energy: last,
        initial_rel_energy: first,
        status: "ok".into(),
        energy_violation: traj.max_energy_violation,
        surrogate_norms: surro,
    })
}

/// Discrete surrogate of `|| grad w ||_{W^{1,p}(Gamma)}` for the two
/// exponents the regularity hypothesis involves.
fn surrogate_norms(state: &State, grid: &Arc<Grid>, gamma: f64) -> [f64; 2] {
    let hx = grid.hx();
    let wx = crate::stencil::ddx_periodic(&state.w, hx);
    let wxx = crate::stencil::ddx_periodic(&wx, hx);
    let mut out = [0.0; 2];
    for (slot, p) in [(0usize, 4.0), (1usize, (2.0 * gamma / (gamma - 1.0)).max(4.0))] {
        let mut s = 0.0;
        for i in 0..grid.nx {
            s += (wx[i].abs().powf(p) + wxx[i].abs().powf(p)) * hx;
        }
        out[slot] = s.powf(1.0 / p);
    }
    out
}

fn fit_rows(rows: &[SweepRow], floor: f64, energy_tol: f64) -> RateFit {
    let max_eps = rows
        .iter()
        .filter(|r| r.status == "ok")
        .map(|r| r.eps)
        .fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.status == "ok")
        .filter(|r| !(r.eps == max_eps && r.energy_violation > energy_tol))
        .filter_map(|r| {
            let above = r.sup_rel_energy - floor;
            if above > 0.0 {
                Some(((r.eps + r.nu).ln(), above.ln()))
            } else {
                None
            }
        })
        .collect();
    if pts.len() < 2 {
        return RateFit { slope: f64::NAN, intercept: f64::NAN, residual: f64::NAN, points: pts.len() };
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    RateFit { slope, intercept, residual, points: pts.len() }
}

/// Runs a fixed-`nu` column over `eps_list` and reports the uniform-bound
/// surrogates per row alongside the initial energy, for the
/// residual-density scaling experiment.
pub fn uniform_bounds_sweep(
    base: &RunConfig,
    eps_list: &[f64],
    nu: f64,
) -> Result<Vec<(f64, crate::diagnostics::UniformBoundsReport, f64)>> {
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let cfg = RunConfig {
            params: Params { eps, nu, ..base.params },
            ..base.clone()
        };
        let traj = run(&cfg)?;
        let states = traj.states();
        let rep = crate::diagnostics::uniform_bounds_report(&states, &cfg.params)?;
        let sup_energy = traj
            .snapshots
            .iter()
            .map(|s| s.energy.total())
            .fold(f64::NEG_INFINITY, f64::max);
        out.push((eps, rep, sup_energy));
    }
    Ok(out)
}

/// Self-convergence of the artificial-pressure limit: pairwise terminal
/// differences along a decreasing `delta` sequence.
pub fn artificial_pressure_study(base: &RunConfig, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if deltas.len() < 2 {
        return Err(SimError::Param("need at least two delta values".into()));
    }
    let mut finals: Vec<(f64, State)> = Vec::new();
    for &delta in deltas {
        let cfg = RunConfig {
            params: Params { delta, ..base.params },
            ..base.clone()
        };
        let traj = run(&cfg)?;
        finals.push((delta, traj.final_state().clone()));
    }
    let mut out = Vec::new();
    for k in 0..finals.len() - 1 {
        let d = finals[k].1.distance_inf(&finals[k + 1].1);
        out.push((finals[k].0, d));
    }
    Ok(out)
}

/// Penalty-rate study: time-integrated kinematic mismatch per kappa.
pub fn penalty_rate_study(base: &RunConfig, kappas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for &kappa in kappas {
        let cfg = RunConfig { coupling: Coupling::Penalty { kappa }, ..base.clone() };
        let traj = run(&cfg)?;
        let last = traj.snapshots.last().unwrap();
        out.push((kappa, last.energy.dissipation.mismatch_sq_dt.sqrt()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nondimensionalization_formulas() {
        let cv = CharacteristicValues {
            u_f: 1.0,
            p_f: 100.0,
            rho_f: 1.0,
            l: 1.0,
            nu_f: 0.01,
            rho_s: 1.0,
            h: 1.0,
            e: 1.0,
            w: 1.0,
            t_s: 1.0,
            n_s: 1.0,
        };
        let rep = nondimensionalize(&cv).unwrap();
        assert!((rep.eps - 0.1).abs() < 1e-14);
        assert!((rep.nu - 0.01).abs() < 1e-14);
    }

    #[test]
    fn balanced_normalization_emits_no_warning() {
        // U_s = W / T_s = 1; all three ratios equal one by construction.
        let cv = CharacteristicValues {
            u_f: 1.0,
            p_f: 25.0,
            rho_f: 1.0,
            l: 1.0,
            nu_f: 0.05,
            rho_s: 1.0,
            h: 1.0,
            e: 1.0,
            w: 1.0,
            t_s: 1.0,
            n_s: 1.0,
        };
        let rep = nondimensionalize(&cv).unwrap();
        assert!(!rep.warn_unbalanced, "ratios {:?}", rep.structural_ratios);
        for r in rep.structural_ratios {
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonpositive_values() {
        let cv = CharacteristicValues {
            u_f: -1.0,
            p_f: 1.0,
            rho_f: 1.0,
            l: 1.0,
            nu_f: 1.0,
            rho_s: 1.0,
            h: 1.0,
            e: 1.0,
            w: 1.0,
            t_s: 1.0,
            n_s: 1.0,
        };
        assert!(nondimensionalize(&cv).is_err());
    }
}

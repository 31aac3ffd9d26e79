//! Self-contained property suites behind the `check` command, plus the
//! canned configurations the verification experiments run on. Each line
//! reports the measured value, the gate it is held to, and the verdict.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::diagnostics::energy_inequality_check;
use crate::error::Result;
use crate::geometry::{
    compose_psi, divergence_physical, piola_identity_residual, piola_transform, FlatMap,
};
use crate::grid::{Grid, VectorField};
use crate::la::{dot2, hadamard_bound_holds};
use crate::params::{Coupling, Params};
use crate::plate::{mode_oracle, plate_energy, plate_step, PlateLoad};
use crate::profiles::{DensityProfile, InitialSpec, PlateProfile, VelocityProfile};
use crate::scheme::{run, DtPolicy, RunConfig};
use crate::spectral::PlateSpectral;

/// One assertion of a suite: measured value against its gate.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub gate: String,
    pub pass: bool,
}

impl CheckLine {
    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> CheckLine {
        CheckLine {
            name: name.into(),
            value,
            gate: format!(">= {bound}"),
            pass: value >= bound,
        }
    }

    fn below(name: impl Into<String>, value: f64, bound: f64) -> CheckLine {
        CheckLine {
            name: name.into(),
            value,
            gate: format!("< {bound}"),
            pass: value < bound,
        }
    }
}

/// Random trigonometric polynomial with an analytic derivative, bounded in
/// the sup norm.
#[derive(Debug, Clone)]
pub struct TrigPoly {
    terms: Vec<(f64, f64, f64)>,
}

impl TrigPoly {
    pub fn random(rng: &mut impl Rng, sup_bound: f64) -> TrigPoly {
        let n = rng.gen_range(1..=3);
        let mut terms: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                (
                    rng.gen_range(0.2..1.0),
                    rng.gen_range(1..4) as f64,
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let total: f64 = terms.iter().map(|t| t.0).sum();
        for t in &mut terms {
            t.0 *= sup_bound / total;
        }
        TrigPoly { terms }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, m, p)| a * (m * x + p).cos()).sum()
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, m, p)| -a * m * (m * x + p).sin()).sum()
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.nx).map(|i| self.eval(grid.x(i))).collect()
    }
}

/// Geometry orders for one random displacement pair over three grid
/// halvings: Piola identity residual, divergence preservation, and the
/// normal-transformation law measured against the analytic target trace.
fn geometry_orders(w: &TrigPoly, eta: &TrigPoly) -> Result<(f64, f64, f64, f64)> {
    let mut res = Vec::new();
    let mut div = Vec::new();
    let mut nor = Vec::new();
    let mut inverse_defect: f64 = 0.0;
    for n in [64usize, 128, 256, 512] {
        let g = Arc::new(Grid::standard(n, n / 2 + 1)?);
        let zero = vec![0.0; g.nx];
        let ws = w.sample(&g);
        let es = eta.sample(&g);
        let psi = compose_psi(&g, &ws, &zero, &es, &zero, 0.01)?;
        let src = FlatMap::build(&g, &ws, &zero, 0.01)?;
        let tgt = FlatMap::build(&g, &es, &zero, 0.01)?;
        res.push(piola_identity_residual(&psi, &src));

        // Solenoidal target field from a stream function, sampled through
        // the analytic target map.
        let mut vt = VectorField::zeros(&g);
        for j in 0..g.nz {
            for i in 0..g.nx {
                let x = g.x(i);
                let z = g.z(j) * (1.0 + eta.eval(x));
                *vt.at_mut(i, j) = [-x.sin() * z.sin(), -x.cos() * z.cos()];
            }
        }
        let v = piola_transform(&vt, &psi)?;
        div.push(divergence_physical(&v, &src).max_abs());

        // Normal law against the analytic slope of the target.
        let jtop = g.nz - 1;
        let mut worst: f64 = 0.0;
        for i in 0..g.nx {
            let lhs = dot2(v.at(i, jtop), src.normal_weighted_idx(i));
            let x = g.x(i);
            let rhs = -eta.deriv(x) * vt.at(i, jtop)[0] + vt.at(i, jtop)[1];
            worst = worst.max((lhs - rhs).abs());
        }
        nor.push(worst);

        // Exact inverse of the flat map on grid images.
        let mut inv_worst: f64 = 0.0;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let p = src.forward_idx(i, j);
                let back = src.inverse(p[0], p[1]);
                inv_worst = inv_worst.max((back[0] - g.x(i)).abs()).max((back[1] - g.z(j)).abs());
            }
        }
        inverse_defect = inverse_defect.max(inv_worst);
        let _ = &tgt;
    }
    // Observed order: least-squares slope of log error against log h over
    // the three halvings.
    let order = |e: &[f64]| -> f64 {
        let n = e.len() as f64;
        let xs: Vec<f64> = (0..e.len()).map(|k| -(k as f64) * 2.0f64.ln()).collect();
        let ys: Vec<f64> = e.iter().map(|v| v.max(1e-300).ln()).collect();
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    Ok((order(&res), order(&div), order(&nor), inverse_defect))
}

/// Geometry property suite: identity orders and exact-map defects for a
/// batch of random displacement pairs.
pub fn geometry_suite(seed: u64, pairs: usize) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut min_res = f64::INFINITY;
    let mut min_div = f64::INFINITY;
    let mut min_nor = f64::INFINITY;
    let mut max_inv: f64 = 0.0;
    for _ in 0..pairs {
        let w = TrigPoly::random(&mut rng, 0.3);
        let eta = TrigPoly::random(&mut rng, 0.3);
        let (r, d, n, inv) = geometry_orders(&w, &eta)?;
        min_res = min_res.min(r);
        min_div = min_div.min(d);
        min_nor = min_nor.min(n);
        max_inv = max_inv.max(inv);
    }
    lines.push(CheckLine::at_least("piola identity residual order", min_res, 1.9));
    lines.push(CheckLine::at_least("divergence preservation order", min_div, 1.9));
    lines.push(CheckLine::at_least("normal transformation law order", min_nor, 1.9));
    lines.push(CheckLine::below("inverse composition defect", max_inv, 1e-10));

    // Hadamard bound at samples of a random map.
    let g = Arc::new(Grid::standard(48, 17)?);
    let w = TrigPoly::random(&mut rng, 0.3);
    let map = FlatMap::build(&g, &w.sample(&g), &vec![0.0; g.nx], 0.01)?;
    let mut ok = true;
    for j in 0..g.nz {
        for i in 0..g.nx {
            ok &= hadamard_bound_holds(map.gradient_idx(i, j));
        }
    }
    lines.push(CheckLine {
        name: "hadamard determinant bound".into(),
        value: if ok { 1.0 } else { 0.0 },
        gate: "holds at all samples".into(),
        pass: ok,
    });
    Ok(lines)
}

/// Plate oracle suite: energy drift of the undamped integrator, decay
/// against the closed-form two-root oracle, and critical damping.
pub fn plate_suite() -> Result<Vec<CheckLine>> {
    const TAU: f64 = std::f64::consts::TAU;
    let n = 64;
    let sp = PlateSpectral::new(n, TAU);
    let mut lines = Vec::new();

    // Undamped single mode over 1e3 steps.
    let p = Params { nu_s: 0.0, ..Params::default() };
    let k = 3.0;
    let mut w: Vec<f64> = (0..n).map(|i| 0.2 * (k * TAU * i as f64 / n as f64).sin()).collect();
    let mut wt = vec![0.0; n];
    let e0 = plate_energy(&w, &wt, &sp);
    for _ in 0..1000 {
        let (a, b) = plate_step(&w, &wt, &PlateLoad::zeros(n), 0.01, &p, &sp);
        w = a;
        wt = b;
    }
    let drift = ((plate_energy(&w, &wt, &sp) - e0) / e0).abs();
    lines.push(CheckLine::below("undamped energy drift over 1e3 steps", drift, 1e-10));

    // Damped modes against the eigenvalue oracle.
    let mut worst: f64 = 0.0;
    for &(knum, nu_s) in &[(1.0, 0.4), (2.0, 0.1), (4.0, 1.0), (3.0, 6.0)] {
        let pd = Params { nu_s, ..Params::default() };
        let w0: Vec<f64> = (0..n).map(|i| 0.1 * (knum * TAU * i as f64 / n as f64).cos()).collect();
        let wt0: Vec<f64> = (0..n).map(|i| 0.03 * (knum * TAU * i as f64 / n as f64).sin()).collect();
        let dt = 0.02;
        let mut wl = w0.clone();
        let mut wtl = wt0.clone();
        for _ in 0..50 {
            let (a, b) = plate_step(&wl, &wtl, &PlateLoad::zeros(n), dt, &pd, &sp);
            wl = a;
            wtl = b;
        }
        let m = knum as usize;
        let (we, ve) = mode_oracle(
            sp.forward(&w0)[m],
            sp.forward(&wt0)[m],
            knum,
            nu_s,
            Complex64::new(0.0, 0.0),
            50.0 * dt,
        );
        worst = worst
            .max((sp.forward(&wl)[m] - we).norm())
            .max((sp.forward(&wtl)[m] - ve).norm());
    }
    lines.push(CheckLine::below("damped decay vs closed-form roots", worst, 1e-8));

    // Damped energy monotone.
    let pd = Params { nu_s: 0.5, ..Params::default() };
    let mut wl: Vec<f64> = (0..n).map(|i| 0.1 * (TAU * i as f64 / n as f64).cos()).collect();
    let mut wtl = vec![0.0; n];
    let mut prev = plate_energy(&wl, &wtl, &sp);
    let mut incr: f64 = 0.0;
    for _ in 0..100 {
        let (a, b) = plate_step(&wl, &wtl, &PlateLoad::zeros(n), 0.03, &pd, &sp);
        wl = a;
        wtl = b;
        let e = plate_energy(&wl, &wtl, &sp);
        incr = incr.max(e - prev);
        prev = e;
    }
    lines.push(CheckLine::below("damped energy increase", incr, 1e-13));
    Ok(lines)
}

/// Canned pressure-pulse configuration used by the verification
/// experiments: a localized density perturbation at rest, strong coupling.
pub fn pulse_config() -> RunConfig {
    RunConfig {
        params: Params {
            gamma: 2.0,
            mu: 1.0,
            lambda: 0.0,
            nu: 0.05,
            eps: 0.1,
            nu_s: 0.1,
            alpha: 0.1,
            alpha0: 0.1,
            delta: 0.0,
            beta: 4.0,
            rho_bar: 1.0,
            dim: 2,
            contact_floor: 0.05,
        },
        grid: Grid { nx: 64, nz: 33, ny: None, period: std::f64::consts::TAU },
        initial: InitialSpec {
            rho1: DensityProfile::Bump { amplitude: 0.5 },
            velocity: VelocityProfile::Zero,
            w0: PlateProfile::Zero,
            w1: PlateProfile::Zero,
            d_bound: 1.0,
        },
        coupling: Coupling::Strong,
        t_final: 0.25,
        dt: DtPolicy::Cfl { factor: 0.5 },
        output_dt: 0.0125,
        strict_energy: false,
        energy_tol: 1e-3,
        wall_clock_budget_s: 1200.0,
    }
}

/// Canned singular-limit base configuration: a solenoidal vortex with the
/// plate initially flat, so the reference starts divergence free to
/// truncation error and the plate motion is pressure driven.
pub fn sweep_base_config() -> RunConfig {
    RunConfig {
        params: Params {
            eps: 0.1,
            nu: 0.1,
            nu_s: 0.1,
            alpha: 0.1,
            alpha0: 0.1,
            ..pulse_config().params
        },
        initial: InitialSpec {
            rho1: DensityProfile::Zero,
            velocity: VelocityProfile::Vortex { amplitude: 0.25 },
            w0: PlateProfile::Zero,
            w1: PlateProfile::Zero,
            d_bound: 1.0,
        },
        t_final: 0.4,
        output_dt: 0.05,
        ..pulse_config()
    }
}

/// Energy suite on the canned pulse run: inequality verdict at the given
/// tolerance plus mass conservation.
pub fn energy_suite(tol: f64) -> Result<Vec<CheckLine>> {
    let cfg = pulse_config();
    let traj = run(&cfg)?;
    let series = traj.energy_series();
    let check = energy_inequality_check(&series, tol);
    let mut lines = vec![CheckLine {
        name: "energy inequality max relative violation".into(),
        value: check.max_violation,
        gate: format!("< {tol}"),
        pass: check.pass,
    }];
    let m0 = series[0].mass;
    let drift = series
        .iter()
        .map(|r| ((r.mass - m0) / m0).abs())
        .fold(0.0f64, f64::max)
        / cfg.t_final;
    lines.push(CheckLine::below("mass drift per unit time", drift, 1e-10));
    Ok(lines)
}

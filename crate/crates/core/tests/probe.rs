// Temporary calibration probe; prints run diagnostics.
use slabfsi::diagnostics::energy_inequality_check;
use slabfsi::profiles::{DensityProfile, InitialSpec, PlateProfile, VelocityProfile};
use slabfsi::scheme::{run, DtPolicy, RunConfig};
use slabfsi::{Coupling, Grid, Params};

fn pulse_config() -> RunConfig {
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
        wall_clock_budget_s: 600.0,
    }
}

#[test]
#[ignore]
fn probe_pressure_pulse() {
    let cfg = pulse_config();
    let t0 = std::time::Instant::now();
    let traj = run(&cfg).expect("pulse run");
    println!("steps = {}, wall = {:?}", traj.steps, t0.elapsed());
    let series = traj.energy_series();
    let m0 = series[0].mass;
    for r in &series {
        println!(
            "t={:.4} E={:.6e} D={:.3e} mass_drift={:.3e} mism={:.3e} kin={:.3e} press={:.3e} pk={:.3e} pe={:.3e}",
            r.t,
            r.total(),
            r.dissipation.total(),
            (r.mass - m0) / m0,
            r.mismatch_l2,
            r.kinetic,
            r.pressure_potential,
            r.plate_kinetic,
            r.plate_elastic,
        );
    }
    let check = energy_inequality_check(&series, 1e-3);
    println!("max energy violation = {:.3e} at t = {}", check.max_violation, check.at_t);
}

#[test]
#[ignore]
fn probe_penalty() {
    for kappa in [1e-1, 1e-2, 1e-3, 1e-4] {
        let cfg = RunConfig {
            coupling: Coupling::Penalty { kappa },
            ..pulse_config()
        };
        let traj = run(&cfg).expect("penalty run");
        let last = traj.snapshots.last().unwrap();
        println!(
            "kappa={:.1e} steps={} mismatch_l2t={:.6e} pen_diss={:.3e} viol={:.3e}",
            kappa,
            traj.steps,
            last.energy.dissipation.mismatch_sq_dt.sqrt(),
            last.energy.dissipation.penalty,
            traj.max_energy_violation,
        );
    }
}

#[test]
#[ignore]
fn probe_sweep_row() {
    // Sweep-style run: vortex + plate displacement, strong coupling.
    let base = RunConfig {
        params: Params { eps: 0.1, nu: 0.1, nu_s: 0.1, alpha: 0.1, alpha0: 0.1, ..pulse_config().params },
        initial: InitialSpec {
            rho1: DensityProfile::Zero,
            velocity: VelocityProfile::Vortex { amplitude: 0.2 },
            w0: PlateProfile::Cos { amplitude: 0.05, mode: 2 },
            w1: PlateProfile::Zero,
            d_bound: 1.0,
        },
        t_final: 0.4,
        output_dt: 0.05,
        ..pulse_config()
    };
    for (eps, nu) in [(0.2, 0.2), (0.1, 0.1), (0.05, 0.05), (0.025, 0.025), (0.00625, 0.00625)] {
        let cfg = RunConfig {
            params: Params { eps, nu, ..base.params },
            ..base.clone()
        };
        let t0 = std::time::Instant::now();
        match run(&cfg) {
            Ok(traj) => {
                let last = traj.snapshots.last().unwrap();
                println!(
                    "eps={eps} nu={nu} steps={} wall={:?} E_end={:.4e} viol={:.3e} min_gap={:.3}",
                    traj.steps,
                    t0.elapsed(),
                    last.energy.total(),
                    traj.max_energy_violation,
                    last.state.min_gap(),
                );
            }
            Err(e) => println!("eps={eps} nu={nu} FAILED: {e}"),
        }
    }
}

#[test]
#[ignore]
fn probe_small_sweep() {
    use slabfsi::limits::{sweep, ReferenceSpec, SweepSpec};
    let base = RunConfig {
        params: Params { eps: 0.1, nu: 0.1, nu_s: 0.1, alpha: 0.1, alpha0: 0.1, ..pulse_config().params },
        grid: Grid { nx: 32, nz: 17, ny: None, period: std::f64::consts::TAU },
        initial: InitialSpec {
            rho1: DensityProfile::Zero,
            velocity: VelocityProfile::Vortex { amplitude: 0.2 },
            w0: PlateProfile::Zero,
            w1: PlateProfile::Zero,
            d_bound: 1.0,
        },
        t_final: 0.4,
        output_dt: 0.05,
        ..pulse_config()
    };
    let spec = SweepSpec {
        pairs: vec![(0.2, 0.2), (0.1, 0.1), (0.05, 0.05), (0.025, 0.025)],
        reference: ReferenceSpec { eps0: 0.00625, nu0: 0.00625, refine: 2 },
        workers: 2,
        energy_tol: 1e-3,
    };
    let t0 = std::time::Instant::now();
    let table = sweep(&base, &spec).expect("sweep");
    println!("sweep wall = {:?}", t0.elapsed());
    println!("floor = {:.4e}, proj defect = {:.3e}, raw div = {:.3e}", table.floor, table.projection_defect, table.raw_divergence);
    for r in &table.rows {
        println!(
            "eps={} nu={} sup={:.4e} init={:.4e} term={:.4e} status={}",
            r.eps, r.nu, r.sup_rel_energy, r.initial_rel_energy, r.terminal_rel_energy, r.status
        );
    }
    println!("fit: slope={:.3} intercept={:.3} residual={:.3e} pts={}", table.fit.slope, table.fit.intercept, table.fit.residual, table.fit.points);
}

#[test]
#[ignore]
fn probe_projection() {
    use slabfsi::geometry::{divergence_physical, FlatMap};
    use slabfsi::limits::project_divergence_free;
    use slabfsi::VectorField;
    use std::sync::Arc;
    let g = Arc::new(Grid::standard(64, 33).unwrap());
    let w: Vec<f64> = (0..g.nx).map(|i| 0.05 * (2.0 * g.x(i)).cos()).collect();
    let map = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
    // Solenoidal part plus a gradient part.
    let v = VectorField::from_fn(&g, |x, z| {
        let pi = std::f64::consts::PI;
        [
            pi * x.sin() * (pi * z).cos() + 0.1 * x.cos(),
            -x.cos() * (pi * z).sin() + 0.1 * (pi * z).sin() * pi * 0.05,
        ]
    });
    let raw = divergence_physical(&v, &map).max_abs();
    let t0 = std::time::Instant::now();
    let (_proj, defect) = project_divergence_free(&v, &map, &g).unwrap();
    println!("raw div = {raw:.4e}, post-projection defect = {defect:.4e}, wall = {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn probe_projection_history() {
    use slabfsi::geometry::{divergence_physical, scalar_gradient_physical, FlatMap};
    use slabfsi::{ScalarField, VectorField};
    use std::sync::Arc;
    let g = Arc::new(Grid::standard(64, 33).unwrap());
    let w: Vec<f64> = (0..g.nx).map(|i| 0.05 * (2.0 * g.x(i)).cos()).collect();
    let map = FlatMap::build(&g, &w, &vec![0.0; g.nx], 0.05).unwrap();
    let v = VectorField::from_fn(&g, |x, z| {
        let pi = std::f64::consts::PI;
        [
            pi * x.sin() * (pi * z).cos() + 0.1 * x.cos(),
            -x.cos() * (pi * z).sin() + 0.1 * (pi * z).sin() * pi * 0.05,
        ]
    });
    let rhs = divergence_physical(&v, &map);
    // Spectral content of the rhs in x at a few z rows, plus z profile of
    // the residual after removing smooth content.
    let probe_row = |f: &ScalarField, j: usize| -> (f64, f64) {
        let n = g.nx;
        let mut nyq = 0.0;
        let mut tot = 0.0;
        for i in 0..n {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            nyq += sign * f.at(i, j);
            tot = f64::max(tot, f.at(i, j).abs());
        }
        (nyq / n as f64, tot)
    };
    for j in [0, 1, g.nz / 2, g.nz - 2, g.nz - 1] {
        let (nyq, sup) = probe_row(&rhs, j);
        println!("rhs row {j}: xq-nyquist = {nyq:.3e}, sup = {sup:.3e}");
    }
    let gphi_probe = scalar_gradient_physical(&ScalarField::from_fn(&g, |x, z| x.sin() + z * z), &map);
    let _ = gphi_probe;
}

#[test]
#[ignore]
fn probe_rel_energy_inequality() {
    use rand::SeedableRng;
    use slabfsi::diagnostics::{
        energy_inequality_check, relative_energy_inequality, AnalyticTriple, TestTriple,
    };
    let cfg = pulse_config();
    let traj = run(&cfg).expect("pulse run");
    let views = traj.views();
    let grid = traj.snapshots[0].state.grid().clone();

    // Rest triple: must coincide with the energy check.
    let rest: Vec<TestTriple> = traj
        .snapshots
        .iter()
        .map(|_| TestTriple::rest(&grid, &cfg.params))
        .collect();
    let check = relative_energy_inequality(&views, &rest, &cfg.params, &cfg.coupling).unwrap();
    let energy = energy_inequality_check(&traj.energy_series(), 1e-3);
    println!(
        "rest-triple min slack = {:.6e}; energy max violation = {:.6e}; coincide diff = {:.3e}",
        check.min_slack,
        energy.max_violation,
        (check.min_slack + energy.max_violation).abs()
    );

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12345);
    for k in 0..10 {
        let fam = AnalyticTriple::random(&mut rng);
        let triples: Vec<TestTriple> = traj
            .snapshots
            .iter()
            .map(|s| fam.sample(s.state.t, &grid, &cfg.params))
            .collect();
        let check = relative_energy_inequality(&views, &triples, &cfg.params, &cfg.coupling).unwrap();
        println!("triple {k}: min slack = {:.6e}", check.min_slack);
    }
}

#[test]
#[ignore]
fn probe_rel_energy_detail() {
    use rand::SeedableRng;
    use slabfsi::diagnostics::{relative_energy_inequality, remainder_r, AnalyticTriple};
    use slabfsi::geometry::FlatMap;
    use slabfsi::spectral::PlateSpectral;
    let cfg = pulse_config();
    let traj = run(&cfg).expect("pulse run");
    let views = traj.views();
    let grid = traj.snapshots[0].state.grid().clone();
    let sp = PlateSpectral::new(grid.nx, grid.period);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let fam = AnalyticTriple::random(&mut rng);
    let triples: Vec<_> = traj
        .snapshots
        .iter()
        .map(|s| fam.sample(s.state.t, &grid, &cfg.params))
        .collect();
    let check = relative_energy_inequality(&views, &triples, &cfg.params, &cfg.coupling).unwrap();
    for (k, s) in check.slacks.iter().enumerate() {
        if k % 5 == 0 || k + 1 == check.slacks.len() {
            let st = &traj.snapshots[k].state;
            let map = FlatMap::build(&grid, &st.w, &st.w_t, 0.01).unwrap();
            let rem = remainder_r(st, &triples[k], &cfg.params, &map, &sp).unwrap();
            println!(
                "k={k} t={:.3} slack={:.4e} R={:.4e} [adv={:.2e} pdiv={:.2e} bp={:.2e} visc={:.2e} plate={:.2e} transp={:.2e}]",
                st.t, s, rem.total(), rem.advective, rem.pressure_div, rem.boundary_pressure,
                rem.viscous_cross, rem.plate_residual, rem.pprime_transport,
            );
        }
    }
    // Deliberately inadmissible triple: offset plate velocity.
    let bad: Vec<_> = triples
        .iter()
        .map(|t| {
            let mut b = t.clone();
            for v in &mut b.w_t {
                *v += 0.5;
            }
            b
        })
        .collect();
    let bad_check = relative_energy_inequality(&views, &bad, &cfg.params, &cfg.coupling).unwrap();
    println!("inadmissible min slack = {:.4e}", bad_check.min_slack);
}

#[test]
#[ignore]
fn probe_delta_sweep() {
    use slabfsi::limits::artificial_pressure_study;
    let base = RunConfig {
        params: Params { beta: 4.0, ..pulse_config().params },
        t_final: 0.1,
        output_dt: 0.0,
        ..pulse_config()
    };
    let t0 = std::time::Instant::now();
    let diffs = artificial_pressure_study(&base, &[1e-2, 1e-3, 1e-4]).unwrap();
    println!("delta study wall = {:?}", t0.elapsed());
    for (d, v) in &diffs {
        println!("delta={d:.1e} terminal diff to next = {v:.6e}");
    }
    if diffs.len() == 2 {
        let order = (diffs[0].1 / diffs[1].1).log10();
        println!("fitted order = {order:.3}");
    }
}

#[test]
#[ignore]
fn probe_uniform_bounds() {
    use slabfsi::limits::uniform_bounds_sweep;
    let base = RunConfig {
        initial: InitialSpec {
            rho1: DensityProfile::Bump { amplitude: 6.0 },
            velocity: VelocityProfile::Zero,
            w0: PlateProfile::Zero,
            w1: PlateProfile::Zero,
            d_bound: 8.0,
        },
        t_final: 0.1,
        output_dt: 0.01,
        ..pulse_config()
    };
    let t0 = std::time::Instant::now();
    let rows = uniform_bounds_sweep(&base, &[0.2, 0.1, 0.05, 0.025], 0.05).unwrap();
    println!("uniform bounds wall = {:?}", t0.elapsed());
    for (eps, rep, sup_e) in &rows {
        let bound = 3.0 * (pulse_config().params.gamma - 1.0) / rep.c_res * eps * eps * sup_e;
        println!(
            "eps={eps} sup_res={:.4e} bound={:.4e} ratio={:.3} ess_fluct={:.4e} supE={:.3e} c_res={:.3}",
            rep.sup_res_mass,
            bound,
            rep.sup_res_mass / bound,
            rep.sup_ess_fluctuation,
            sup_e,
            rep.c_res
        );
    }
}

#[test]
#[ignore]
fn probe_incompressible_column() {
    use slabfsi::limits::{sweep, ReferenceSpec, SweepSpec};
    let base = RunConfig {
        params: Params { gamma: 3.5, nu: 0.05, ..sweep_base()().params },
        ..sweep_base()()
    };
    let spec = SweepSpec {
        pairs: vec![(0.2, 0.05), (0.1, 0.05), (0.05, 0.05), (0.025, 0.05)],
        reference: ReferenceSpec { eps0: 0.00625, nu0: 0.05, refine: 2 },
        workers: 2,
        energy_tol: 1e-3,
    };
    let t0 = std::time::Instant::now();
    let table = sweep(&base, &spec).expect("column sweep");
    println!("column wall = {:?}", t0.elapsed());
    println!("floor = {:.4e}", table.floor);
    for r in &table.rows {
        println!("eps={} sup={:.4e} status={}", r.eps, r.sup_rel_energy, r.status);
    }
}

fn sweep_base() -> fn() -> RunConfig {
    || RunConfig {
        params: Params { eps: 0.1, nu: 0.1, nu_s: 0.1, alpha: 0.1, alpha0: 0.1, ..pulse_config().params },
        grid: Grid { nx: 32, nz: 17, ny: None, period: std::f64::consts::TAU },
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

#[test]
#[ignore]
fn probe_cfl_boundary() {
    use slabfsi::fluid::acoustic_cfl;
    use slabfsi::scheme::run_from;
    use slabfsi::limits::well_prepared_ic;
    use std::sync::Arc;
    // Standing acoustic wave: density cosine, everything else quiet.
    let cfg = RunConfig {
        params: Params { nu: 0.01, alpha: 0.0, alpha0: 0.0, nu_s: 0.1, ..pulse_config().params },
        grid: Grid { nx: 32, nz: 7, ny: None, period: std::f64::consts::TAU },
        initial: InitialSpec {
            rho1: DensityProfile::CosX { amplitude: 0.3, mode: 2 },
            velocity: VelocityProfile::Zero,
            w0: PlateProfile::Zero,
            w1: PlateProfile::Zero,
            d_bound: 1.0,
        },
        t_final: 0.2,
        output_dt: 0.0,
        ..pulse_config()
    };
    let grid = Arc::new(cfg.grid.clone());
    let state0 = well_prepared_ic(&cfg.initial, &grid, &cfg.params).unwrap();
    let dt_max = acoustic_cfl(&state0, &cfg.grid, &cfg.params);
    let stable = |dt: f64| -> bool {
        let c = RunConfig { dt: DtPolicy::Fixed { dt }, ..cfg.clone() };
        run_from(&c, state0.clone()).is_ok()
    };
    // Bisection between a stable and an unstable step.
    let mut lo = dt_max * 0.5;
    let mut hi = dt_max * 8.0;
    assert!(stable(lo), "reference step should be stable");
    while stable(hi) {
        hi *= 2.0;
        assert!(hi < dt_max * 64.0, "no instability found");
    }
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    println!("dt_max = {dt_max:.4e}, measured boundary = {lo:.4e}, ratio = {:.3}", lo / dt_max);
}

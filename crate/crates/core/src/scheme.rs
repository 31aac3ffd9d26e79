//! Time integration of the coupled system: Lie splitting with the plate
//! substep first, an explicit two-stage fluid substep against the updated
//! plate, and a domain-map refresh that keeps the discrete mass exactly
//! conservative. Optional subiteration tightens the interface coupling.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    dissipation_rates, energy_inequality_check, energy_report, DissipationLedger, EnergyReport,
    SnapshotView,
};
use crate::error::{Result, SimError};
use crate::fluid::{
    acoustic_cfl, enforce_strong_bcs, fluid_rhs, penalty_relaxation, viscous_dt_bound, FluidRhs,
};
use crate::geometry::FlatMap;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::params::{Coupling, Params};
use crate::plate::{compute_plate_load, plate_step};
use crate::profiles::{well_prepared_ic, InitialSpec};
use crate::spectral::PlateSpectral;
use crate::state::State;

/// Time-step selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed { dt: f64 },
    /// `dt = factor * min(acoustic bound, viscous bound)`, re-evaluated each
    /// step.
    Cfl { factor: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Cfl { factor: 0.5 }
    }
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    pub grid: Grid,
    pub initial: InitialSpec,
    pub coupling: Coupling,
    pub t_final: f64,
    pub dt: DtPolicy,
    /// Snapshot cadence in simulated time; the stepper lands on multiples
    /// exactly. Zero records every step.
    pub output_dt: f64,
    /// Abort the run when the discrete energy inequality is violated beyond
    /// `energy_tol`.
    pub strict_energy: bool,
    pub energy_tol: f64,
    pub wall_clock_budget_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: Params::default(),
            grid: Grid { nx: 64, nz: 33, ny: None, period: std::f64::consts::TAU },
            initial: InitialSpec::default(),
            coupling: Coupling::Strong,
            t_final: 0.25,
            dt: DtPolicy::default(),
            output_dt: 0.0125,
            strict_energy: false,
            energy_tol: 1e-3,
            wall_clock_budget_s: 3600.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.coupling.validate()?;
        if !(self.t_final > 0.0) {
            return Err(SimError::Param(format!("t_final must be > 0, got {}", self.t_final)));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0) => {
                return Err(SimError::Param("fixed dt must be > 0".into()))
            }
            DtPolicy::Cfl { factor } if !(factor > 0.0 && factor <= 1.0) => {
                return Err(SimError::Param("cfl factor must lie in (0, 1]".into()))
            }
            _ => {}
        }
        if self.output_dt < 0.0 {
            return Err(SimError::Param("output_dt must be >= 0".into()));
        }
        Ok(())
    }
}

/// One recorded instant of a trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: State,
    pub energy: EnergyReport,
}

/// Ordered snapshots plus integration metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    /// Largest relative energy-inequality violation observed at snapshots.
    pub max_energy_violation: f64,
}

impl Trajectory {
    pub fn energy_series(&self) -> Vec<EnergyReport> {
        self.snapshots.iter().map(|s| s.energy).collect()
    }

    pub fn states(&self) -> Vec<State> {
        self.snapshots.iter().map(|s| s.state.clone()).collect()
    }

    pub fn views(&self) -> Vec<SnapshotView<'_>> {
        self.snapshots
            .iter()
            .map(|s| SnapshotView { state: &s.state, ledger: s.energy.dissipation })
            .collect()
    }

    pub fn final_state(&self) -> &State {
        &self.snapshots.last().expect("trajectory has at least the initial snapshot").state
    }
}

/// Work area reused across steps.
pub struct Stepper {
    pub grid: Arc<Grid>,
    pub params: Params,
    pub coupling: Coupling,
    pub spectral: PlateSpectral,
    pub ledger: DissipationLedger,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, params: Params, coupling: Coupling) -> Stepper {
        Stepper {
            grid: Arc::clone(grid),
            params,
            coupling,
            spectral: PlateSpectral::new(grid.nx, grid.period),
            ledger: DissipationLedger::default(),
        }
    }

    /// One split step: plate substep with the frozen load, coupling
    /// exchange, two-stage fluid substep against the updated plate, then the
    /// domain-map refresh with conservative density rescaling.
    pub fn split_step(&mut self, state: &State, dt: f64) -> Result<State> {
        match self.coupling {
            Coupling::Monolithic { tol, max_iter, relax } => {
                self.monolithic_step(state, dt, tol, max_iter, relax)
            }
            _ => self.single_pass_step(state, dt),
        }
    }

    fn single_pass_step(&mut self, state: &State, dt: f64) -> Result<State> {
        let p = self.params;
        let map0 = FlatMap::build(&self.grid, &state.w, &state.w_t, p.contact_floor)
            .map_err(|e| stamp(e, state.t))?;

        // (i) plate substep; the penalty exchange is handled separately, so
        // the frozen load carries the traction and pressure parts only.
        let (load, _) = compute_plate_load(state, &map0, &p, None).map_err(|e| stamp(e, state.t))?;
        let (w_new, mut wt_new) = plate_step(&state.w, &state.w_t, &load, dt, &p, &self.spectral);

        // (ii) coupling exchange against the updated plate velocity.
        let mut rho = state.rho_hat.clone();
        let mut u = state.u_hat.clone();
        if let Coupling::Penalty { kappa } = self.coupling {
            let ex = penalty_relaxation(&mut u, &mut wt_new, &rho, &map0, kappa, dt);
            self.ledger.penalty += ex.dissipation;
            self.ledger.mismatch_sq_dt += ex.mismatch_sq_dt;
        }

        // (iii) fluid substep with frozen geometry and the new interface
        // velocity as mesh velocity.
        let map_fluid = FlatMap::build(&self.grid, &state.w, &wt_new, p.contact_floor)
            .map_err(|e| stamp(e, state.t))?;
        let strong = matches!(self.coupling, Coupling::Strong);
        enforce_strong_bcs(&mut u, &map_fluid, &wt_new, strong);
        self.heun_fluid(&mut rho, &mut u, state.t, &map_fluid, &wt_new, dt, strong)?;

        // (iv) map refresh: divide the conserved J rho by the new Jacobian.
        for i in 0..self.grid.nx {
            let ratio = (1.0 + state.w[i]) / (1.0 + w_new[i]);
            if ratio != 1.0 {
                for j in 0..self.grid.nz {
                    *rho.at_mut(i, j) *= ratio;
                }
            }
        }

        let new_state = State { t: state.t + dt, rho_hat: rho, u_hat: u, w: w_new, w_t: wt_new };
        new_state.validate(p.contact_floor)?;

        // Dissipation bookkeeping at the committed state (right endpoint).
        let map_new = FlatMap::build(&self.grid, &new_state.w, &new_state.w_t, p.contact_floor)?;
        let rates = dissipation_rates(&new_state, &map_new, &p, &self.spectral);
        self.ledger.viscous += dt * rates.viscous;
        self.ledger.slip_top += dt * rates.slip_top;
        self.ledger.slip_bottom += dt * rates.slip_bottom;
        self.ledger.plate_damping += dt * rates.plate_damping;
        if !matches!(self.coupling, Coupling::Penalty { .. }) {
            // Track the raw mismatch integral in every mode for diagnostics.
            let g = &self.grid;
            let jtop = g.nz - 1;
            let mut msq = 0.0;
            for i in 0..g.nx {
                let n = map_new.normal_weighted_idx(i);
                let m = crate::la::dot2(new_state.u_hat.at(i, jtop), n) - new_state.w_t[i];
                msq += m * m;
            }
            self.ledger.mismatch_sq_dt += dt * msq * g.hx();
        }
        Ok(new_state)
    }

    /// Heun update of `(rho, u)` with the geometry frozen. Density advances
    /// through the conserved variable divided by the frozen Jacobian.
    #[allow(clippy::too_many_arguments)]
    fn heun_fluid(
        &self,
        rho: &mut ScalarField,
        u: &mut VectorField,
        t: f64,
        map: &FlatMap,
        w_t: &[f64],
        dt: f64,
        strong: bool,
    ) -> Result<()> {
        let g = &self.grid;
        let stage = |rho_s: &ScalarField, u_s: &VectorField| -> Result<FluidRhs> {
            let s = State {
                t,
                rho_hat: rho_s.clone(),
                u_hat: u_s.clone(),
                w: (0..g.nx).map(|i| map.displacement(i)).collect(),
                w_t: w_t.to_vec(),
            };
            fluid_rhs(&s, map, &self.params, &self.coupling)
        };
        let k1 = stage(rho, u)?;
        let mut rho1 = rho.clone();
        let mut u1 = u.clone();
        for j in 0..g.nz {
            for i in 0..g.nx {
                let jw = map.jacobian(i);
                *rho1.at_mut(i, j) += dt * k1.d_jrho.at(i, j) / jw;
                let du = k1.d_u.at(i, j);
                let v = u1.at_mut(i, j);
                v[0] += dt * du[0];
                v[1] += dt * du[1];
            }
        }
        enforce_strong_bcs(&mut u1, map, w_t, strong);
        if rho1.min() <= 0.0 {
            return Err(SimError::Positivity { t, min_rho: rho1.min() });
        }
        let k2 = stage(&rho1, &u1)?;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let jw = map.jacobian(i);
                *rho.at_mut(i, j) += 0.5 * dt * (k1.d_jrho.at(i, j) + k2.d_jrho.at(i, j)) / jw;
                let d1 = k1.d_u.at(i, j);
                let d2 = k2.d_u.at(i, j);
                let v = u.at_mut(i, j);
                v[0] += 0.5 * dt * (d1[0] + d2[0]);
                v[1] += 0.5 * dt * (d1[1] + d2[1]);
            }
        }
        enforce_strong_bcs(u, map, w_t, strong);
        if rho.min() <= 0.0 {
            return Err(SimError::Positivity { t, min_rho: rho.min() });
        }
        Ok(())
    }

    /// Interface subiteration: fluid substep constrained to the latest plate
    /// velocity, plate substep loaded by the resulting trace, under-relaxed
    /// until the interface velocity settles below `tol`.
    fn monolithic_step(
        &mut self,
        state: &State,
        dt: f64,
        tol: f64,
        max_iter: usize,
        relax: f64,
    ) -> Result<State> {
        let p = self.params;
        let g = self.grid.clone();
        let map0 = FlatMap::build(&g, &state.w, &state.w_t, p.contact_floor)
            .map_err(|e| stamp(e, state.t))?;

        // Initial guess from a plain split pass.
        let (load0, _) = compute_plate_load(state, &map0, &p, None).map_err(|e| stamp(e, state.t))?;
        let (mut w_guess, mut wt_guess) =
            plate_step(&state.w, &state.w_t, &load0, dt, &p, &self.spectral);
        let mut last_mismatch = f64::INFINITY;
        let mut committed: Option<(ScalarField, VectorField)> = None;

        for _ in 0..max_iter {
            let map_fluid = FlatMap::build(&g, &state.w, &wt_guess, p.contact_floor)
                .map_err(|e| stamp(e, state.t))?;
            let mut rho = state.rho_hat.clone();
            let mut u = state.u_hat.clone();
            enforce_strong_bcs(&mut u, &map_fluid, &wt_guess, true);
            self.heun_fluid(&mut rho, &mut u, state.t, &map_fluid, &wt_guess, dt, true)?;

            // Load from the end-of-step fluid trace.
            let probe = State {
                t: state.t + dt,
                rho_hat: rho.clone(),
                u_hat: u.clone(),
                w: state.w.clone(),
                w_t: wt_guess.clone(),
            };
            let (load, _) = compute_plate_load(&probe, &map_fluid, &p, None)
                .map_err(|e| stamp(e, state.t))?;
            let (w_new, wt_new) = plate_step(&state.w, &state.w_t, &load, dt, &p, &self.spectral);

            let mut msq = 0.0;
            for i in 0..g.nx {
                let d = wt_new[i] - wt_guess[i];
                msq += d * d;
            }
            last_mismatch = (msq * g.hx()).sqrt();
            committed = Some((rho, u));
            if last_mismatch < tol {
                w_guess = w_new;
                wt_guess = wt_new;
                break;
            }
            for i in 0..g.nx {
                w_guess[i] = relax * w_new[i] + (1.0 - relax) * w_guess[i];
                wt_guess[i] = relax * wt_new[i] + (1.0 - relax) * wt_guess[i];
            }
        }
        if last_mismatch >= tol {
            return Err(SimError::CouplingDiverged {
                t: state.t,
                mismatch: last_mismatch,
                iters: max_iter,
            });
        }
        let (mut rho, u) = committed.expect("at least one iteration ran");
        for i in 0..g.nx {
            let ratio = (1.0 + state.w[i]) / (1.0 + w_guess[i]);
            if ratio != 1.0 {
                for j in 0..g.nz {
                    *rho.at_mut(i, j) *= ratio;
                }
            }
        }
        let new_state = State { t: state.t + dt, rho_hat: rho, u_hat: u, w: w_guess, w_t: wt_guess };
        new_state.validate(p.contact_floor)?;
        let map_new = FlatMap::build(&g, &new_state.w, &new_state.w_t, p.contact_floor)?;
        let rates = dissipation_rates(&new_state, &map_new, &p, &self.spectral);
        self.ledger.viscous += dt * rates.viscous;
        self.ledger.slip_top += dt * rates.slip_top;
        self.ledger.slip_bottom += dt * rates.slip_bottom;
        self.ledger.plate_damping += dt * rates.plate_damping;
        Ok(new_state)
    }
}

fn stamp(e: SimError, t: f64) -> SimError {
    match e {
        SimError::Degeneracy { min_gap, .. } => SimError::Degeneracy { t, min_gap },
        SimError::Positivity { min_rho, .. } => SimError::Positivity { t, min_rho },
        SimError::BlowUp { .. } => SimError::BlowUp { t },
        other => other,
    }
}

/// Integrates a configuration to `t_final`, or aborts with a classified
/// error. Deterministic for a fixed config.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = Arc::new(config.grid.clone());
    let state0 = well_prepared_ic(&config.initial, &grid, &config.params)?;
    run_from(config, state0)
}

/// Same as [`run`] but starting from a caller-supplied state.
pub fn run_from(config: &RunConfig, state0: State) -> Result<Trajectory> {
    config.validate()?;
    let grid = state0.grid().clone();
    let mut stepper = Stepper::new(&grid, config.params, config.coupling);
    let clock = Instant::now();

    let mut state = state0;
    state.validate(config.params.contact_floor)?;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    fn record(snapshots: &mut Vec<Snapshot>, s: &State, st: &Stepper) -> Result<()> {
        let rep = energy_report(s, &st.params, &st.ledger, &st.spectral)?;
        snapshots.push(Snapshot { state: s.clone(), energy: rep });
        Ok(())
    }
    record(&mut snapshots, &state, &stepper)?;

    let mut steps = 0usize;
    let mut next_output = if config.output_dt > 0.0 { config.output_dt } else { 0.0 };
    while state.t < config.t_final - 1e-12 {
        if clock.elapsed().as_secs_f64() > config.wall_clock_budget_s {
            return Err(SimError::Timeout { t: state.t, budget_s: config.wall_clock_budget_s });
        }
        let mut dt = match config.dt {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Cfl { factor } => {
                factor
                    * acoustic_cfl(&state, &grid, &config.params)
                        .min(viscous_dt_bound(&state, &grid, &config.params))
            }
        };
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::BlowUp { t: state.t });
        }
        // Land exactly on output times and the final time.
        let mut target = config.t_final;
        if config.output_dt > 0.0 && next_output < target {
            target = next_output;
        }
        if state.t + dt >= target - 1e-13 {
            dt = target - state.t;
        }
        state = stepper.split_step(&state, dt)?;
        steps += 1;
        let at_output = config.output_dt == 0.0
            || (state.t - next_output).abs() < 1e-10
            || state.t >= config.t_final - 1e-12;
        if at_output {
            record(&mut snapshots, &state, &stepper)?;
            while config.output_dt > 0.0 && next_output <= state.t + 1e-12 {
                next_output += config.output_dt;
            }
            if config.strict_energy {
                let series: Vec<EnergyReport> =
                    snapshots.iter().map(|s| s.energy).collect();
                let check = energy_inequality_check(&series, config.energy_tol);
                if !check.pass {
                    return Err(SimError::Param(format!(
                        "energy inequality violated beyond tolerance: {} at t = {}",
                        check.max_violation, check.at_t
                    )));
                }
            }
        }
    }
    let series: Vec<EnergyReport> = snapshots.iter().map(|s| s.energy).collect();
    let check = energy_inequality_check(&series, f64::INFINITY);
    Ok(Trajectory { snapshots, steps, max_energy_violation: check.max_violation })
}

//! Output formats: run time series as CSV, sweep tables as CSV plus a JSON
//! summary, and raw binary field dumps with a JSON sidecar. Headers are
//! stable; column order is part of the format.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::EnergyReport;
use crate::error::{Result, SimError};
use crate::limits::SweepTable;
use crate::scheme::Trajectory;
use crate::state::State;

pub const RUN_CSV_HEADER: &str = "t,mass,kinetic,pressure_potential,artificial_potential,plate_kinetic,plate_elastic,total_energy,diss_viscous,diss_slip_top,diss_slip_bottom,diss_plate,diss_penalty,mismatch_l2,min_rho,min_gap";

pub const SWEEP_CSV_HEADER: &str =
    "eps,nu,sup_rel_energy,terminal_rel_energy,initial_rel_energy,status";

fn io_err(e: std::io::Error) -> SimError {
    SimError::Param(format!("io error: {e}"))
}

/// Writes the energy time series of a trajectory.
pub fn write_run_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = String::from(RUN_CSV_HEADER);
    out.push('\n');
    for snap in &traj.snapshots {
        let r: &EnergyReport = &snap.energy;
        let s = &snap.state;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.mass,
            r.kinetic,
            r.pressure_potential,
            r.artificial_potential,
            r.plate_kinetic,
            r.plate_elastic,
            r.total(),
            r.dissipation.viscous,
            r.dissipation.slip_top,
            r.dissipation.slip_bottom,
            r.dissipation.plate_damping,
            r.dissipation.penalty,
            r.mismatch_l2,
            s.rho_hat.min(),
            s.min_gap(),
        ));
    }
    fs::write(path, out).map_err(io_err)
}

/// Writes a sweep table as CSV.
pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.eps, r.nu, r.sup_rel_energy, r.terminal_rel_energy, r.initial_rel_energy, r.status
        ));
    }
    fs::write(path, out).map_err(io_err)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    slope: f64,
    intercept: f64,
    residual: f64,
    points: usize,
    floor: f64,
    projection_defect: f64,
    raw_divergence: f64,
    surrogate_norm_max: [f64; 2],
    rows: &'a [crate::limits::SweepRow],
}

/// Writes the JSON summary of a sweep (fit, floor, surrogate norms, rows).
pub fn write_sweep_summary(table: &SweepTable, path: &Path) -> Result<()> {
    let mut surro = [0.0f64; 2];
    for r in &table.rows {
        if r.status == "ok" {
            surro[0] = surro[0].max(r.surrogate_norms[0]);
            surro[1] = surro[1].max(r.surrogate_norms[1]);
        }
    }
    let summary = SweepSummary {
        slope: table.fit.slope,
        intercept: table.fit.intercept,
        residual: table.fit.residual,
        points: table.fit.points,
        floor: table.floor,
        projection_defect: table.projection_defect,
        raw_divergence: table.raw_divergence,
        surrogate_norm_max: surro,
        rows: &table.rows,
    };
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| SimError::Param(format!("json error: {e}")))?;
    fs::write(path, text).map_err(io_err)
}

#[derive(Serialize)]
struct FieldSidecar {
    fields: Vec<FieldDesc>,
    nx: usize,
    nz: usize,
    period: f64,
    t: f64,
    layout: &'static str,
    dtype: &'static str,
}

#[derive(Serialize)]
struct FieldDesc {
    name: String,
    offset_bytes: usize,
    count: usize,
}

/// Dumps the state fields as flat little-endian `f64` arrays (row-major,
/// `z` outer) with a JSON sidecar describing the layout.
pub fn write_field_dump(state: &State, dir: &Path, tag: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err)?;
    let g = state.grid();
    let mut blob: Vec<u8> = Vec::new();
    let mut fields = Vec::new();
    let push = |name: &str, data: &[f64], blob: &mut Vec<u8>, fields: &mut Vec<FieldDesc>| {
        fields.push(FieldDesc {
            name: name.to_string(),
            offset_bytes: blob.len(),
            count: data.len(),
        });
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    };
    push("rho_hat", state.rho_hat.data(), &mut blob, &mut fields);
    let u0: Vec<f64> = state.u_hat.data().iter().map(|v| v[0]).collect();
    let u1: Vec<f64> = state.u_hat.data().iter().map(|v| v[1]).collect();
    push("u_hat_x", &u0, &mut blob, &mut fields);
    push("u_hat_z", &u1, &mut blob, &mut fields);
    push("w", &state.w, &mut blob, &mut fields);
    push("w_t", &state.w_t, &mut blob, &mut fields);

    let bin_path = dir.join(format!("{tag}.bin"));
    let mut f = fs::File::create(&bin_path).map_err(io_err)?;
    f.write_all(&blob).map_err(io_err)?;

    let sidecar = FieldSidecar {
        fields,
        nx: g.nx,
        nz: g.nz,
        period: g.period,
        t: state.t,
        layout: "row-major, z outer",
        dtype: "f64 little-endian",
    };
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| SimError::Param(format!("json error: {e}")))?;
    fs::write(dir.join(format!("{tag}.json")), text).map_err(io_err)
}

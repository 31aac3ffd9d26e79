mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::ConfigDocument;
use slabfsi::io::{write_field_dump, write_run_csv, write_sweep_csv, write_sweep_summary};
use slabfsi::limits::sweep;
use slabfsi::scheme::run;
use slabfsi::SimError;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_DEGENERACY: u8 = 2;
const EXIT_POSITIVITY: u8 = 3;
const EXIT_BLOW_UP: u8 = 4;
const EXIT_TIMEOUT: u8 = 5;
const EXIT_CONFIG: u8 = 64;

/// Moving-domain simulator for a compressible fluid coupled to an elastic
/// plate on a periodic slab.
#[derive(Parser)]
#[command(name = "slabfsi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write the run time series.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; the FSI_SLAB_OUT environment variable takes
        /// precedence.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Abort when the energy inequality is violated beyond tolerance.
        #[arg(long)]
        strict: bool,
    },
    /// Run a parameter sweep against a proxy reference solution.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweep rows.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a property suite and print per-assertion margins.
    Check {
        #[arg(value_enum)]
        subject: CheckSubject,
        /// Seed for the randomized suites.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tolerance for the energy suite.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckSubject {
    Geometry,
    Plate,
    Energy,
}

fn exit_for(e: &SimError) -> u8 {
    match e {
        SimError::Degeneracy { .. } => EXIT_DEGENERACY,
        SimError::Positivity { .. } => EXIT_POSITIVITY,
        SimError::BlowUp { .. } | SimError::CouplingDiverged { .. } => EXIT_BLOW_UP,
        SimError::Timeout { .. } => EXIT_TIMEOUT,
        _ => EXIT_CONFIG,
    }
}

fn load_config(path: &Path) -> Result<ConfigDocument, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ConfigDocument::from_json(&text)
}

fn out_dir(doc: &ConfigDocument, flag: Option<PathBuf>) -> PathBuf {
    if let Ok(env) = std::env::var("FSI_SLAB_OUT") {
        return PathBuf::from(env);
    }
    flag.unwrap_or_else(|| PathBuf::from(&doc.outputs.dir))
}

fn cmd_run(config: &Path, out: Option<PathBuf>, strict: bool) -> ExitCode {
    let doc = match load_config(config) {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir = out_dir(&doc, out);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Err(e) = std::fs::write(dir.join("effective_config.json"), doc.effective_json()) {
        eprintln!("cannot write effective config: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let mut run_cfg = doc.to_run_config();
    if strict {
        run_cfg.strict_energy = true;
    }
    match run(&run_cfg) {
        Ok(traj) => {
            if let Err(e) = write_run_csv(&traj, &dir.join("run.csv")) {
                eprintln!("{e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            if doc.outputs.fields {
                if let Err(e) = write_field_dump(traj.final_state(), &dir, "final") {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            println!(
                "completed: {} steps to t = {}, max energy violation {:.3e}",
                traj.steps,
                traj.final_state().t,
                traj.max_energy_violation
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>, workers: Option<usize>) -> ExitCode {
    let doc = match load_config(config) {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir = out_dir(&doc, out);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Err(e) = std::fs::write(dir.join("effective_config.json"), doc.effective_json()) {
        eprintln!("cannot write effective config: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let base = doc.to_run_config();
    let mut spec = doc.to_sweep_spec();
    if let Some(w) = workers {
        spec.workers = w;
    }
    match sweep(&base, &spec) {
        Ok(table) => {
            let r1 = write_sweep_csv(&table, &dir.join("sweep.csv"));
            let r2 = write_sweep_summary(&table, &dir.join("sweep_summary.json"));
            if let Err(e) = r1.and(r2) {
                eprintln!("{e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            for row in &table.rows {
                println!(
                    "eps={} nu={} sup_rel_energy={:.6e} status={}",
                    row.eps, row.nu, row.sup_rel_energy, row.status
                );
            }
            println!(
                "fit: slope={:.4} over {} points, floor={:.3e}",
                table.fit.slope, table.fit.points, table.floor
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sweep failed: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn cmd_check(subject: CheckSubject, seed: u64, tol: f64) -> ExitCode {
    let lines = match subject {
        CheckSubject::Geometry => slabfsi::checks::geometry_suite(seed, 10),
        CheckSubject::Plate => slabfsi::checks::plate_suite(),
        CheckSubject::Energy => slabfsi::checks::energy_suite(tol),
    };
    match lines {
        Ok(lines) => {
            let mut all = true;
            for l in &lines {
                println!(
                    "{} {:<42} value {:>13.6e}  gate {}",
                    if l.pass { "PASS" } else { "FAIL" },
                    l.name,
                    l.value,
                    l.gate
                );
                all &= l.pass;
            }
            if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) => {
            eprintln!("check failed to run: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, strict } => cmd_run(&config, out, strict),
        Command::Sweep { config, out, workers } => cmd_sweep(&config, out, workers),
        Command::Check { subject, seed, tol } => cmd_check(subject, seed, tol),
    }
}

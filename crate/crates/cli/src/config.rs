//! JSON configuration document: schema-validated sections mapping onto the
//! solver's run and sweep inputs. Unknown keys are rejected; every default
//! is materialized when the effective config is echoed back.

use serde::{Deserialize, Serialize};

use slabfsi::limits::{ReferenceSpec, SweepSpec};
use slabfsi::profiles::InitialSpec;
use slabfsi::scheme::{DtPolicy, RunConfig};
use slabfsi::{Coupling, Grid, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub params: Params,
    pub grid: Grid,
    pub initial: InitialSpec,
    pub coupling: Coupling,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub outputs: OutputSection,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        ConfigDocument {
            params: Params::default(),
            grid: Grid { nx: 64, nz: 33, ny: None, period: std::f64::consts::TAU },
            initial: InitialSpec::default(),
            coupling: Coupling::Strong,
            run: RunSection::default(),
            sweep: SweepSection::default(),
            outputs: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    pub dt: DtPolicy,
    pub output_dt: f64,
    pub strict_energy: bool,
    pub energy_tol: f64,
    pub wall_clock_budget_s: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_final: 0.25,
            dt: DtPolicy::Cfl { factor: 0.5 },
            output_dt: 0.0125,
            strict_energy: false,
            energy_tol: 1e-3,
            wall_clock_budget_s: 3600.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Zips `eps_list` with `nu_list` (equal lengths).
    Diagonal,
    /// Full product of `eps_list` and `nu_list`.
    Grid,
    /// `eps_list` against the single value in `nu_list`.
    FixedNu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps_list: Vec<f64>,
    pub nu_list: Vec<f64>,
    pub mode: SweepMode,
    pub reference: ReferenceSpec,
    pub workers: usize,
    pub energy_tol: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            nu_list: vec![0.2, 0.1, 0.05, 0.025],
            mode: SweepMode::Diagonal,
            reference: ReferenceSpec { eps0: 0.00625, nu0: 0.00625, refine: 2 },
            workers: 2,
            energy_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Dump the final state fields as binary plus sidecar.
    pub fields: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), fields: false }
    }
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<ConfigDocument, String> {
        let doc: ConfigDocument =
            serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.to_run_config().validate().map_err(|e| e.to_string())?;
        match self.sweep.mode {
            SweepMode::Diagonal if self.sweep.eps_list.len() != self.sweep.nu_list.len() => {
                return Err("sweep: diagonal mode needs eps_list and nu_list of equal length".into())
            }
            SweepMode::FixedNu if self.sweep.nu_list.len() != 1 => {
                return Err("sweep: fixed_nu mode needs exactly one nu".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_run_config(&self) -> RunConfig {
        RunConfig {
            params: self.params,
            grid: self.grid.clone(),
            initial: self.initial.clone(),
            coupling: self.coupling,
            t_final: self.run.t_final,
            dt: self.run.dt,
            output_dt: self.run.output_dt,
            strict_energy: self.run.strict_energy,
            energy_tol: self.run.energy_tol,
            wall_clock_budget_s: self.run.wall_clock_budget_s,
        }
    }

    pub fn to_sweep_spec(&self) -> SweepSpec {
        let pairs = match self.sweep.mode {
            SweepMode::Diagonal => self
                .sweep
                .eps_list
                .iter()
                .zip(&self.sweep.nu_list)
                .map(|(&e, &n)| (e, n))
                .collect(),
            SweepMode::Grid => {
                let mut v = Vec::new();
                for &e in &self.sweep.eps_list {
                    for &n in &self.sweep.nu_list {
                        v.push((e, n));
                    }
                }
                v
            }
            SweepMode::FixedNu => {
                let nu = self.sweep.nu_list[0];
                self.sweep.eps_list.iter().map(|&e| (e, nu)).collect()
            }
        };
        SweepSpec {
            pairs,
            reference: self.sweep.reference,
            workers: self.sweep.workers,
            energy_tol: self.sweep.energy_tol,
        }
    }

    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let doc = ConfigDocument::default();
        let text = doc.effective_json();
        let back = ConfigDocument::from_json(&text).unwrap();
        assert_eq!(doc, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"params": {"gamma": 2.0}, "unknown_section": 1}"#;
        let err = ConfigDocument::from_json(text).unwrap_err();
        assert!(err.contains("unknown"), "{err}");
    }

    #[test]
    fn partial_document_fills_defaults() {
        let doc = ConfigDocument::from_json(r#"{"params": {"eps": 0.2}}"#).unwrap();
        assert_eq!(doc.params.eps, 0.2);
        assert_eq!(doc.params.gamma, Params::default().gamma);
        assert_eq!(doc.grid.nx, 64);
    }
}

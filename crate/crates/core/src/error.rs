use thiserror::Error;

/// Classified failure modes of a simulation run.
///
/// Every abort of a time integration is one of these; the CLI maps them to
/// distinct exit codes so sweeps can triage failed rows mechanically.
#[derive(Debug, Error)]
pub enum SimError {
    /// The moving boundary came within `contact_floor` of the bottom wall.
    #[error("domain degenerated (self-contact) at t = {t}: min(1 + w) = {min_gap}")]
    Degeneracy { t: f64, min_gap: f64 },

    /// Density lost positivity.
    #[error("density positivity lost at t = {t}: min rho = {min_rho}")]
    Positivity { t: f64, min_rho: f64 },

    /// A non-finite value appeared in the state.
    #[error("solution blew up (non-finite values) at t = {t}")]
    BlowUp { t: f64 },

    /// Wall-clock budget exceeded.
    #[error("wall-clock budget of {budget_s} s exceeded at t = {t}")]
    Timeout { t: f64, budget_s: f64 },

    /// Fixed-point subiteration of the monolithic coupling failed.
    #[error("monolithic coupling did not converge at t = {t}: mismatch {mismatch} after {iters} iterations")]
    CouplingDiverged { t: f64, mismatch: f64, iters: usize },

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A parameter or configuration value violates its validity range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Evaluation outside the domain where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

use thiserror::Error;

/// Errors produced by scenario validation, grid construction, and the solvers.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid control set: {0}")]
    InvalidControlSet(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(
        "time resolution too coarse: requested n_t = {requested}, minimal admissible n_t = {required} ({reason})"
    )]
    CflViolation {
        requested: usize,
        required: usize,
        reason: String,
    },

    #[error(
        "degenerate diffusion: {0}; lattice monotonicity requires a positive dx^2 budget or pure-drift kernel mode"
    )]
    DegenerateDiffusion(String),

    #[error(
        "negative-probability stencil at t index {t_index} for controls (u = {u_label}, v = {v_label}): {detail}"
    )]
    NegativeStencil {
        t_index: usize,
        u_label: String,
        v_label: String,
        detail: String,
    },

    #[error(
        "ellipticity violation: smallest eigenvalue of sigma^2 is {lambda_min:.6e} at (t = {t}, u = {u_label}, v = {v_label})"
    )]
    EllipticityViolation {
        lambda_min: f64,
        t: f64,
        u_label: String,
        v_label: String,
    },

    #[error(
        "Isaacs condition fails (max gap {gap:.6e} > tolerance {tolerance:.6e}): lower and upper equations differ, cross-check target is ambiguous"
    )]
    IsaacsGap { gap: f64, tolerance: f64 },

    #[error("inconsistent boundary data: {0}")]
    BoundaryMismatch(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid open-loop control candidate: {0}")]
    InvalidCandidate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

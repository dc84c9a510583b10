//! Numeric tolerances shared across the solvers and their check suites.
//!
//! Every threshold used in an assertion lives here with its rationale, so
//! the check suites do not accumulate ad-hoc magic numbers.

/// Transition probabilities must sum to one within this slack.
///
/// Stencil entries are built from a handful of f64 operations each; the sum
/// accumulates at most ~10 roundings of O(1) terms.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Discrete weak duality slack: lower <= upper + this at every node.
///
/// Both sides extract extrema from identical per-pair one-step values; the
/// difference accumulates one rounding per backward step.
pub const WEAK_DUALITY_TOL: f64 = 1e-10;

/// Enumeration gap floor: sup-inf minus inf-sup may be negative only by
/// rounding noise, never structurally.
pub const MINIMAX_GAP_FLOOR: f64 = -1e-12;

/// Hessian argument symmetry tolerance for Hamiltonian inputs.
pub const GAMMA_SYMMETRY_TOL: f64 = 1e-12;

/// Local consistency of kernel moments: |error| <= this factor times dt^2
/// on the built-in families at their default grids.
pub const MOMENT_CONSISTENCY_FACTOR: f64 = 10.0;

/// Constant fields are fixed points of the kernel expectation within this.
pub const CONSTANT_FIELD_TOL: f64 = 1e-12;

/// Arithmetic slack added to the measured |upper - lower| when reporting
/// the achievable epsilon of a saddle certificate. Covers the one-step
/// rounding of replayed policy evaluations.
pub const ONE_STEP_TOL: f64 = 1e-10;

/// Default tolerance for the Isaacs condition checker. The built-in
/// separable families are exact up to enumeration rounding.
pub const ISAACS_DEFAULT_TOL: f64 = 1e-10;

/// Boundary/terminal data must agree on the corner seam within this.
pub const SEAM_TOL: f64 = 1e-9;

/// Treat sigma^2 as singular below this smallest-eigenvalue threshold when
/// deciding whether the covariance z-estimate is well posed.
pub const SINGULAR_SIGMA_TOL: f64 = 1e-12;

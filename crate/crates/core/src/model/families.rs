//! Built-in coefficient families.
//!
//! Each constructor returns a fully populated [`GameSpec`] whose declared
//! bound constants genuinely dominate the sampled coefficients, so the
//! validation suite passes on every family out of the box.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::linalg::SymMat;
use crate::model::coefficients::{CoefficientBuilder, Modulus};
use crate::model::control::ControlSet;
use crate::model::grid::default_radius;
use crate::model::spec::GameSpec;

pub const DEFAULT_MARGIN: f64 = 0.1;

/// Constant coefficients with singleton controls; the drift is the vector
/// entering the dynamics (sigma * b with b chosen accordingly).
pub fn constant(
    dim: usize,
    horizon: f64,
    sigma: f64,
    drift: Vec<f64>,
    driver: f64,
    terminal: f64,
) -> Result<GameSpec> {
    let c0 = sigma
        .abs()
        .max(crate::linalg::max_abs(&drift).max(if sigma > 0.0 {
            crate::linalg::max_abs(&drift) / sigma
        } else {
            crate::linalg::max_abs(&drift)
        }))
        .max(driver.abs())
        .max(terminal.abs())
        .max(1.0);
    constant_with_bounds(dim, horizon, sigma, drift, driver, terminal, c0)
}

pub fn constant_with_bounds(
    dim: usize,
    horizon: f64,
    sigma: f64,
    drift: Vec<f64>,
    driver: f64,
    terminal: f64,
    c0: f64,
) -> Result<GameSpec> {
    if drift.len() != dim {
        return Err(LabError::InvalidScenario(format!(
            "drift has {} components for dimension {dim}",
            drift.len()
        )));
    }
    let u = ControlSet::singleton(0.0);
    let v = ControlSet::singleton(0.0);
    let drift_arc = drift.clone();
    let builder = CoefficientBuilder::new(
        dim,
        Arc::new(move |_, _, _| SymMat::scaled_identity(dim, sigma)),
        Arc::new(move |_, _, _| {
            if sigma > 0.0 {
                drift_arc.iter().map(|d| d / sigma).collect()
            } else {
                drift_arc.clone()
            }
        }),
    );
    let builder = if sigma > 0.0 {
        builder.derive_drift()
    } else {
        let drift_direct = drift.clone();
        builder.direct_drift(Arc::new(move |_, _, _| drift_direct.clone()))
    };
    let coeffs = builder
        .driver(Arc::new(move |_, _, _, _, _, _| driver), false, false, false)
        .terminal(Arc::new(move |_| terminal))
        .bounds(c0, 0.0, Modulus::lipschitz(0.0))
        .build();
    GameSpec::new("constant", dim, horizon, u, v, coeffs)
}

/// Two-dimensional game with state (alpha*B^1 + int u, alpha*B^2 + int v)
/// and terminal payoff |a + x_1 - x_2|. The drift is (u, v) directly and
/// the driver vanishes, so the value is a conditional expectation.
pub fn example81(
    alpha: f64,
    offset: f64,
    horizon: f64,
    u_count: usize,
    v_count: usize,
) -> Result<GameSpec> {
    if alpha < 0.0 {
        return Err(LabError::InvalidScenario(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let u = ControlSet::scalar_grid(-1.0, 1.0, u_count)?;
    let v = ControlSet::scalar_grid(-2.0, 2.0, v_count)?;
    let c0 = 2.0_f64.max(alpha);
    let coeffs = CoefficientBuilder::new(
        2,
        Arc::new(move |_, _, _| SymMat::scaled_identity(2, alpha)),
        Arc::new(|_, _, _| vec![0.0, 0.0]),
    )
    .direct_drift(Arc::new(|_, u, v| vec![u[0], v[0]]))
    .terminal(Arc::new(move |x| (offset + x[0] - x[1]).abs()))
    .bounds(c0, 0.0, Modulus::lipschitz(2.0))
    .build();
    let radius = (0.45 * (c0 - offset.abs())).max(0.05);
    Ok(GameSpec::new("example81", 2, horizon, u, v, coeffs)?
        .with_validation_radius(radius))
}

/// Driver u*v with two-point control sets on both sides: the classic
/// Isaacs-condition failure (sup-inf = -1, inf-sup = +1).
pub fn matching_pennies(horizon: f64) -> Result<GameSpec> {
    let u = ControlSet::scalar_points(&[-1.0, 1.0])?;
    let v = ControlSet::scalar_points(&[-1.0, 1.0])?;
    let coeffs = CoefficientBuilder::new(
        1,
        Arc::new(|_, _, _| SymMat::scalar(1.0)),
        Arc::new(|_, _, _| vec![0.0]),
    )
    .derive_drift()
    .driver(
        Arc::new(|_, _, _, _, u, v| u[0] * v[0]),
        false,
        false,
        false,
    )
    .terminal(Arc::new(|_| 0.0))
    .bounds(1.0, 0.0, Modulus::lipschitz(0.0))
    .build();
    GameSpec::new("matching-pennies", 1, horizon, u, v, coeffs)
}

/// Single-player drift control: sigma = 1, b = u in {-1, +1}, terminal
/// payoff -|x|.
pub fn drift_control(horizon: f64) -> Result<GameSpec> {
    let u = ControlSet::scalar_points(&[-1.0, 1.0])?;
    let v = ControlSet::singleton(0.0);
    let radius = default_radius(1.0, 1.0, horizon, DEFAULT_MARGIN);
    let coeffs = CoefficientBuilder::new(
        1,
        Arc::new(|_, _, _| SymMat::scalar(1.0)),
        Arc::new(|_, u, _| vec![u[0]]),
    )
    .derive_drift()
    .terminal(Arc::new(|x| -x[0].abs()))
    .bounds(1.0 + radius, 0.0, Modulus::lipschitz(1.0))
    .build();
    GameSpec::new("drift-control", 1, horizon, u, v, coeffs)
}

/// No-control heat scenario: sigma = 1, b = 0, f = 0, xi = sum of squares.
/// The value has a closed form: sum x_k^2 + d * (T - t).
pub fn heat(dim: usize, horizon: f64) -> Result<GameSpec> {
    let u = ControlSet::singleton(0.0);
    let v = ControlSet::singleton(0.0);
    let radius = default_radius(1.0, 0.0, horizon, DEFAULT_MARGIN);
    let xi_max = dim as f64 * radius * radius;
    let coeffs = CoefficientBuilder::new(
        dim,
        Arc::new(move |_, _, _| SymMat::scaled_identity(dim, 1.0)),
        Arc::new(move |_, _, _| vec![0.0; dim]),
    )
    .derive_drift()
    .terminal(Arc::new(|x| x.iter().map(|c| c * c).sum()))
    .bounds(
        1.0 + xi_max,
        0.0,
        Modulus::lipschitz(2.0 * radius * dim as f64),
    )
    .build();
    GameSpec::new("heat", dim, horizon, u, v, coeffs)
}

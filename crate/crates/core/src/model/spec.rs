use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::coefficients::Coefficients;
use crate::model::control::ControlSet;

/// Bounded path statistic carried as an extra lattice axis. The statistic
/// tracks spatial axis 0 and updates deterministically after each spatial
/// move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugStatistic {
    RunningMax,
    RunningAverage,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Augmentation {
    pub statistic: AugStatistic,
    pub lo: f64,
    pub hi: f64,
}

impl Augmentation {
    /// Deterministic update of the statistic given the spatial move. The
    /// update is monotone in the path: running max never decreases, running
    /// average moves toward the new sample. `step_index` is the number of
    /// spatial steps already taken (the new sample is step `step_index + 1`).
    pub fn update(&self, stat: f64, new_x0: f64, step_index: usize) -> f64 {
        let raw = match self.statistic {
            AugStatistic::RunningMax => stat.max(new_x0),
            AugStatistic::RunningAverage => {
                let k = (step_index + 1) as f64;
                stat + (new_x0 - stat) / (k + 1.0)
            }
        };
        raw.clamp(self.lo, self.hi)
    }

    /// Statistic value at the initial point (path started at 0).
    pub fn initial(&self) -> f64 {
        0.0_f64.clamp(self.lo, self.hi)
    }
}

/// A full game instance: control sets, coefficients, horizon, and optional
/// path-statistic augmentation.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub name: String,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    pub horizon: f64,
    pub u_set: ControlSet,
    pub v_set: ControlSet,
    pub coeffs: Coefficients,
    pub augmentation: Option<Augmentation>,
    /// Half-width of the state box sampled by `validate_spec` for the
    /// terminal-payoff and driver bound checks. Defaults to the reachable
    /// radius when absent.
    pub validation_radius: Option<f64>,
}

impl GameSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        horizon: f64,
        u_set: ControlSet,
        v_set: ControlSet,
        coeffs: Coefficients,
    ) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(LabError::InvalidScenario(format!(
                "spatial dimension must be 1 or 2, got {dim}"
            )));
        }
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(LabError::InvalidScenario(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if coeffs.dim != dim {
            return Err(LabError::InvalidScenario(format!(
                "coefficient dimension {} does not match spatial dimension {dim}",
                coeffs.dim
            )));
        }
        Ok(GameSpec {
            name: name.into(),
            dim,
            horizon,
            u_set,
            v_set,
            coeffs,
            augmentation: None,
            validation_radius: None,
        })
    }

    pub fn with_augmentation(mut self, aug: Augmentation) -> Result<Self> {
        if !aug.lo.is_finite() || !aug.hi.is_finite() || aug.hi <= aug.lo {
            return Err(LabError::InvalidScenario(format!(
                "augmentation bounds must be finite with hi > lo, got [{}, {}]",
                aug.lo, aug.hi
            )));
        }
        self.augmentation = Some(aug);
        Ok(self)
    }

    pub fn with_validation_radius(mut self, radius: f64) -> Self {
        self.validation_radius = Some(radius);
        self
    }

    /// Full lattice state dimension: spatial plus the optional statistic.
    pub fn state_dim(&self) -> usize {
        self.dim + usize::from(self.augmentation.is_some())
    }

    /// A-priori sup bound on the value process implied by the declared
    /// constants: exp(L0*T) * C0 * (1 + T).
    pub fn value_bound(&self) -> f64 {
        (self.coeffs.l0 * self.horizon).exp() * self.coeffs.c0 * (1.0 + self.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coefficients::CoefficientBuilder;
    use crate::linalg::SymMat;
    use std::sync::Arc;

    fn unit_coeffs(dim: usize) -> Coefficients {
        CoefficientBuilder::new(
            dim,
            Arc::new(move |_, _, _| SymMat::scaled_identity(dim, 1.0)),
            Arc::new(move |_, _, _| vec![0.0; dim]),
        )
        .derive_drift()
        .build()
    }

    #[test]
    fn rejects_bad_dimension_and_horizon() {
        let u = ControlSet::singleton(0.0);
        let v = ControlSet::singleton(0.0);
        assert!(GameSpec::new("d3", 3, 1.0, u.clone(), v.clone(), unit_coeffs(2)).is_err());
        assert!(GameSpec::new("t0", 1, 0.0, u, v, unit_coeffs(1)).is_err());
    }

    #[test]
    fn running_max_update_is_monotone() {
        let aug = Augmentation { statistic: AugStatistic::RunningMax, lo: 0.0, hi: 2.0 };
        assert_eq!(aug.update(0.5, 0.3, 0), 0.5);
        assert_eq!(aug.update(0.5, 0.9, 3), 0.9);
        assert_eq!(aug.update(0.5, 5.0, 3), 2.0);
    }

    #[test]
    fn running_average_update() {
        let aug = Augmentation { statistic: AugStatistic::RunningAverage, lo: -10.0, hi: 10.0 };
        // After one step the average of (x_0 = 0, x_1) is x_1 / 2.
        assert_eq!(aug.update(0.0, 1.0, 0), 0.5);
        // Second sample: average of (0, 1, 4) = 5/3; stored stat was 0.5.
        let s = aug.update(0.5, 4.0, 1);
        assert!((s - (0.5 + (4.0 - 0.5) / 3.0)).abs() < 1e-15);
    }
}

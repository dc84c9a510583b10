//! Scenario configuration files: TOML with nested sections naming a
//! built-in coefficient family plus its parameters, control grids, horizon,
//! bounds, and grid resolutions.

use serde::Deserialize;

use crate::error::{LabError, Result};
use crate::model::families;
use crate::model::grid::{GridRequest, SchemeBudget};
use crate::model::spec::{AugStatistic, Augmentation, GameSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub validation: ValidationSection,
    pub augmentation: Option<AugSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub family: String,
    pub dimension: Option<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Diffusion scale (example81, constant).
    pub alpha: Option<f64>,
    /// Terminal offset `a` (example81).
    pub offset: Option<f64>,
    /// Constant-family sigma scale.
    pub sigma: Option<f64>,
    /// Constant-family effective drift vector.
    pub drift: Option<Vec<f64>>,
    /// Constant-family driver value.
    pub driver: Option<f64>,
    /// Constant-family terminal value.
    pub terminal: Option<f64>,
    /// Explicit bound constant (constant family only).
    pub c0: Option<f64>,
    pub u_count: Option<usize>,
    pub v_count: Option<usize>,
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_t: Option<usize>,
    pub resolution: Option<Vec<usize>>,
    pub extents: Option<Vec<[f64; 2]>>,
    pub margin: Option<f64>,
    pub aug_resolution: Option<usize>,
    pub time_safety: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub samples: Option<usize>,
    pub state_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugSection {
    pub statistic: AugStatistic,
    pub lo: f64,
    pub hi: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(format!("config parse error: {e}")))
    }

    /// Loads a config and returns it with the raw text (hashed for the run
    /// manifest and cache keys).
    pub fn load(path: &std::path::Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_toml_str(&text)?;
        Ok((cfg, text))
    }

    pub fn to_spec(&self) -> Result<GameSpec> {
        let s = &self.scenario;
        let mut spec = match s.family.as_str() {
            "heat" => families::heat(s.dimension.unwrap_or(1), s.horizon)?,
            "example81" | "example-8.1" => families::example81(
                s.alpha.unwrap_or(0.3),
                s.offset.unwrap_or(0.5),
                s.horizon,
                s.u_count.unwrap_or(5),
                s.v_count.unwrap_or(5),
            )?,
            "matching-pennies" => families::matching_pennies(s.horizon)?,
            "drift-control" => families::drift_control(s.horizon)?,
            "constant" => {
                let dim = s.dimension.unwrap_or(1);
                let sigma = s.sigma.unwrap_or(1.0);
                let drift = s.drift.clone().unwrap_or_else(|| vec![0.0; dim]);
                let driver = s.driver.unwrap_or(0.0);
                let terminal = s.terminal.unwrap_or(0.0);
                match s.c0 {
                    Some(c0) => families::constant_with_bounds(
                        dim, s.horizon, sigma, drift, driver, terminal, c0,
                    )?,
                    None => families::constant(dim, s.horizon, sigma, drift, driver, terminal)?,
                }
            }
            other => {
                return Err(LabError::Config(format!(
                    "unknown scenario family '{other}' (built-ins: constant, example81, \
                     matching-pennies, drift-control, heat)"
                )))
            }
        };
        if let Some(aug) = &self.augmentation {
            spec = spec.with_augmentation(Augmentation {
                statistic: aug.statistic,
                lo: aug.lo,
                hi: aug.hi,
            })?;
        }
        if let Some(r) = self.validation.state_radius {
            spec = spec.with_validation_radius(r);
        }
        Ok(spec)
    }

    /// Grid resolution used when the config does not pin one.
    pub fn default_resolution(&self, spec: &GameSpec) -> Vec<usize> {
        match self.scenario.family.as_str() {
            "example81" | "example-8.1" => vec![101, 101],
            "heat" => vec![201; spec.dim],
            _ => vec![101; spec.dim],
        }
    }

    pub fn grid_request(&self, spec: &GameSpec, scheme: SchemeBudget) -> GridRequest {
        let mut req = GridRequest::new(
            self.grid
                .resolution
                .clone()
                .unwrap_or_else(|| self.default_resolution(spec)),
        )
        .with_scheme(scheme);
        if let Some(n_t) = self.grid.n_t {
            if n_t > 0 {
                req.n_t = Some(n_t);
            }
        }
        if let Some(extents) = &self.grid.extents {
            req.extents = Some(extents.iter().map(|e| (e[0], e[1])).collect());
        }
        if let Some(m) = self.grid.margin {
            req.margin = m;
        }
        if let Some(a) = self.grid.aug_resolution {
            req.aug_resolution = a;
        }
        if let Some(ts) = self.grid.time_safety {
            req.time_safety = ts;
        }
        req
    }

    pub fn validation_samples(&self) -> usize {
        self.validation.samples.unwrap_or(2000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example81_config() {
        let text = r#"
            [scenario]
            family = "example81"
            horizon = 1.0
            alpha = 0.3
            offset = 0.5
            u_count = 5
            v_count = 5

            [grid]
            resolution = [101, 101]
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let spec = cfg.to_spec().unwrap();
        assert_eq!(spec.dim, 2);
        assert_eq!(spec.u_set.len(), 5);
        let req = cfg.grid_request(&spec, SchemeBudget::Kernel);
        assert_eq!(req.resolution, vec![101, 101]);
    }

    #[test]
    fn rejects_unknown_family_and_keys() {
        let bad_family = r#"
            [scenario]
            family = "mystery"
        "#;
        assert!(ScenarioConfig::from_toml_str(bad_family)
            .unwrap()
            .to_spec()
            .is_err());
        let bad_key = r#"
            [scenario]
            family = "heat"
            unknown_key = 3
        "#;
        assert!(ScenarioConfig::from_toml_str(bad_key).is_err());
    }
}

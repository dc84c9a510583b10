//! Scenario definition, assumption validation, and grid construction.

pub mod coefficients;
pub mod config;
pub mod control;
pub mod families;
pub mod grid;
pub mod spec;
pub mod validate;

pub use coefficients::{CoefficientBuilder, Coefficients, Modulus};
pub use config::ScenarioConfig;
pub use control::ControlSet;
pub use grid::{build_grid, Axis, Grid, GridRequest, SchemeBudget};
pub use spec::{AugStatistic, Augmentation, GameSpec};
pub use validate::{validate_spec, ValidationReport};

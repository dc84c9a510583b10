//! Empirical validation of the standing assumptions on a scenario:
//! coefficient bounds, driver Lipschitz constant, and terminal-payoff
//! bound, each checked by deterministic Monte Carlo sampling.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::max_abs;
use crate::model::grid::{default_radius, sample_envelope};
use crate::model::spec::GameSpec;

/// Point at which a bound was violated (or attained its worst value).
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub u_label: String,
    pub v_label: String,
    pub observed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub bound: f64,
    pub worst: f64,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub samples: usize,
    pub checks: Vec<AssumptionCheck>,
    pub passed: bool,
}

struct Worst {
    value: f64,
    witness: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, witness: None }
    }

    fn observe(&mut self, value: f64, make: impl FnOnce() -> Witness) {
        if value > self.value || self.witness.is_none() {
            self.value = value;
            self.witness = Some(make());
        }
    }

    fn into_check(self, name: &str, bound: f64) -> AssumptionCheck {
        let passed = self.value <= bound;
        AssumptionCheck {
            name: name.to_string(),
            bound,
            worst: self.value,
            witness: if passed { None } else { self.witness },
            passed,
        }
    }
}

/// Checks the assumption suite by sampling (t, x, y, z) and enumerating the
/// control sets exhaustively. Norms are max-abs componentwise. Rejects
/// non-PSD sigma samples outright.
pub fn validate_spec(spec: &GameSpec, n_samples: usize, seed: u64) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(LabError::Config("n_samples must be >= 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let c0 = spec.coeffs.c0;
    let l0 = spec.coeffs.l0;
    let env = sample_envelope(spec);
    let reach = (0..spec.dim)
        .map(|k| default_radius(env.axis_sigma2_max[k], env.axis_drift_max[k], spec.horizon, 0.1))
        .fold(0.0_f64, f64::max);
    let x_radius = spec.validation_radius.unwrap_or(reach);
    let y_bound = spec.value_bound();

    let mut sigma_worst = Worst::new();
    let mut b_worst = Worst::new();
    let mut f0_worst = Worst::new();
    let mut lip_worst = Worst::new();
    let mut xi_worst = Worst::new();

    let state_dim = spec.state_dim();
    for _ in 0..n_samples {
        let t = rng.random_range(0.0..=spec.horizon);
        let mut x = vec![0.0; state_dim];
        for c in x.iter_mut().take(spec.dim) {
            *c = rng.random_range(-x_radius..=x_radius);
        }
        if let Some(aug) = &spec.augmentation {
            x[spec.dim] = rng.random_range(aug.lo..=aug.hi);
        }
        let y = rng.random_range(-y_bound..=y_bound);
        let y2 = rng.random_range(-y_bound..=y_bound);
        let z: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let z2: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-10.0..=10.0)).collect();

        for ui in 0..spec.u_set.len() {
            for vi in 0..spec.v_set.len() {
                let u = spec.u_set.point(ui);
                let v = spec.v_set.point(vi);
                let witness = |observed: f64| Witness {
                    t,
                    x: x.clone(),
                    u_label: spec.u_set.label(ui).to_string(),
                    v_label: spec.v_set.label(vi).to_string(),
                    observed,
                };

                let sigma = spec.coeffs.sigma(t, u, v);
                if !sigma.is_psd(1e-9) {
                    return Err(LabError::InvalidScenario(format!(
                        "sigma is not positive semi-definite at (t = {t:.6}, u = {}, v = {}): \
                         smallest eigenvalue {:.6e}",
                        spec.u_set.label(ui),
                        spec.v_set.label(vi),
                        sigma.eigen_min()
                    )));
                }
                let s_norm = sigma.max_abs_entry();
                sigma_worst.observe(s_norm, || witness(s_norm));

                let b = spec.coeffs.b(t, u, v);
                let b_norm = max_abs(&b);
                b_worst.observe(b_norm, || witness(b_norm));

                let zeros = vec![0.0; spec.dim];
                let f0 = spec.coeffs.f(t, &x, 0.0, &zeros, u, v).abs();
                f0_worst.observe(f0, || witness(f0));

                let f_a = spec.coeffs.f(t, &x, y, &z, u, v);
                let f_b = spec.coeffs.f(t, &x, y2, &z2, u, v);
                let denom = (y - y2).abs()
                    + z.iter().zip(&z2).map(|(a, b)| (a - b).abs()).sum::<f64>();
                if denom > 1e-9 {
                    let ratio = (f_a - f_b).abs() / denom;
                    lip_worst.observe(ratio, || witness(ratio));
                }

                let xi = spec.coeffs.xi(&x).abs();
                xi_worst.observe(xi, || witness(xi));
            }
        }
    }

    let checks = vec![
        sigma_worst.into_check("sigma bounded by C0", c0),
        b_worst.into_check("b bounded by C0", c0),
        f0_worst.into_check("driver at (y, z) = 0 bounded by C0", c0),
        lip_worst.into_check("driver Lipschitz in (y, z) with constant L0", l0 + 1e-9),
        xi_worst.into_check("terminal payoff bounded by C0", c0),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        scenario: spec.name.clone(),
        samples: n_samples,
        checks,
        passed,
    })
}

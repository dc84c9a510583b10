use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::spec::{Augmentation, GameSpec};
use crate::stencil::{DriftMode, StencilPlan};

/// One lattice axis: `count` nodes uniformly spaced on [min, max].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub dx: f64,
}

impl Axis {
    fn new(min: f64, max: f64, count: usize) -> Self {
        let dx = (max - min) / (count - 1) as f64;
        Axis { min, max, count, dx }
    }

    pub fn coord(&self, idx: usize) -> f64 {
        self.min + idx as f64 * self.dx
    }

    pub fn nearest_index(&self, value: f64) -> usize {
        let raw = ((value - self.min) / self.dx).round();
        (raw.max(0.0) as usize).min(self.count - 1)
    }
}

/// Time grid plus spatial lattice (d <= 2) with an optional augmented
/// path-statistic axis. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Grid {
    pub horizon: f64,
    pub n_t: usize,
    pub dt: f64,
    /// Spatial axes first, then the augmented axis when present.
    pub axes: Vec<Axis>,
    pub spatial_dim: usize,
    pub aug: Option<Augmentation>,
    strides: Vec<usize>,
    n_nodes: usize,
}

impl Grid {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn has_aug(&self) -> bool {
        self.aug.is_some()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n_t as f64
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].count
    }

    /// Multi-index of a flat node.
    pub fn multi(&self, node: usize) -> Vec<usize> {
        (0..self.axes.len()).map(|k| self.axis_index(node, k)).collect()
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    /// Writes node coordinates (spatial then statistic) into `buf`.
    pub fn coords_into(&self, node: usize, buf: &mut [f64]) {
        for (k, axis) in self.axes.iter().enumerate() {
            buf[k] = axis.coord(self.axis_index(node, k));
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut buf = vec![0.0; self.axes.len()];
        self.coords_into(node, &mut buf);
        buf
    }

    /// A node is boundary when any spatial index sits on the axis edge.
    /// The statistic axis clamps instead of absorbing.
    pub fn is_spatial_boundary(&self, node: usize) -> bool {
        (0..self.spatial_dim).any(|k| {
            let idx = self.axis_index(node, k);
            idx == 0 || idx == self.axes[k].count - 1
        })
    }

    /// Node closest to the initial state (the origin; statistic at its
    /// initial value).
    pub fn origin_node(&self) -> usize {
        let mut multi = Vec::with_capacity(self.axes.len());
        for k in 0..self.spatial_dim {
            multi.push(self.axes[k].nearest_index(0.0));
        }
        if let Some(aug) = &self.aug {
            multi.push(self.axes[self.spatial_dim].nearest_index(aug.initial()));
        }
        self.flat(&multi)
    }

    pub fn aug_axis(&self) -> Option<&Axis> {
        self.aug.as_ref().map(|_| &self.axes[self.spatial_dim])
    }

    /// All nodes, boundary included.
    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.n_nodes
    }
}

/// How the time budget is computed: the lattice kernel uses central
/// differencing up to capacity, the FD scheme upwinds every first-order
/// term and folds the driver Lipschitz constant into the stay weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeBudget {
    Kernel,
    UpwindFd,
}

#[derive(Debug, Clone)]
pub struct GridRequest {
    /// None = pick the minimal admissible number of steps.
    pub n_t: Option<usize>,
    /// Nodes per spatial axis (>= 3 each).
    pub resolution: Vec<usize>,
    /// Explicit per-axis extents; computed from the coefficient envelope
    /// when absent.
    pub extents: Option<Vec<(f64, f64)>>,
    /// Fractional margin added to computed extents.
    pub margin: f64,
    /// Nodes on the augmented axis (when the spec has one).
    pub aug_resolution: usize,
    pub scheme: SchemeBudget,
    /// Multiplier (>= 1) applied to the automatic step count.
    pub time_safety: f64,
}

impl GridRequest {
    pub fn new(resolution: Vec<usize>) -> Self {
        GridRequest {
            n_t: None,
            resolution,
            extents: None,
            margin: 0.1,
            aug_resolution: 11,
            scheme: SchemeBudget::Kernel,
            time_safety: 1.0,
        }
    }

    pub fn with_n_t(mut self, n_t: usize) -> Self {
        self.n_t = Some(n_t);
        self
    }

    pub fn with_extents(mut self, extents: Vec<(f64, f64)>) -> Self {
        self.extents = Some(extents);
        self
    }

    pub fn with_scheme(mut self, scheme: SchemeBudget) -> Self {
        self.scheme = scheme;
        self
    }
}

/// Coefficient envelope sampled over the control sets and the horizon.
#[derive(Debug, Clone)]
pub struct CoeffEnvelope {
    pub lambda_max_sq: f64,
    pub axis_sigma2_max: Vec<f64>,
    pub axis_drift_max: Vec<f64>,
}

const T_SAMPLES: usize = 64;

/// Samples sigma^2 and the effective drift over all control pairs and a
/// uniform time mesh. Deterministic.
pub fn sample_envelope(spec: &GameSpec) -> CoeffEnvelope {
    let d = spec.dim;
    let mut env = CoeffEnvelope {
        lambda_max_sq: 0.0,
        axis_sigma2_max: vec![0.0; d],
        axis_drift_max: vec![0.0; d],
    };
    for ti in 0..=T_SAMPLES {
        let t = spec.horizon * ti as f64 / T_SAMPLES as f64;
        for ui in 0..spec.u_set.len() {
            for vi in 0..spec.v_set.len() {
                let u = spec.u_set.point(ui);
                let v = spec.v_set.point(vi);
                let a = spec.coeffs.sigma(t, u, v).square();
                env.lambda_max_sq = env.lambda_max_sq.max(a.eigen_max());
                let drift = spec.coeffs.drift(t, u, v);
                for k in 0..d {
                    env.axis_sigma2_max[k] = env.axis_sigma2_max[k].max(a.diag_entry(k));
                    env.axis_drift_max[k] = env.axis_drift_max[k].max(drift[k].abs());
                }
            }
        }
    }
    env
}

/// Default half-width of the covered domain on one axis: the three-sigma
/// diffusion envelope plus the drift range over the horizon, inflated by
/// the margin.
pub fn default_radius(axis_sigma2_max: f64, axis_drift_max: f64, horizon: f64, margin: f64) -> f64 {
    let r = 3.0 * axis_sigma2_max.sqrt() * horizon.sqrt() + axis_drift_max * horizon;
    (r * (1.0 + margin)).max(1e-3)
}

fn ceil_steps(x: f64) -> usize {
    ((x - 1e-9 * x.abs().max(1.0)).ceil().max(1.0)) as usize
}

/// Minimal admissible step count for the given mesh and scheme, together
/// with the reason for the binding constraint.
pub fn minimal_n_t(
    spec: &GameSpec,
    env: &CoeffEnvelope,
    dxs: &[f64],
    scheme: SchemeBudget,
) -> Result<(usize, String)> {
    let horizon = spec.horizon;
    let l0 = spec.coeffs.l0;
    let dx_min = dxs.iter().cloned().fold(f64::INFINITY, f64::min);
    if env.lambda_max_sq <= 0.0 {
        let drift_total: f64 = env.axis_drift_max.iter().sum();
        if drift_total <= 0.0 {
            return Err(LabError::DegenerateDiffusion(
                "sigma vanishes for every control pair and so does the drift".into(),
            ));
        }
        return Err(LabError::DegenerateDiffusion(
            "sigma^2 has zero largest eigenvalue over all sampled (t, u, v)".into(),
        ));
    }

    let cfl_rate = spec.dim as f64 * env.lambda_max_sq / (dx_min * dx_min);
    let mode = DriftMode::CentralWithCapacity;

    let mut mass_rate: f64 = 0.0;
    for ti in 0..=T_SAMPLES {
        let t = horizon * ti as f64 / T_SAMPLES as f64;
        for ui in 0..spec.u_set.len() {
            for vi in 0..spec.v_set.len() {
                let u = spec.u_set.point(ui);
                let v = spec.v_set.point(vi);
                let a = spec.coeffs.sigma(t, u, v).square();
                let drift = spec.coeffs.drift(t, u, v);
                let plan = StencilPlan::build(&a, &drift, dxs, mode).map_err(|detail| {
                    LabError::NegativeStencil {
                        t_index: ti,
                        u_label: spec.u_set.label(ui).to_string(),
                        v_label: spec.v_set.label(vi).to_string(),
                        detail,
                    }
                })?;
                let rate = match scheme {
                    SchemeBudget::Kernel => plan.kernel_mass_rate(),
                    SchemeBudget::UpwindFd => plan.mass_rate_total(),
                };
                mass_rate = mass_rate.max(rate);
            }
        }
    }

    let driver_rate = if scheme == SchemeBudget::UpwindFd { l0 } else { 0.0 };
    let candidates = [
        (horizon * cfl_rate, "dt <= dx^2 / (d * lambda_max(sigma^2))"),
        (horizon * (mass_rate + driver_rate), "stencil positivity"),
    ];
    let (steps_f, mut reason) = candidates
        .iter()
        .cloned()
        .fold((1.0_f64, "one step minimum"), |acc, c| if c.0 > acc.0 { c } else { acc });
    let mut n = ceil_steps(steps_f);
    // dt * L0 < 1 strictly.
    if l0 > 0.0 {
        let l0_floor = (horizon * l0).floor() as usize + 1;
        if l0_floor > n {
            n = l0_floor;
            reason = "dt * L0 < 1";
        }
    }
    Ok((n, reason.to_string()))
}

/// Builds the time grid and spatial lattice for a spec. Deterministic for
/// fixed inputs; errors carry the minimal admissible n_t when the request
/// violates the time-step budget.
pub fn build_grid(spec: &GameSpec, req: &GridRequest) -> Result<Grid> {
    if req.resolution.len() != spec.dim {
        return Err(LabError::Config(format!(
            "resolution has {} axes but the spec has spatial dimension {}",
            req.resolution.len(),
            spec.dim
        )));
    }
    for (k, &count) in req.resolution.iter().enumerate() {
        if count < 3 {
            return Err(LabError::Config(format!(
                "axis {k} resolution must be >= 3, got {count}"
            )));
        }
    }
    if spec.augmentation.is_some() && req.aug_resolution < 3 {
        return Err(LabError::Config(format!(
            "augmented axis resolution must be >= 3, got {}",
            req.aug_resolution
        )));
    }

    let env = sample_envelope(spec);

    let mut axes: Vec<Axis> = Vec::with_capacity(spec.state_dim());
    match &req.extents {
        Some(extents) => {
            if extents.len() != spec.dim {
                return Err(LabError::Config(format!(
                    "extents has {} axes but the spec has spatial dimension {}",
                    extents.len(),
                    spec.dim
                )));
            }
            for (k, &(lo, hi)) in extents.iter().enumerate() {
                if hi.is_nan() || lo.is_nan() || hi <= lo {
                    return Err(LabError::Config(format!(
                        "axis {k} extents must satisfy hi > lo, got [{lo}, {hi}]"
                    )));
                }
                axes.push(Axis::new(lo, hi, req.resolution[k]));
            }
        }
        None => {
            for k in 0..spec.dim {
                let r = default_radius(
                    env.axis_sigma2_max[k],
                    env.axis_drift_max[k],
                    spec.horizon,
                    req.margin,
                );
                axes.push(Axis::new(-r, r, req.resolution[k]));
            }
        }
    }
    if let Some(aug) = &spec.augmentation {
        axes.push(Axis::new(aug.lo, aug.hi, req.aug_resolution));
    }

    let dxs: Vec<f64> = axes[..spec.dim].iter().map(|a| a.dx).collect();
    let (mut n_min, reason) = minimal_n_t(spec, &env, &dxs, req.scheme)?;
    if req.time_safety > 1.0 {
        n_min = ceil_steps(n_min as f64 * req.time_safety);
    }
    let n_t = match req.n_t {
        None => n_min,
        Some(n) => {
            if n < n_min {
                return Err(LabError::CflViolation {
                    requested: n,
                    required: n_min,
                    reason,
                });
            }
            n
        }
    };

    let n_nodes: usize = axes.iter().map(|a| a.count).product();
    let mut strides = vec![1usize; axes.len()];
    for k in (0..axes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].count;
    }

    Ok(Grid {
        horizon: spec.horizon,
        n_t,
        dt: spec.horizon / n_t as f64,
        axes,
        spatial_dim: spec.dim,
        aug: spec.augmentation,
        strides,
        n_nodes,
    })
}

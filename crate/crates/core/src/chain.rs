//! Locally consistent Markov-chain transition kernels for the controlled
//! diffusion on the lattice, one stencil per (time step, control pair).
//!
//! Coefficients do not depend on the state, so a single interior stencil
//! serves every non-boundary node; boundary nodes absorb. Diagonal sigma^2
//! factors into a product of per-axis trinomials; off-diagonal entries use
//! the correlation-splitting superposition with corner moves. Drift is
//! differenced centrally up to the diffusion capacity and upwinded beyond
//! it, which keeps the one-step mean exact and the covariance error at
//! O(dt^2) on the built-in families.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{LabError, Result};
use crate::linalg::SymMat;
use crate::model::{GameSpec, Grid};
use crate::stencil::{DriftMode, StencilPlan};
use crate::tolerances::{PROB_SUM_TOL, SINGULAR_SIGMA_TOL};

/// Probability of landing on the neighbor at `offsets` (per spatial axis).
#[derive(Debug, Clone, Copy)]
pub struct StencilEntry {
    pub offsets: [i8; 2],
    /// Flat index delta for the spatial move (statistic axis unchanged).
    pub flat_delta: i64,
    pub prob: f64,
}

/// Interior stencil for one (time step, u, v) triple, with its exact
/// moments and the cached coefficient evaluations.
#[derive(Debug, Clone)]
pub struct PairStencil {
    pub entries: Vec<StencilEntry>,
    /// Exact stencil mean increment, sum p * delta.
    pub mean: [f64; 2],
    /// Exact stencil covariance increment.
    pub cov: SymMat,
    pub sigma: SymMat,
    pub sigma_sq: SymMat,
    pub drift: [f64; 2],
    /// Smallest eigenvalue of sigma^2 is numerically zero: the z-estimate
    /// falls back to one-sided differences and the stencil is drift-only
    /// on the degenerate directions.
    pub sigma_degenerate: bool,
}

impl PairStencil {
    /// Expectation of `values` after one step from `node`. Boundary nodes
    /// are absorbing.
    pub fn expectation(&self, grid: &Grid, values: &[f64], node: usize, t_idx: usize) -> f64 {
        if grid.is_spatial_boundary(node) {
            return values[node];
        }
        match &grid.aug {
            None => self
                .entries
                .iter()
                .map(|e| e.prob * values[(node as i64 + e.flat_delta) as usize])
                .sum(),
            Some(_) => self
                .entries
                .iter()
                .map(|e| e.prob * values[self.target_with_aug(grid, node, e, t_idx)])
                .sum(),
        }
    }

    /// Expectation and raw covariance of `values` against the spatial
    /// increment: (E[V], Cov(V, dX)).
    pub fn expectation_and_cov(
        &self,
        grid: &Grid,
        values: &[f64],
        node: usize,
        t_idx: usize,
    ) -> (f64, [f64; 2]) {
        if grid.is_spatial_boundary(node) {
            return (values[node], [0.0, 0.0]);
        }
        let d = grid.spatial_dim;
        let mut m = 0.0;
        let mut vdx = [0.0, 0.0];
        for e in &self.entries {
            let val = if grid.aug.is_some() {
                values[self.target_with_aug(grid, node, e, t_idx)]
            } else {
                values[(node as i64 + e.flat_delta) as usize]
            };
            let pv = e.prob * val;
            m += pv;
            for k in 0..d {
                vdx[k] += pv * e.offsets[k] as f64 * grid.axes[k].dx;
            }
        }
        let mut cov = [0.0, 0.0];
        for k in 0..d {
            cov[k] = vdx[k] - m * self.mean[k];
        }
        (m, cov)
    }

    /// Target node for one stencil entry when the statistic axis is
    /// present: the statistic updates deterministically after the spatial
    /// move and snaps to the nearest lattice level.
    fn target_with_aug(&self, grid: &Grid, node: usize, e: &StencilEntry, t_idx: usize) -> usize {
        let aug = grid.aug.as_ref().expect("aug grid");
        let aug_axis = &grid.axes[grid.spatial_dim];
        let idx0 = (grid.axis_index(node, 0) as i64 + e.offsets[0] as i64) as usize;
        let new_x0 = grid.axes[0].coord(idx0);
        let old_aug_idx = grid.axis_index(node, grid.spatial_dim);
        let stat = aug_axis.coord(old_aug_idx);
        let new_stat = aug.update(stat, new_x0, t_idx);
        let new_aug_idx = aug_axis.nearest_index(new_stat);
        let base = (node as i64 + e.flat_delta) as usize;
        (base as i64 + (new_aug_idx as i64 - old_aug_idx as i64) * grid.stride(grid.spatial_dim) as i64)
            as usize
    }

    /// One sampled step from `node`.
    pub fn step(&self, grid: &Grid, node: usize, t_idx: usize, r: f64) -> usize {
        if grid.is_spatial_boundary(node) {
            return node;
        }
        let mut acc = 0.0;
        let mut chosen = self.entries.len() - 1;
        for (i, e) in self.entries.iter().enumerate() {
            acc += e.prob;
            if r < acc {
                chosen = i;
                break;
            }
        }
        let e = &self.entries[chosen];
        if grid.aug.is_some() {
            self.target_with_aug(grid, node, e, t_idx)
        } else {
            (node as i64 + e.flat_delta) as usize
        }
    }
}

/// Per-node, per-control-pair transition stencils for every time step.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub n_t: usize,
    nu: usize,
    nv: usize,
    stencils: Vec<PairStencil>,
    /// Worst |stencil mean - drift * dt| over all (t, u, v).
    pub max_mean_error: f64,
    /// Worst |stencil covariance - sigma^2 * dt| entry over all (t, u, v).
    pub max_cov_error: f64,
    pub any_sigma_degenerate: bool,
}

impl TransitionKernel {
    pub fn stencil(&self, t_idx: usize, ui: usize, vi: usize) -> &PairStencil {
        &self.stencils[(t_idx * self.nu + ui) * self.nv + vi]
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn nv(&self) -> usize {
        self.nv
    }
}

fn clamp_prob(p: f64, what: &str) -> std::result::Result<f64, String> {
    if p < -1e-15 {
        Err(format!("{what} = {p:.3e} is negative"))
    } else {
        Ok(p.max(0.0))
    }
}

fn build_pair_stencil(
    grid: &Grid,
    sigma: SymMat,
    drift_vec: Vec<f64>,
    dt: f64,
) -> std::result::Result<PairStencil, String> {
    let d = grid.spatial_dim;
    let dxs: Vec<f64> = (0..d).map(|k| grid.axes[k].dx).collect();
    let a = sigma.square();
    let plan = StencilPlan::build(&a, &drift_vec, &dxs, DriftMode::CentralWithCapacity)?;

    // Per-axis trinomial weights (probabilities for the product form,
    // superposition weights otherwise).
    let mut up = [0.0f64; 2];
    let mut dn = [0.0f64; 2];
    for (k, ax) in plan.axes.iter().enumerate() {
        let dx = ax.dx;
        let mu_up_pos = ax.mu_upwind.max(0.0);
        let mu_up_neg = (-ax.mu_upwind).max(0.0);
        up[k] = clamp_prob(
            (0.5 * ax.r + 0.5 * ax.mu_central * dx + mu_up_pos * dx) * dt / (dx * dx),
            "p(up)",
        )?;
        dn[k] = clamp_prob(
            (0.5 * ax.r - 0.5 * ax.mu_central * dx + mu_up_neg * dx) * dt / (dx * dx),
            "p(down)",
        )?;
    }

    let mut entries: Vec<StencilEntry> = Vec::with_capacity(9);
    let mut push = |offsets: [i8; 2], prob: f64| {
        if prob > 0.0 {
            let flat_delta = offsets[0] as i64 * grid.stride(0) as i64
                + if d == 2 {
                    offsets[1] as i64 * grid.stride(1) as i64
                } else {
                    0
                };
            entries.push(StencilEntry { offsets, flat_delta, prob });
        }
    };

    if plan.product_form {
        if d == 1 {
            let stay = clamp_prob(1.0 - up[0] - dn[0], "p(stay)")
                .map_err(|e| format!("{e}; reduce dt (increase n_t)"))?;
            push([-1, 0], dn[0]);
            push([0, 0], stay);
            push([1, 0], up[0]);
        } else {
            let stay0 = clamp_prob(1.0 - up[0] - dn[0], "axis-0 p(stay)")
                .map_err(|e| format!("{e}; reduce dt (increase n_t)"))?;
            let stay1 = clamp_prob(1.0 - up[1] - dn[1], "axis-1 p(stay)")
                .map_err(|e| format!("{e}; reduce dt (increase n_t)"))?;
            let probs0 = [(-1i8, dn[0]), (0, stay0), (1, up[0])];
            let probs1 = [(-1i8, dn[1]), (0, stay1), (1, up[1])];
            for (o0, p0) in probs0 {
                for (o1, p1) in probs1 {
                    push([o0, o1], p0 * p1);
                }
            }
        }
    } else {
        let dx01 = dxs[0] * dxs[1];
        let c_pos = clamp_prob(0.5 * plan.corner_pos * dt / dx01, "corner")?;
        let c_neg = clamp_prob(0.5 * plan.corner_neg * dt / dx01, "corner")?;
        let moves = up[0] + dn[0] + up[1] + dn[1] + 2.0 * (c_pos + c_neg);
        let stay = clamp_prob(1.0 - moves, "p(stay)")
            .map_err(|e| format!("{e}; reduce dt (increase n_t) or refine dx"))?;
        push([0, 0], stay);
        push([1, 0], up[0]);
        push([-1, 0], dn[0]);
        push([0, 1], up[1]);
        push([0, -1], dn[1]);
        push([1, 1], c_pos);
        push([-1, -1], c_pos);
        push([1, -1], c_neg);
        push([-1, 1], c_neg);
    }

    let total: f64 = entries.iter().map(|e| e.prob).sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(format!("stencil probabilities sum to {total} != 1"));
    }

    // Exact stencil moments.
    let mut mean = [0.0f64; 2];
    for e in &entries {
        for k in 0..d {
            mean[k] += e.prob * e.offsets[k] as f64 * dxs[k];
        }
    }
    let mut cov = [[0.0f64; 2]; 2];
    for e in &entries {
        for i in 0..d {
            let di = e.offsets[i] as f64 * dxs[i] - mean[i];
            for j in i..d {
                let dj = e.offsets[j] as f64 * dxs[j] - mean[j];
                cov[i][j] += e.prob * di * dj;
            }
        }
    }
    let cov_mat = if d == 1 {
        SymMat::scalar(cov[0][0])
    } else {
        SymMat::new2(cov[0][0], cov[0][1], cov[1][1])
    };

    let mut drift = [0.0f64; 2];
    drift[..d].copy_from_slice(&drift_vec[..d]);
    Ok(PairStencil {
        entries,
        mean,
        cov: cov_mat,
        sigma_degenerate: a.eigen_min() <= SINGULAR_SIGMA_TOL,
        sigma,
        sigma_sq: a,
        drift,
    })
}

/// Builds the kernel for every time step and control pair, verifying the
/// probability and moment invariants as it goes.
pub fn build_kernel(spec: &GameSpec, grid: &Grid) -> Result<TransitionKernel> {
    let nu = spec.u_set.len();
    let nv = spec.v_set.len();
    let n_t = grid.n_t;
    let dt = grid.dt;
    let d = grid.spatial_dim;
    let mut stencils = Vec::with_capacity(n_t * nu * nv);
    let mut max_mean_error = 0.0f64;
    let mut max_cov_error = 0.0f64;
    let mut any_degenerate = false;

    for t_idx in 0..n_t {
        let t = grid.time(t_idx);
        for ui in 0..nu {
            for vi in 0..nv {
                let u = spec.u_set.point(ui);
                let v = spec.v_set.point(vi);
                let sigma = spec.coeffs.sigma(t, u, v);
                let drift = spec.coeffs.drift(t, u, v);
                let st = build_pair_stencil(grid, sigma, drift, dt).map_err(|detail| {
                    LabError::NegativeStencil {
                        t_index: t_idx,
                        u_label: spec.u_set.label(ui).to_string(),
                        v_label: spec.v_set.label(vi).to_string(),
                        detail,
                    }
                })?;
                for k in 0..d {
                    max_mean_error =
                        max_mean_error.max((st.mean[k] - st.drift[k] * dt).abs());
                }
                let target = SymMat {
                    dim: st.sigma_sq.dim,
                    a11: st.sigma_sq.a11 * dt,
                    a12: st.sigma_sq.a12 * dt,
                    a22: st.sigma_sq.a22 * dt,
                };
                max_cov_error = max_cov_error.max(st.cov.sub(&target).max_abs_entry());
                any_degenerate |= st.sigma_degenerate;
                stencils.push(st);
            }
        }
    }

    Ok(TransitionKernel {
        n_t,
        nu,
        nv,
        stencils,
        max_mean_error,
        max_cov_error,
        any_sigma_degenerate: any_degenerate,
    })
}

/// Exact forward propagation of the origin point mass under node-wise
/// controls: rho_{i+1}(target) += rho_i(node) * p. Boundary nodes keep
/// their mass (absorption).
pub fn forward_distribution(
    kernel: &TransitionKernel,
    grid: &Grid,
    mut choose: impl FnMut(usize, usize) -> (usize, usize),
    start: usize,
) -> Vec<Vec<f64>> {
    let n_nodes = grid.n_nodes();
    let mut dist = Vec::with_capacity(kernel.n_t + 1);
    let mut current = vec![0.0f64; n_nodes];
    current[start] = 1.0;
    dist.push(current.clone());
    for t_idx in 0..kernel.n_t {
        let mut next = vec![0.0f64; n_nodes];
        for node in 0..n_nodes {
            let mass = current[node];
            if mass == 0.0 {
                continue;
            }
            if grid.is_spatial_boundary(node) {
                next[node] += mass;
                continue;
            }
            let (ui, vi) = choose(t_idx, node);
            let st = kernel.stencil(t_idx, ui, vi);
            for e in &st.entries {
                let target = if grid.aug.is_some() {
                    st.target_with_aug(grid, node, e, t_idx)
                } else {
                    (node as i64 + e.flat_delta) as usize
                };
                next[target] += mass * e.prob;
            }
        }
        dist.push(next.clone());
        current = next;
    }
    dist
}

/// Samples one lattice path of length n_t + 1 under node-wise controls.
/// Deterministic given the seed; absorbed paths stay on the boundary.
pub fn sample_path(
    kernel: &TransitionKernel,
    grid: &Grid,
    mut choose: impl FnMut(usize, usize) -> (usize, usize),
    seed: u64,
) -> Vec<usize> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(kernel.n_t + 1);
    let mut node = grid.origin_node();
    path.push(node);
    for t_idx in 0..kernel.n_t {
        let (ui, vi) = choose(t_idx, node);
        let r: f64 = rng.random::<f64>();
        node = kernel.stencil(t_idx, ui, vi).step(grid, node, t_idx, r);
        path.push(node);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grid::{build_grid, GridRequest};
    use crate::model::families;
    use crate::tolerances::{CONSTANT_FIELD_TOL, MOMENT_CONSISTENCY_FACTOR};

    #[test]
    fn symmetric_driftless_stencil_at_cfl_limit() {
        // sigma = 1, dt = dx^2: p(up) = p(down) = 1/2, no stay mass.
        let spec = families::heat(1, 1.0).unwrap();
        let req = GridRequest::new(vec![21]).with_extents(vec![(-1.0, 1.0)]);
        let grid = build_grid(&spec, &req).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let st = kernel.stencil(0, 0, 0);
        let p_up = st.entries.iter().find(|e| e.offsets[0] == 1).unwrap().prob;
        let p_dn = st.entries.iter().find(|e| e.offsets[0] == -1).unwrap().prob;
        let stay: f64 = st.entries.iter().filter(|e| e.offsets[0] == 0).map(|e| e.prob).sum();
        assert!((p_up - 0.5).abs() < 1e-12);
        assert!((p_dn - 0.5).abs() < 1e-12);
        assert!(stay < 1e-14);
    }

    #[test]
    fn drifted_stencil_matches_moment_equations() {
        // p(up) - p(down) = mu dt / dx, p(up) + p(down) = dt / dx^2.
        let mu = 0.5;
        let spec = families::constant(1, 1.0, 1.0, vec![mu], 0.0, 0.0).unwrap();
        let req = GridRequest::new(vec![21]).with_extents(vec![(-1.0, 1.0)]).with_n_t(200);
        let grid = build_grid(&spec, &req).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let st = kernel.stencil(0, 0, 0);
        let dx = grid.axes[0].dx;
        let dt = grid.dt;
        let p_up = st.entries.iter().find(|e| e.offsets[0] == 1).unwrap().prob;
        let p_dn = st.entries.iter().find(|e| e.offsets[0] == -1).unwrap().prob;
        assert!((p_up - p_dn - mu * dt / dx).abs() < 1e-14);
        assert!((p_up + p_dn - dt / (dx * dx)).abs() < 1e-14);
    }

    #[test]
    fn product_stencil_covariance_d2() {
        let spec = families::constant(2, 1.0, 1.0, vec![0.0, 0.0], 0.0, 0.0).unwrap();
        let req = GridRequest::new(vec![11, 11]).with_extents(vec![(-1.0, 1.0), (-1.0, 1.0)]);
        let grid = build_grid(&spec, &req).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let st = kernel.stencil(0, 0, 0);
        assert!((st.cov.a11 - grid.dt).abs() < 1e-14);
        assert!((st.cov.a22 - grid.dt).abs() < 1e-14);
        assert!(st.cov.a12.abs() < 1e-14);
        assert!(st.mean[0].abs() < 1e-15 && st.mean[1].abs() < 1e-15);
    }

    fn correlated_spec(s12: f64) -> GameSpec {
        use crate::model::{CoefficientBuilder, ControlSet, Modulus};
        use std::sync::Arc;
        let coeffs = CoefficientBuilder::new(
            2,
            Arc::new(move |_, _, _| SymMat::new2(1.0, s12, 1.0)),
            Arc::new(|_, _, _| vec![0.0, 0.0]),
        )
        .derive_drift()
        .bounds(2.0, 0.0, Modulus::lipschitz(0.0))
        .build();
        GameSpec::new(
            "correlated",
            2,
            1.0,
            ControlSet::singleton(0.0),
            ControlSet::singleton(0.0),
            coeffs,
        )
        .unwrap()
    }

    #[test]
    fn correlated_stencil_moments_are_consistent() {
        let spec = correlated_spec(0.3);
        let req = GridRequest::new(vec![15, 15])
            .with_extents(vec![(-2.0, 2.0), (-2.0, 2.0)]);
        let grid = build_grid(&spec, &req).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let st = kernel.stencil(0, 0, 0);
        let a = st.sigma_sq;
        assert!((st.cov.a12 - a.a12 * grid.dt).abs() < 1e-13);
        assert!((st.cov.a11 - a.a11 * grid.dt).abs() < 1e-13);
    }

    #[test]
    fn correlation_beyond_diagonal_budget_errors() {
        // dx ratio 2 with sigma^2 off-diagonal close to the diagonal:
        // r = a11 - |a12| * dx0/dx1 < 0.
        let spec = correlated_spec(0.9);
        let req = GridRequest::new(vec![11, 21])
            .with_extents(vec![(-1.0, 1.0), (-1.0, 1.0)]);
        match build_grid(&spec, &req) {
            Err(LabError::NegativeStencil { .. }) => {}
            other => panic!("expected negative stencil error, got {other:?}"),
        }
    }

    #[test]
    fn moment_consistency_on_builtins() {
        let cases: Vec<(GameSpec, GridRequest)> = vec![
            (
                families::example81(0.3, 0.5, 1.0, 5, 5).unwrap(),
                GridRequest::new(vec![101, 101]),
            ),
            (families::drift_control(1.0).unwrap(), GridRequest::new(vec![101])),
            (families::heat(1, 1.0).unwrap(), GridRequest::new(vec![101])),
            (families::matching_pennies(1.0).unwrap(), GridRequest::new(vec![51])),
        ];
        for (spec, req) in cases {
            let grid = build_grid(&spec, &req).unwrap();
            let kernel = build_kernel(&spec, &grid).unwrap();
            let budget = MOMENT_CONSISTENCY_FACTOR * grid.dt * grid.dt;
            assert!(
                kernel.max_mean_error <= budget,
                "{}: mean error {} > {}",
                spec.name,
                kernel.max_mean_error,
                budget
            );
            assert!(
                kernel.max_cov_error <= budget,
                "{}: cov error {} > {}",
                spec.name,
                kernel.max_cov_error,
                budget
            );
        }
    }

    #[test]
    fn constant_field_is_invariant() {
        let spec = families::example81(0.3, 0.5, 1.0, 5, 5).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![31, 31])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let c = 4.75;
        let values = vec![c; grid.n_nodes()];
        for &node in &[grid.origin_node(), grid.origin_node() + 1, 0] {
            for ui in 0..kernel.nu() {
                for vi in 0..kernel.nv() {
                    let m = kernel.stencil(0, ui, vi).expectation(&grid, &values, node, 0);
                    assert!((m - c).abs() <= CONSTANT_FIELD_TOL);
                }
            }
        }
    }

    #[test]
    fn degenerate_pair_gets_pure_drift_stencil() {
        // sigma = |u|, drift = u: the u = 0 control is diffusionless and
        // its stencil must carry the mass along the drift direction only.
        use crate::model::{CoefficientBuilder, ControlSet, Modulus};
        use std::sync::Arc;
        let coeffs = CoefficientBuilder::new(
            1,
            Arc::new(|_, u: &[f64], _| SymMat::scalar(u[0].abs())),
            Arc::new(|_, _, _| vec![0.0]),
        )
        .direct_drift(Arc::new(|_, u: &[f64], _| vec![u[0] + 0.5]))
        .bounds(2.0, 0.0, Modulus::lipschitz(0.0))
        .build();
        let spec = GameSpec::new(
            "mixed-degenerate",
            1,
            1.0,
            ControlSet::scalar_points(&[0.0, 1.0]).unwrap(),
            ControlSet::singleton(0.0),
            coeffs,
        )
        .unwrap();
        let grid = build_grid(
            &spec,
            &GridRequest::new(vec![41]).with_extents(vec![(-3.0, 3.0)]),
        )
        .unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        assert!(kernel.any_sigma_degenerate);

        let degenerate = kernel.stencil(0, 0, 0);
        assert!(degenerate.sigma_degenerate);
        // Mass moves only upward (drift +0.5, no diffusion).
        assert!(degenerate.entries.iter().all(|e| e.offsets[0] >= 0));
        assert!((degenerate.mean[0] - 0.5 * grid.dt).abs() < 1e-15);
        assert!(degenerate.cov.a11 <= 0.5 * grid.dt * grid.axes[0].dx + 1e-15);

        let diffusive = kernel.stencil(0, 1, 0);
        assert!(!diffusive.sigma_degenerate);

        // The z-estimate falls back to one-sided differences on the
        // degenerate pair and flags it.
        let values: Vec<f64> = grid.nodes().map(|n| grid.coords(n)[0] * 2.0).collect();
        let r = crate::dpp::one_step(
            &spec,
            &grid,
            &kernel,
            &values,
            grid.origin_node(),
            0,
            0,
            0,
        );
        assert!(r.z_fallback);
        assert!((r.z[0] - 2.0).abs() < 1e-12, "fallback slope {}", r.z[0]);
        let r2 = crate::dpp::one_step(
            &spec,
            &grid,
            &kernel,
            &values,
            grid.origin_node(),
            0,
            1,
            0,
        );
        assert!(!r2.z_fallback);
    }

    #[test]
    fn path_determinism_and_absorption() {
        let spec = families::heat(1, 1.0).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![31])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let a = sample_path(&kernel, &grid, |_, _| (0, 0), 7);
        let b = sample_path(&kernel, &grid, |_, _| (0, 0), 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), grid.n_t + 1);

        // A boundary start is absorbing.
        let st = kernel.stencil(0, 0, 0);
        let boundary_node = 0;
        assert_eq!(st.step(&grid, boundary_node, 0, 0.3), boundary_node);
    }

    #[test]
    fn terminal_variance_matches_horizon() {
        // Driftless unit diffusion: Var(X_T) = T up to truncation, checked
        // against the Monte Carlo standard error.
        let spec = families::heat(1, 1.0).unwrap();
        let req = GridRequest::new(vec![67]);
        let grid = build_grid(&spec, &req).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let n_paths = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut coords = vec![0.0; 1];
        for p in 0..n_paths {
            let path = sample_path(&kernel, &grid, |_, _| (0, 0), 1000 + p as u64);
            grid.coords_into(*path.last().unwrap(), &mut coords);
            let x = coords[0];
            sum += x;
            sum_sq += x * x;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        // Standard error of a variance estimate: var * sqrt(2/(n-1)).
        let se = var * (2.0 / (n - 1.0)).sqrt();
        assert!(
            (var - 1.0).abs() <= 3.0 * se + 5e-3,
            "terminal variance {var} vs 1.0 (se {se})"
        );
    }
}

//! Backward dynamic-programming solver: lower and upper game values via
//! sup-inf / inf-sup of the one-step operator, and fixed-policy
//! evaluation.
//!
//! One step applies the control-pair kernel expectation and an explicit
//! driver increment evaluated at the conditional mean. The z-estimate
//! comes from the kernel covariance against the spatial increment, so it
//! plays the gradient role without regression machinery. Within a slice
//! node updates are independent and run in parallel; slices are strictly
//! sequential, and results do not depend on the degree of parallelism.

use rayon::prelude::*;

use crate::chain::{sample_path, PairStencil, TransitionKernel};
use crate::error::{LabError, Result};
use crate::hamiltonian::{inf_sup, sup_inf};
use crate::model::{GameSpec, Grid};

/// Which problem a value field solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Lower,
    Upper,
    FixedPolicy,
}

/// Which side of the game a solve optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// Value tables per time slice with companion z-estimates and metadata.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub problem: ProblemKind,
    /// slices[i][node], i = 0..=n_t.
    pub slices: Vec<Vec<f64>>,
    /// z_slices[i][node * d + k], i = 0..n_t (no z at the terminal slice).
    pub z_slices: Vec<Vec<f64>>,
    /// Nodes where the covariance z-estimate fell back to one-sided
    /// differences because sigma^2 was singular.
    pub z_fallback_nodes: usize,
    /// Some control pair had numerically degenerate diffusion somewhere.
    pub sigma_degenerate: bool,
}

impl ValueField {
    pub fn value(&self, t_idx: usize, node: usize) -> f64 {
        self.slices[t_idx][node]
    }

    pub fn at_origin(&self, grid: &Grid) -> f64 {
        self.slices[0][grid.origin_node()]
    }

    pub fn max_abs(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlSide {
    U,
    V,
}

/// Feedback policy: a control index per (time slice, node), drawn from
/// the control set named by `side`.
#[derive(Debug, Clone)]
pub struct Policy {
    pub side: ControlSide,
    /// choices[i][node] for i = 0..n_t.
    pub choices: Vec<Vec<u16>>,
}

impl Policy {
    pub fn uniform(side: ControlSide, grid: &Grid, index: u16) -> Policy {
        Policy {
            side,
            choices: vec![vec![index; grid.n_nodes()]; grid.n_t],
        }
    }

    /// Uniformly random node-wise controls, drawn from the caller's rng.
    pub fn random(
        side: ControlSide,
        grid: &Grid,
        set_len: usize,
        rng: &mut impl rand::Rng,
    ) -> Policy {
        let choices = (0..grid.n_t)
            .map(|_| {
                (0..grid.n_nodes())
                    .map(|_| rng.random_range(0..set_len) as u16)
                    .collect()
            })
            .collect();
        Policy { side, choices }
    }

    fn check(&self, grid: &Grid, set_len: usize) -> Result<()> {
        if self.choices.len() != grid.n_t {
            return Err(LabError::InvalidPolicy(format!(
                "policy covers {} slices, grid has {}",
                self.choices.len(),
                grid.n_t
            )));
        }
        for (i, slice) in self.choices.iter().enumerate() {
            if slice.len() != grid.n_nodes() {
                return Err(LabError::InvalidPolicy(format!(
                    "slice {i} covers {} nodes, grid has {}",
                    slice.len(),
                    grid.n_nodes()
                )));
            }
            if let Some(&bad) = slice.iter().find(|&&c| c as usize >= set_len) {
                return Err(LabError::InvalidPolicy(format!(
                    "slice {i} assigns control index {bad} outside the set of size {set_len}"
                )));
            }
        }
        Ok(())
    }
}

/// Lower or upper solve output: the field plus the extracted feedback
/// policies (argmax into u, argmin into v, lowest index on ties).
#[derive(Debug, Clone)]
pub struct GameSolution {
    pub field: ValueField,
    pub u_policy: Policy,
    pub v_policy: Policy,
}

pub struct OneStepResult {
    pub y: f64,
    pub z: [f64; 2],
    pub z_fallback: bool,
}

/// The z-estimate: kernel covariance mapped through (sigma^2 dt)^{-1} sigma,
/// with a one-sided finite-difference fallback when sigma^2 is singular.
fn z_estimate(
    st: &PairStencil,
    grid: &Grid,
    values_next: &[f64],
    node: usize,
    zraw: [f64; 2],
    dt: f64,
) -> ([f64; 2], bool) {
    if !st.sigma_degenerate {
        if let Some(w) = st.sigma_sq.solve2(zraw, 1e-300) {
            let zs = st.sigma.mul_vec2(w);
            return ([zs[0] / dt, zs[1] / dt], false);
        }
    }
    let mut z = [0.0, 0.0];
    for k in 0..grid.spatial_dim {
        let ahead = node + grid.stride(k);
        z[k] = (values_next[ahead] - values_next[node]) / grid.axes[k].dx;
    }
    (z, true)
}

/// One explicit step of the fixed-pair operator at an interior node:
/// y = m + dt * f(t, x, m, z*sigma, u, v) with m the kernel expectation.
/// Boundary nodes absorb (frozen value, zero z).
pub fn one_step(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    values_next: &[f64],
    node: usize,
    t_idx: usize,
    ui: usize,
    vi: usize,
) -> OneStepResult {
    if grid.is_spatial_boundary(node) {
        return OneStepResult { y: values_next[node], z: [0.0, 0.0], z_fallback: false };
    }
    let st = kernel.stencil(t_idx, ui, vi);
    let (m, zraw) = st.expectation_and_cov(grid, values_next, node, t_idx);
    let (z, z_fallback) = z_estimate(st, grid, values_next, node, zraw, grid.dt);
    let z_sigma = st.sigma.mul_vec2(z);
    let mut x = [0.0f64; 3];
    grid.coords_into(node, &mut x[..grid.n_axes()]);
    let t = grid.time(t_idx);
    let f = spec.coeffs.f(
        t,
        &x[..grid.n_axes()],
        m,
        &z_sigma[..grid.spatial_dim],
        spec.u_set.point(ui),
        spec.v_set.point(vi),
    );
    OneStepResult { y: m + grid.dt * f, z, z_fallback }
}

enum ControlRule<'a> {
    Optimize(Side),
    Fixed(&'a Policy, &'a Policy),
}

/// Slices t_lo..=t_hi of a backward pass (index 0 of `slices` is t_lo).
#[derive(Debug, Clone)]
pub struct SegmentSolution {
    pub t_lo: usize,
    pub t_hi: usize,
    pub slices: Vec<Vec<f64>>,
    pub z_slices: Vec<Vec<f64>>,
    pub u_choices: Vec<Vec<u16>>,
    pub v_choices: Vec<Vec<u16>>,
    pub z_fallback_nodes: usize,
}

struct NodeOut {
    value: f64,
    z: [f64; 2],
    ui: u16,
    vi: u16,
    fallback: bool,
}

fn backward_segment(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    rule: &ControlRule,
    terminal: &[f64],
    t_hi: usize,
    t_lo: usize,
) -> SegmentSolution {
    let n_nodes = grid.n_nodes();
    let nu = spec.u_set.len();
    let nv = spec.v_set.len();
    let d = grid.spatial_dim;
    let dt = grid.dt;
    let f_simple = !spec.coeffs.f_uses_state && !spec.coeffs.f_uses_y && !spec.coeffs.f_uses_z;
    let f_uses_z = spec.coeffs.f_uses_z;

    let steps = t_hi - t_lo;
    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut z_slices: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut u_choices: Vec<Vec<u16>> = Vec::with_capacity(steps);
    let mut v_choices: Vec<Vec<u16>> = Vec::with_capacity(steps);
    let mut fallback_count = 0usize;

    slices.push(terminal.to_vec());
    let mut next: Vec<f64> = terminal.to_vec();

    for step in 0..steps {
        let t_idx = t_hi - 1 - step;
        let t = grid.time(t_idx);
        let stencils: Vec<&PairStencil> = (0..nu * nv)
            .map(|p| kernel.stencil(t_idx, p / nv, p % nv))
            .collect();
        // Driver values per pair when f ignores (x, y, z).
        let f_const: Vec<f64> = if f_simple {
            let zeros = [0.0f64; 2];
            (0..nu * nv)
                .map(|p| {
                    spec.coeffs.f(
                        t,
                        &zeros[..d],
                        0.0,
                        &zeros[..d],
                        spec.u_set.point(p / nv),
                        spec.v_set.point(p % nv),
                    )
                })
                .collect()
        } else {
            Vec::new()
        };

        let next_ref = &next;
        let outs: Vec<NodeOut> = (0..n_nodes)
            .into_par_iter()
            .map(|node| {
                if grid.is_spatial_boundary(node) {
                    return NodeOut {
                        value: terminal[node],
                        z: [0.0, 0.0],
                        ui: 0,
                        vi: 0,
                        fallback: false,
                    };
                }
                let mut x = [0.0f64; 3];
                if !f_simple {
                    grid.coords_into(node, &mut x[..grid.n_axes()]);
                }
                let pair_value = |ui: usize, vi: usize| -> f64 {
                    let st = stencils[ui * nv + vi];
                    if f_simple {
                        let m = st.expectation(grid, next_ref, node, t_idx);
                        m + dt * f_const[ui * nv + vi]
                    } else {
                        let (m, zraw) = st.expectation_and_cov(grid, next_ref, node, t_idx);
                        let z_sigma = if f_uses_z {
                            let (z, _) = z_estimate(st, grid, next_ref, node, zraw, dt);
                            st.sigma.mul_vec2(z)
                        } else {
                            [0.0, 0.0]
                        };
                        let f = spec.coeffs.f(
                            t,
                            &x[..grid.n_axes()],
                            m,
                            &z_sigma[..d],
                            spec.u_set.point(ui),
                            spec.v_set.point(vi),
                        );
                        m + dt * f
                    }
                };

                let (value, ui, vi) = match rule {
                    ControlRule::Fixed(u_pol, v_pol) => {
                        let ui = u_pol.choices[t_idx][node] as usize;
                        let vi = v_pol.choices[t_idx][node] as usize;
                        (pair_value(ui, vi), ui, vi)
                    }
                    ControlRule::Optimize(side) => {
                        let mut matrix = vec![0.0f64; nu * nv];
                        for ui in 0..nu {
                            for vi in 0..nv {
                                matrix[ui * nv + vi] = pair_value(ui, vi);
                            }
                        }
                        match side {
                            Side::Lower => {
                                let (v, au, av) = sup_inf(&matrix, nu, nv);
                                (v, au, av)
                            }
                            Side::Upper => {
                                let (v, au, av) = inf_sup(&matrix, nu, nv);
                                (v, au, av)
                            }
                        }
                    }
                };

                // Companion z for the chosen pair.
                let st = stencils[ui * nv + vi];
                let (_, zraw) = st.expectation_and_cov(grid, next_ref, node, t_idx);
                let (z, fallback) = z_estimate(st, grid, next_ref, node, zraw, dt);
                NodeOut { value, z, ui: ui as u16, vi: vi as u16, fallback }
            })
            .collect();

        let mut slice = vec![0.0f64; n_nodes];
        let mut z_slice = vec![0.0f64; n_nodes * d];
        let mut u_slice = vec![0u16; n_nodes];
        let mut v_slice = vec![0u16; n_nodes];
        for (node, out) in outs.into_iter().enumerate() {
            slice[node] = out.value;
            z_slice[node * d..node * d + d].copy_from_slice(&out.z[..d]);
            u_slice[node] = out.ui;
            v_slice[node] = out.vi;
            fallback_count += usize::from(out.fallback);
        }
        next = slice.clone();
        slices.push(slice);
        z_slices.push(z_slice);
        u_choices.push(u_slice);
        v_choices.push(v_slice);
    }

    slices.reverse();
    z_slices.reverse();
    u_choices.reverse();
    v_choices.reverse();
    SegmentSolution {
        t_lo,
        t_hi,
        slices,
        z_slices,
        u_choices,
        v_choices,
        z_fallback_nodes: fallback_count,
    }
}

/// Terminal payoff evaluated on every node.
pub fn terminal_values(spec: &GameSpec, grid: &Grid) -> Vec<f64> {
    let mut buf = vec![0.0f64; grid.n_axes()];
    grid.nodes()
        .map(|node| {
            grid.coords_into(node, &mut buf);
            spec.coeffs.xi(&buf)
        })
        .collect()
}

/// Backward pass over slices [t_lo, t_hi] with explicit terminal data at
/// t_hi, optimizing the requested side.
pub fn solve_game_segment(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    side: Side,
    terminal: &[f64],
    t_hi: usize,
    t_lo: usize,
) -> SegmentSolution {
    backward_segment(
        spec,
        grid,
        kernel,
        &ControlRule::Optimize(side),
        terminal,
        t_hi,
        t_lo,
    )
}

fn solution_from_segment(
    kernel: &TransitionKernel,
    problem: ProblemKind,
    seg: SegmentSolution,
) -> GameSolution {
    GameSolution {
        field: ValueField {
            problem,
            slices: seg.slices,
            z_slices: seg.z_slices,
            z_fallback_nodes: seg.z_fallback_nodes,
            sigma_degenerate: kernel.any_sigma_degenerate,
        },
        u_policy: Policy { side: ControlSide::U, choices: seg.u_choices },
        v_policy: Policy { side: ControlSide::V, choices: seg.v_choices },
    }
}

/// Full backward solve from the terminal payoff. The lower side takes
/// max over u of min over v of the one-step value; the upper side takes
/// min over v of max over u.
pub fn solve_game(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    side: Side,
) -> GameSolution {
    let terminal = terminal_values(spec, grid);
    let seg = solve_game_segment(spec, grid, kernel, side, &terminal, grid.n_t, 0);
    let problem = match side {
        Side::Lower => ProblemKind::Lower,
        Side::Upper => ProblemKind::Upper,
    };
    solution_from_segment(kernel, problem, seg)
}

/// Same recursion with the controls read from the given policies.
pub fn evaluate_policies(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    u_policy: &Policy,
    v_policy: &Policy,
) -> Result<ValueField> {
    u_policy.check(grid, spec.u_set.len())?;
    v_policy.check(grid, spec.v_set.len())?;
    let terminal = terminal_values(spec, grid);
    let seg = backward_segment(
        spec,
        grid,
        kernel,
        &ControlRule::Fixed(u_policy, v_policy),
        &terminal,
        grid.n_t,
        0,
    );
    Ok(ValueField {
        problem: ProblemKind::FixedPolicy,
        slices: seg.slices,
        z_slices: seg.z_slices,
        z_fallback_nodes: seg.z_fallback_nodes,
        sigma_degenerate: kernel.any_sigma_degenerate,
    })
}

/// Best response of one side against a frozen opponent policy: a full
/// single-player backward recursion. Returns the response solution; the
/// optimizing side's policy is the exact lattice best response.
pub fn best_response(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    against: &Policy,
    optimize: ControlSide,
) -> Result<GameSolution> {
    let terminal = terminal_values(spec, grid);
    let n_nodes = grid.n_nodes();
    let nu = spec.u_set.len();
    let nv = spec.v_set.len();
    match optimize {
        ControlSide::U => against.check(grid, nv)?,
        ControlSide::V => against.check(grid, nu)?,
    }

    // Reuse the optimizing machinery by restricting the opposing control
    // set to the frozen policy via a per-node matrix scan. The recursion
    // below mirrors backward_segment with a single optimized side.
    let mut next = terminal.clone();
    let mut slices = vec![terminal.clone()];
    let mut z_slices = Vec::new();
    let mut u_choices = Vec::new();
    let mut v_choices = Vec::new();
    let mut fallback = 0usize;
    for step in 0..grid.n_t {
        let t_idx = grid.n_t - 1 - step;
        let next_ref = &next;
        let outs: Vec<NodeOut> = (0..n_nodes)
            .into_par_iter()
            .map(|node| {
                if grid.is_spatial_boundary(node) {
                    return NodeOut {
                        value: terminal[node],
                        z: [0.0, 0.0],
                        ui: 0,
                        vi: 0,
                        fallback: false,
                    };
                }
                let frozen = against.choices[t_idx][node] as usize;
                let (own_len, is_u) = match optimize {
                    ControlSide::U => (nu, true),
                    ControlSide::V => (nv, false),
                };
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for own in 0..own_len {
                    let (ui, vi) = if is_u { (own, frozen) } else { (frozen, own) };
                    let r = one_step(spec, grid, kernel, next_ref, node, t_idx, ui, vi);
                    let score = if is_u { r.y } else { -r.y };
                    if score > best {
                        best = score;
                        best_idx = own;
                    }
                }
                let (ui, vi) = if is_u { (best_idx, frozen) } else { (frozen, best_idx) };
                let r = one_step(spec, grid, kernel, next_ref, node, t_idx, ui, vi);
                NodeOut { value: r.y, z: r.z, ui: ui as u16, vi: vi as u16, fallback: r.z_fallback }
            })
            .collect();
        let d = grid.spatial_dim;
        let mut slice = vec![0.0f64; n_nodes];
        let mut z_slice = vec![0.0f64; n_nodes * d];
        let mut u_slice = vec![0u16; n_nodes];
        let mut v_slice = vec![0u16; n_nodes];
        for (node, out) in outs.into_iter().enumerate() {
            slice[node] = out.value;
            z_slice[node * d..node * d + d].copy_from_slice(&out.z[..d]);
            u_slice[node] = out.ui;
            v_slice[node] = out.vi;
            fallback += usize::from(out.fallback);
        }
        next = slice.clone();
        slices.push(slice);
        z_slices.push(z_slice);
        u_choices.push(u_slice);
        v_choices.push(v_slice);
    }
    slices.reverse();
    z_slices.reverse();
    u_choices.reverse();
    v_choices.reverse();
    Ok(GameSolution {
        field: ValueField {
            problem: ProblemKind::FixedPolicy,
            slices,
            z_slices,
            z_fallback_nodes: fallback,
            sigma_degenerate: kernel.any_sigma_degenerate,
        },
        u_policy: Policy { side: ControlSide::U, choices: u_choices },
        v_policy: Policy { side: ControlSide::V, choices: v_choices },
    })
}

/// Two-stage recomposition check: solve the lower game in one pass, then
/// solve [split, T] and reuse its slice as terminal data for [0, split].
/// Returns the max-abs deviation over the initial slice (identically zero:
/// both computations perform the same arithmetic).
pub fn dpp_consistency(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    split: usize,
) -> Result<f64> {
    if split == 0 || split >= grid.n_t {
        return Err(LabError::Config(format!(
            "split index must lie strictly inside (0, {}), got {split}",
            grid.n_t
        )));
    }
    let terminal = terminal_values(spec, grid);
    let full = solve_game_segment(spec, grid, kernel, Side::Lower, &terminal, grid.n_t, 0);
    let tail = solve_game_segment(spec, grid, kernel, Side::Lower, &terminal, grid.n_t, split);
    let head = solve_game_segment(spec, grid, kernel, Side::Lower, &tail.slices[0], split, 0);
    let dev = full.slices[0]
        .iter()
        .zip(&head.slices[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    Ok(dev)
}

/// Pointwise gap statistics between the lower and upper fields.
#[derive(Debug, Clone, Copy)]
pub struct GapStats {
    /// max over all slices and nodes of (lower - upper); positive values
    /// violate weak duality.
    pub max_duality_violation: f64,
    /// max over all slices and nodes of |upper - lower|.
    pub max_abs_gap: f64,
    /// |upper - lower| at (t = 0, origin).
    pub origin_gap: f64,
}

pub fn gap_stats(lower: &ValueField, upper: &ValueField, grid: &Grid) -> GapStats {
    let mut violation = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    for (ls, us) in lower.slices.iter().zip(&upper.slices) {
        for (l, u) in ls.iter().zip(us) {
            violation = violation.max(l - u);
            max_abs = max_abs.max((u - l).abs());
        }
    }
    let origin = grid.origin_node();
    GapStats {
        max_duality_violation: violation,
        max_abs_gap: max_abs,
        origin_gap: (upper.slices[0][origin] - lower.slices[0][origin]).abs(),
    }
}

/// Samples one lattice path under a feedback policy pair.
pub fn sample_policy_path(
    kernel: &TransitionKernel,
    grid: &Grid,
    u_policy: &Policy,
    v_policy: &Policy,
    seed: u64,
) -> Vec<usize> {
    sample_path(
        kernel,
        grid,
        |t_idx, node| {
            (
                u_policy.choices[t_idx][node] as usize,
                v_policy.choices[t_idx][node] as usize,
            )
        },
        seed,
    )
}

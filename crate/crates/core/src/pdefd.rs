//! Monotone explicit finite-difference solver for the Markovian
//! Bellman-Isaacs equation, used as an independent cross-oracle for the
//! lattice dynamic-programming solver.
//!
//! Central second-order differences with correlation splitting for mixed
//! terms, fully upwinded first-order terms chosen per control pair inside
//! the sup-inf enumeration, and Dirichlet data on the parabolic boundary.
//! The per-pair quotient payoff is assembled from the same coefficient
//! evaluations the Hamiltonian module uses, and the extrema share its
//! enumeration and tie-breaking.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::hamiltonian::{inf_sup, isaacs_check, sup_inf};
use crate::model::coefficients::TerminalFn;
use crate::model::grid::{minimal_n_t, sample_envelope, SchemeBudget};
use crate::model::{GameSpec, Grid};
use crate::stencil::{DriftMode, StencilPlan};
use crate::tolerances::{ISAACS_DEFAULT_TOL, SEAM_TOL};
use crate::dpp::{ProblemKind, ValueField};

pub type LateralFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// Terminal-boundary data for the localized Dirichlet problem on the grid
/// box. Lateral data must agree with the terminal data on the corner seam.
#[derive(Clone)]
pub struct PdeProblem {
    terminal: Arc<TerminalFn>,
    lateral: Arc<LateralFn>,
}

impl PdeProblem {
    pub fn new(terminal: Arc<TerminalFn>, lateral: Arc<LateralFn>) -> Self {
        PdeProblem { terminal, lateral }
    }

    /// Standard localization: both terminal and lateral data are the
    /// terminal-payoff extension.
    pub fn from_spec(spec: &GameSpec) -> Self {
        let coeffs = spec.coeffs.clone();
        let coeffs2 = spec.coeffs.clone();
        PdeProblem {
            terminal: Arc::new(move |x| coeffs.xi(x)),
            lateral: Arc::new(move |_, x| coeffs2.xi(x)),
        }
    }

    pub fn terminal_at(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }

    pub fn lateral_at(&self, t: f64, x: &[f64]) -> f64 {
        (self.lateral)(t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeSide {
    Lower,
    Upper,
    /// Solve with the lower Hamiltonian while recording the largest
    /// pointwise sup-inf vs inf-sup gap encountered.
    Isaacs,
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub field: ValueField,
    /// Largest enumeration gap seen during an Isaacs-side solve.
    pub isaacs_max_gap: f64,
}

/// Verifies uniform ellipticity by sampling: smallest eigenvalue of
/// sigma^2 must be positive over all (t, u, v).
fn check_ellipticity(spec: &GameSpec) -> Result<()> {
    const SAMPLES: usize = 64;
    for ti in 0..=SAMPLES {
        let t = spec.horizon * ti as f64 / SAMPLES as f64;
        for ui in 0..spec.u_set.len() {
            for vi in 0..spec.v_set.len() {
                let a = spec
                    .coeffs
                    .sigma(t, spec.u_set.point(ui), spec.v_set.point(vi))
                    .square();
                let lambda_min = a.eigen_min();
                if lambda_min <= 1e-12 {
                    return Err(LabError::EllipticityViolation {
                        lambda_min,
                        t,
                        u_label: spec.u_set.label(ui).to_string(),
                        v_label: spec.v_set.label(vi).to_string(),
                    });
                }
            }
        }
    }
    Ok(())
}

struct PairCoeffs {
    plan: StencilPlan,
    sigma: crate::linalg::SymMat,
    u_idx: usize,
    v_idx: usize,
}

/// Backward explicit solve of -dV/dt - G(t, x, V, DV, D^2 V) = 0 with
/// G evaluated by exhaustive enumeration on difference quotients.
pub fn solve_pde(
    problem: &PdeProblem,
    spec: &GameSpec,
    grid: &Grid,
    side: PdeSide,
) -> Result<PdeSolution> {
    if grid.has_aug() {
        return Err(LabError::Config(
            "the FD cross-oracle runs on Markovian (non-augmented) grids".into(),
        ));
    }
    check_ellipticity(spec)?;
    let d = grid.spatial_dim;
    let dxs: Vec<f64> = (0..d).map(|k| grid.axes[k].dx).collect();
    let env = sample_envelope(spec);
    let (required, reason) = minimal_n_t(spec, &env, &dxs, SchemeBudget::UpwindFd)?;
    if grid.n_t < required {
        return Err(LabError::CflViolation {
            requested: grid.n_t,
            required,
            reason,
        });
    }

    let n_nodes = grid.n_nodes();
    let nu = spec.u_set.len();
    let nv = spec.v_set.len();
    let dt = grid.dt;

    // Terminal slice and seam check.
    let mut buf = vec![0.0f64; d];
    let mut terminal = vec![0.0f64; n_nodes];
    for node in grid.nodes() {
        grid.coords_into(node, &mut buf);
        terminal[node] = problem.terminal_at(&buf);
        if grid.is_spatial_boundary(node) {
            let seam = problem.lateral_at(grid.horizon, &buf);
            if (seam - terminal[node]).abs() > SEAM_TOL {
                return Err(LabError::BoundaryMismatch(format!(
                    "lateral data {seam} and terminal data {} differ at x = {:?}",
                    terminal[node], buf
                )));
            }
        }
    }

    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(grid.n_t + 1);
    let mut z_slices: Vec<Vec<f64>> = Vec::with_capacity(grid.n_t);
    slices.push(terminal.clone());
    let mut next = terminal;
    let mut isaacs_max_gap = 0.0f64;

    for step in 0..grid.n_t {
        let t_idx = grid.n_t - 1 - step;
        let t = grid.time(t_idx);
        let pair_coeffs: Vec<PairCoeffs> = (0..nu * nv)
            .map(|p| {
                let (ui, vi) = (p / nv, p % nv);
                let u = spec.u_set.point(ui);
                let v = spec.v_set.point(vi);
                let sigma = spec.coeffs.sigma(t, u, v);
                let a = sigma.square();
                let drift = spec.coeffs.drift(t, u, v);
                let plan = StencilPlan::build(&a, &drift, &dxs, DriftMode::CentralWithCapacity)
                    .map_err(|detail| LabError::NegativeStencil {
                        t_index: t_idx,
                        u_label: spec.u_set.label(ui).to_string(),
                        v_label: spec.v_set.label(vi).to_string(),
                        detail,
                    })?;
                Ok(PairCoeffs { plan, sigma, u_idx: ui, v_idx: vi })
            })
            .collect::<Result<_>>()?;

        let next_ref = &next;
        let gaps_and_values: Vec<(f64, [f64; 2], f64)> = (0..n_nodes)
            .into_par_iter()
            .map(|node| {
                let mut coords = vec![0.0f64; d];
                grid.coords_into(node, &mut coords);
                if grid.is_spatial_boundary(node) {
                    return (problem.lateral_at(t, &coords), [0.0, 0.0], 0.0);
                }
                let v0 = next_ref[node];
                // Neighbor values.
                let mut up = [0.0f64; 2];
                let mut dn = [0.0f64; 2];
                for k in 0..d {
                    up[k] = next_ref[node + grid.stride(k)];
                    dn[k] = next_ref[node - grid.stride(k)];
                }
                let (pp, mm, pm, mp) = if d == 2 {
                    (
                        next_ref[node + grid.stride(0) + grid.stride(1)],
                        next_ref[node - grid.stride(0) - grid.stride(1)],
                        next_ref[node + grid.stride(0) - grid.stride(1)],
                        next_ref[node - grid.stride(0) + grid.stride(1)],
                    )
                } else {
                    (0.0, 0.0, 0.0, 0.0)
                };
                // Central gradient (feeds the driver and the z table).
                let mut z_c = [0.0f64; 2];
                for k in 0..d {
                    z_c[k] = (up[k] - dn[k]) / (2.0 * dxs[k]);
                }

                let mut matrix = vec![0.0f64; nu * nv];
                for pc in &pair_coeffs {
                    let axes = &pc.plan.axes;
                    let mut g = 0.0f64;
                    for k in 0..d {
                        // Diffusion remainder after the correlation split.
                        g += 0.5 * axes[k].r * (up[k] - 2.0 * v0 + dn[k])
                            / (dxs[k] * dxs[k]);
                        // First-order term: central up to the diffusion
                        // capacity, upwinded excess (chosen per control).
                        g += axes[k].mu_central * (up[k] - dn[k]) / (2.0 * dxs[k]);
                        let mu_e = axes[k].mu_upwind;
                        g += if mu_e >= 0.0 {
                            mu_e * (up[k] - v0) / dxs[k]
                        } else {
                            mu_e * (v0 - dn[k]) / dxs[k]
                        };
                    }
                    if d == 2 {
                        let w = 0.5 / (dxs[0] * dxs[1]);
                        g += pc.plan.corner_pos * w * (pp + mm - 2.0 * v0);
                        g += pc.plan.corner_neg * w * (pm + mp - 2.0 * v0);
                    }
                    let z_sigma = pc.sigma.mul_vec2(z_c);
                    g += spec.coeffs.f(
                        t,
                        &coords,
                        v0,
                        &z_sigma[..d],
                        spec.u_set.point(pc.u_idx),
                        spec.v_set.point(pc.v_idx),
                    );
                    matrix[pc.u_idx * nv + pc.v_idx] = g;
                }
                let (g_chosen, gap) = match side {
                    PdeSide::Lower => (sup_inf(&matrix, nu, nv).0, 0.0),
                    PdeSide::Upper => (inf_sup(&matrix, nu, nv).0, 0.0),
                    PdeSide::Isaacs => {
                        let (lo, _, _) = sup_inf(&matrix, nu, nv);
                        let (hi, _, _) = inf_sup(&matrix, nu, nv);
                        (lo, (hi - lo).abs())
                    }
                };
                (v0 + dt * g_chosen, z_c, gap)
            })
            .collect();

        let mut slice = vec![0.0f64; n_nodes];
        let mut z_slice = vec![0.0f64; n_nodes * d];
        for (node, (value, z, gap)) in gaps_and_values.into_iter().enumerate() {
            slice[node] = value;
            z_slice[node * d..node * d + d].copy_from_slice(&z[..d]);
            isaacs_max_gap = isaacs_max_gap.max(gap);
        }
        next = slice.clone();
        slices.push(slice);
        z_slices.push(z_slice);
    }

    slices.reverse();
    z_slices.reverse();
    let problem_kind = match side {
        PdeSide::Lower | PdeSide::Isaacs => ProblemKind::Lower,
        PdeSide::Upper => ProblemKind::Upper,
    };
    Ok(PdeSolution {
        field: ValueField {
            problem: problem_kind,
            slices,
            z_slices,
            z_fallback_nodes: 0,
            sigma_degenerate: false,
        },
        isaacs_max_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub x: Vec<f64>,
    pub dpp_value: f64,
    pub pde_value: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckReport {
    pub scenario: String,
    pub isaacs_max_gap: f64,
    pub probes: Vec<ProbeRow>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct CrossCheckOptions {
    pub isaacs_samples: usize,
    pub isaacs_tolerance: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Probe coordinates at t = 0; defaults to the origin plus half-radius
    /// axis points.
    pub probes: Option<Vec<Vec<f64>>>,
}

impl Default for CrossCheckOptions {
    fn default() -> Self {
        CrossCheckOptions {
            isaacs_samples: 2000,
            isaacs_tolerance: ISAACS_DEFAULT_TOL,
            tolerance: 5e-3,
            seed: 0,
            probes: None,
        }
    }
}

fn nearest_node(grid: &Grid, x: &[f64]) -> usize {
    let mut multi = Vec::with_capacity(grid.n_axes());
    for (k, axis) in grid.axes.iter().enumerate() {
        multi.push(axis.nearest_index(if k < x.len() { x[k] } else { 0.0 }));
    }
    grid.flat(&multi)
}

/// Solves the same game with both discretizations and compares t = 0
/// values at probe points. Refuses to run when the Isaacs condition fails
/// (the lower and upper equations then differ and the comparison target is
/// ambiguous).
pub fn cross_check(
    spec: &GameSpec,
    grid_dpp: &Grid,
    grid_pde: &Grid,
    opts: &CrossCheckOptions,
) -> Result<CrossCheckReport> {
    let isaacs = isaacs_check(spec, opts.isaacs_samples, opts.isaacs_tolerance, opts.seed)?;
    if !isaacs.passed {
        return Err(LabError::IsaacsGap {
            gap: isaacs.max_gap,
            tolerance: opts.isaacs_tolerance,
        });
    }

    let kernel = crate::chain::build_kernel(spec, grid_dpp)?;
    let dpp_sol = crate::dpp::solve_game(spec, grid_dpp, &kernel, crate::dpp::Side::Lower);
    let problem = PdeProblem::from_spec(spec);
    let pde_sol = solve_pde(&problem, spec, grid_pde, PdeSide::Isaacs)?;

    let probes: Vec<Vec<f64>> = opts.probes.clone().unwrap_or_else(|| {
        let mut ps = vec![vec![0.0; spec.dim]];
        for k in 0..spec.dim {
            for sign in [-1.0, 1.0] {
                let mut p = vec![0.0; spec.dim];
                p[k] = sign * 0.5 * grid_dpp.axes[k].max;
                ps.push(p);
            }
        }
        ps
    });

    let mut rows = Vec::with_capacity(probes.len());
    let mut max_deviation = 0.0f64;
    for probe in probes {
        let a = dpp_sol.field.slices[0][nearest_node(grid_dpp, &probe)];
        let b = pde_sol.field.slices[0][nearest_node(grid_pde, &probe)];
        let deviation = (a - b).abs();
        max_deviation = max_deviation.max(deviation);
        rows.push(ProbeRow { x: probe, dpp_value: a, pde_value: b, deviation });
    }
    Ok(CrossCheckReport {
        scenario: spec.name.clone(),
        isaacs_max_gap: isaacs.max_gap,
        probes: rows,
        max_deviation,
        tolerance: opts.tolerance,
        passed: max_deviation <= opts.tolerance,
    })
}

/// Successive grid refinements of the same problem, reporting the origin
/// value per level (and errors when a reference value is known).
#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub resolution: Vec<usize>,
    pub n_t: usize,
    pub origin_value: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub scenario: String,
    pub levels: Vec<RefinementLevel>,
    /// error(level i) / error(level i+1) when a reference is known.
    pub contraction_factors: Vec<f64>,
}

/// Solves `problem` at `levels` successive dx-halvings of the base grid
/// request (same extents, n_t re-derived from the budget at each level).
pub fn refinement_study(
    spec: &GameSpec,
    problem: &PdeProblem,
    base: &crate::model::GridRequest,
    levels: usize,
    reference: Option<f64>,
) -> Result<RefinementReport> {
    use crate::model::grid::build_grid;
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let resolution: Vec<usize> = base
            .resolution
            .iter()
            .map(|&r| (r - 1) * (1 << level) + 1)
            .collect();
        let mut req = base.clone();
        req.resolution = resolution.clone();
        req.n_t = None;
        req.scheme = SchemeBudget::UpwindFd;
        let grid = build_grid(spec, &req)?;
        let sol = solve_pde(problem, spec, &grid, PdeSide::Isaacs)?;
        let origin_value = sol.field.at_origin(&grid);
        rows.push(RefinementLevel {
            resolution,
            n_t: grid.n_t,
            origin_value,
            error: reference.map(|r| (origin_value - r).abs()),
        });
    }
    let mut contraction_factors = Vec::new();
    if reference.is_some() {
        for w in rows.windows(2) {
            let e0 = w[0].error.unwrap();
            let e1 = w[1].error.unwrap();
            contraction_factors.push(if e1 > 0.0 { e0 / e1 } else { f64::INFINITY });
        }
    }
    Ok(RefinementReport {
        scenario: spec.name.clone(),
        levels: rows,
        contraction_factors,
    })
}

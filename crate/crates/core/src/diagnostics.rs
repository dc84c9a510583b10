//! Empirical check suites over solved fields: the a-priori value bound,
//! spatial/temporal regularity moduli with fitted constants, and the
//! fixed-policy energy estimates along the kernel.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::chain::{forward_distribution, TransitionKernel};
use crate::dpp::{evaluate_policies, ControlSide, Policy, ValueField};
use crate::error::{LabError, Result};
use crate::model::{GameSpec, Grid};

/// Result of the sup-norm bound check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound: f64,
    /// Terminal-data sup-norm actually present on the grid.
    pub terminal_sup: f64,
    pub worst_value: f64,
    pub worst_slice: usize,
    pub worst_node: usize,
    pub passed: bool,
}

/// Every node of every slice against the discrete Gronwall constant
/// C = exp(L0 T) (max(C0, ||xi||_grid) + C0 T).
///
/// The recursion gives |Y_i| <= (1 + dt L0)^(n_t - i) (||xi||_inf +
/// (T - t_i) sup|f(., 0, 0)|) by induction, so the terminal sup-norm on
/// the grid is the right first factor; it coincides with the declared C0
/// whenever the terminal bound holds on the whole truncated domain
/// (corners of a truncated unbounded payoff may exceed it).
pub fn check_bounds(field: &ValueField, spec: &GameSpec) -> BoundReport {
    let terminal_sup = field
        .slices
        .last()
        .map(|s| s.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .unwrap_or(0.0);
    let c0 = spec.coeffs.c0;
    let bound = (spec.coeffs.l0 * spec.horizon).exp()
        * (c0.max(terminal_sup) + c0 * spec.horizon);
    let mut worst = 0.0f64;
    let mut worst_slice = 0;
    let mut worst_node = 0;
    for (i, slice) in field.slices.iter().enumerate() {
        for (node, &v) in slice.iter().enumerate() {
            if v.abs() > worst {
                worst = v.abs();
                worst_slice = i;
                worst_node = node;
            }
        }
    }
    BoundReport {
        bound,
        terminal_sup,
        worst_value: worst,
        worst_slice,
        worst_node,
        passed: worst <= bound,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModulusSample {
    pub distance: f64,
    pub value_gap: f64,
}

/// Spatial and temporal regularity of a solved field: samples of
/// (distance, value gap) with the smallest constants making
/// gap <= C rho0(dist) (spatial) and gap <= C rho1(dt-dist) (temporal)
/// hold over all samples, where rho1(d) = rho0(d + d^{1/4}) + d + d^{1/4}.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub scenario: String,
    pub probes: usize,
    pub seed: u64,
    pub spatial_samples: Vec<ModulusSample>,
    pub temporal_samples: Vec<ModulusSample>,
    pub fitted_c_spatial: f64,
    pub fitted_c_temporal: f64,
}

pub fn rho1(rho0: &crate::model::Modulus, delta: f64) -> f64 {
    let quarter = delta.powf(0.25);
    rho0.eval(delta + quarter) + delta + quarter
}

/// Samples node pairs within slices (spatial modulus) and slice pairs at
/// fixed nodes (temporal modulus), fitting the smallest constants. The
/// sampling is prefix-stable: growing the probe count only adds samples,
/// so fitted constants never decrease.
pub fn modulus_report(
    field: &ValueField,
    spec: &GameSpec,
    grid: &Grid,
    probes: usize,
    seed: u64,
) -> Result<RegularityReport> {
    if probes == 0 {
        return Err(LabError::Config("probes must be >= 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let n_nodes = grid.n_nodes();
    let rho0 = &spec.coeffs.rho0;
    let mut spatial_samples = Vec::with_capacity(probes);
    let mut temporal_samples = Vec::with_capacity(probes);
    let mut c_spatial = 0.0f64;
    let mut c_temporal = 0.0f64;
    let mut xa = vec![0.0f64; grid.n_axes()];
    let mut xb = vec![0.0f64; grid.n_axes()];

    for _ in 0..probes {
        // Spatial pair within one slice.
        let slice = rng.random_range(0..=grid.n_t);
        let a = rng.random_range(0..n_nodes);
        let b = rng.random_range(0..n_nodes);
        grid.coords_into(a, &mut xa);
        grid.coords_into(b, &mut xb);
        let distance = xa
            .iter()
            .zip(&xb)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0_f64, f64::max);
        if distance > 0.0 {
            let value_gap = (field.slices[slice][a] - field.slices[slice][b]).abs();
            c_spatial = c_spatial.max(value_gap / rho0.eval(distance).max(1e-300));
            spatial_samples.push(ModulusSample { distance, value_gap });
        }

        // Temporal pair at a fixed node.
        let node = rng.random_range(0..n_nodes);
        let i = rng.random_range(0..=grid.n_t);
        let j = rng.random_range(0..=grid.n_t);
        if i != j {
            let delta = (grid.time(i) - grid.time(j)).abs();
            let value_gap = (field.slices[i][node] - field.slices[j][node]).abs();
            c_temporal = c_temporal.max(value_gap / rho1(rho0, delta).max(1e-300));
            temporal_samples.push(ModulusSample { distance: delta, value_gap });
        }
    }

    Ok(RegularityReport {
        scenario: spec.name.clone(),
        probes,
        seed,
        spatial_samples,
        temporal_samples,
        fitted_c_spatial: c_spatial,
        fitted_c_temporal: c_temporal,
    })
}

/// Fitted constants are stable across one refinement when neither moves
/// by more than a factor of two.
pub fn modulus_stable(coarse: &RegularityReport, fine: &RegularityReport) -> bool {
    fn within_factor_two(a: f64, b: f64) -> bool {
        if a <= 1e-12 && b <= 1e-12 {
            return true;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        hi <= 2.0 * lo.max(1e-12)
    }
    within_factor_two(coarse.fitted_c_spatial, fine.fitted_c_spatial)
        && within_factor_two(coarse.fitted_c_temporal, fine.fitted_c_temporal)
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriTrial {
    pub trial: usize,
    /// I0^2 = E[xi(X_T)^2 + sum dt f0^2] along the kernel.
    pub i0_sq: f64,
    /// max over slices of E_rho[Y^2].
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    /// Short-horizon window [i, j] and the first-moment bound pieces.
    pub window: (usize, usize),
    pub window_lhs: f64,
    pub window_rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    pub scenario: String,
    pub trials: Vec<AprioriTrial>,
    /// Squared constant used on the energy side.
    pub c_sq: f64,
    /// Covariance-transfer constant: max over stencils of tr(cov)/dt.
    pub kappa_sq: f64,
    pub passed: bool,
}

/// Energy constant for the explicit scheme.
///
/// One step gives Y^2 <= m^2 (1 + theta dt) + (dt/theta + dt^2) f^2 with
/// m the conditional mean (Young). Expanding f^2 <= 3 f0^2 + 3 L0^2 m^2 +
/// 3 L0^2 zhat^2, taking expectations under the forward law, and using
/// E[m^2] = E[Y'^2] - E[Var] together with dt E[|zhat|^2] <= kappa^2
/// E[Var] (Cauchy-Schwarz of the covariance z against the stencil
/// variance), the Var terms cancel once theta >= 6 L0^2 kappa^2, leaving
/// a per-step growth factor exp((theta + 3 L0^2 / theta + O(dt)) dt).
/// With theta = max(1, 6 L0^2 kappa^2) the growth exponent is at most
/// 2 + 3 L0^2 + 6 L0^2 kappa^2, and the driver side contributes at most
/// 3 I0^2; the leading 4 absorbs the O(dt) remainders.
pub fn energy_constant_sq(l0: f64, kappa_sq: f64, horizon: f64) -> f64 {
    4.0 * ((2.0 + 3.0 * l0 * l0 + 6.0 * l0 * l0 * kappa_sq) * horizon).exp()
}

fn kernel_kappa_sq(kernel: &TransitionKernel, grid: &Grid) -> f64 {
    let mut k = 0.0f64;
    for t_idx in 0..kernel.n_t {
        for ui in 0..kernel.nu() {
            for vi in 0..kernel.nv() {
                let st = kernel.stencil(t_idx, ui, vi);
                k = k.max(st.cov.trace() / grid.dt);
            }
        }
    }
    k
}

/// For random policy pairs: solves the fixed-policy field, propagates the
/// origin mass forward, and checks the discrete analogues of the energy
/// estimate (max_t E[Y^2] <= C^2 I0^2) and the short-horizon bound
/// (max over a window of E|Y| <= C (E[eta^2])^{1/2} + C delta^{1/2} I0).
pub fn bsde_apriori(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    trials: usize,
    seed: u64,
) -> Result<AprioriReport> {
    if trials == 0 {
        return Err(LabError::Config("trials must be >= 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let kappa_sq = kernel_kappa_sq(kernel, grid);
    let c_sq = energy_constant_sq(spec.coeffs.l0, kappa_sq, spec.horizon);
    let c = c_sq.sqrt();
    let d = grid.spatial_dim;
    let origin = grid.origin_node();
    let mut rows = Vec::with_capacity(trials);

    for trial in 0..trials {
        let u_pol = Policy::random(ControlSide::U, grid, spec.u_set.len(), &mut rng);
        let v_pol = Policy::random(ControlSide::V, grid, spec.v_set.len(), &mut rng);
        let field = evaluate_policies(spec, grid, kernel, &u_pol, &v_pol)?;
        let rho = forward_distribution(
            kernel,
            grid,
            |t, n| (u_pol.choices[t][n] as usize, v_pol.choices[t][n] as usize),
            origin,
        );

        // Driver-at-zero second moments per slice.
        let mut coords = vec![0.0f64; grid.n_axes()];
        let zeros = vec![0.0f64; d];
        let f0_sq: Vec<f64> = (0..grid.n_t)
            .map(|i| {
                let t = grid.time(i);
                let mut acc = 0.0;
                for node in grid.nodes() {
                    let mass = rho[i][node];
                    if mass == 0.0 {
                        continue;
                    }
                    grid.coords_into(node, &mut coords);
                    let f0 = spec.coeffs.f(
                        t,
                        &coords,
                        0.0,
                        &zeros,
                        spec.u_set.point(u_pol.choices[i][node] as usize),
                        spec.v_set.point(v_pol.choices[i][node] as usize),
                    );
                    acc += mass * f0 * f0;
                }
                acc
            })
            .collect();
        let xi_sq: f64 = grid
            .nodes()
            .filter(|&n| rho[grid.n_t][n] != 0.0)
            .map(|n| {
                grid.coords_into(n, &mut coords);
                let xi = spec.coeffs.xi(&coords);
                rho[grid.n_t][n] * xi * xi
            })
            .sum();
        let i0_sq = xi_sq + grid.dt * f0_sq.iter().sum::<f64>();

        let second_moment = |i: usize| -> f64 {
            grid.nodes()
                .map(|n| rho[i][n] * field.slices[i][n] * field.slices[i][n])
                .sum()
        };
        let energy_lhs = (0..=grid.n_t).map(second_moment).fold(0.0_f64, f64::max);
        let energy_rhs = c_sq * i0_sq;

        // Short-horizon window.
        let i = rng.random_range(0..grid.n_t);
        let j = rng.random_range((i + 1)..=grid.n_t);
        let delta = grid.time(j) - grid.time(i);
        let window_lhs = (i..=j)
            .map(|k| {
                grid.nodes()
                    .map(|n| rho[k][n] * field.slices[k][n].abs())
                    .sum::<f64>()
            })
            .fold(0.0_f64, f64::max);
        let eta_sq = second_moment(j);
        let window_i0_sq = eta_sq + grid.dt * f0_sq[i..j].iter().sum::<f64>();
        let window_rhs = c * eta_sq.sqrt() + c * delta.sqrt() * window_i0_sq.sqrt();

        let passed = energy_lhs <= energy_rhs && window_lhs <= window_rhs + 1e-12;
        rows.push(AprioriTrial {
            trial,
            i0_sq,
            energy_lhs,
            energy_rhs,
            window: (i, j),
            window_lhs,
            window_rhs,
            passed,
        });
    }

    let passed = rows.iter().all(|r| r.passed);
    Ok(AprioriReport {
        scenario: spec.name.clone(),
        trials: rows,
        c_sq,
        kappa_sq,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_kernel;
    use crate::dpp::{solve_game, Side};
    use crate::model::families;
    use crate::model::grid::{build_grid, GridRequest};

    fn heat_field() -> (GameSpec, Grid, TransitionKernel, ValueField) {
        let spec = families::heat(1, 1.0).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![101])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let field = solve_game(&spec, &grid, &kernel, Side::Lower).field;
        (spec, grid, kernel, field)
    }

    #[test]
    fn heat_bounds_pass() {
        let (spec, _, _, field) = heat_field();
        let report = check_bounds(&field, &spec);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn constant_field_worst_deviation_zero() {
        let spec = families::constant(1, 1.0, 1.0, vec![0.0], 0.0, 1.5).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![31])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let field = solve_game(&spec, &grid, &kernel, Side::Lower).field;
        let report = check_bounds(&field, &spec);
        assert!(report.passed);
        assert!((report.worst_value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn injected_fault_is_caught() {
        let (spec, _, _, mut field) = heat_field();
        let bound = spec.value_bound();
        field.slices[3][7] = 10.0 * bound;
        let report = check_bounds(&field, &spec);
        assert!(!report.passed);
        assert_eq!(report.worst_slice, 3);
        assert_eq!(report.worst_node, 7);
    }

    #[test]
    fn heat_temporal_modulus_is_linear() {
        // value(t, 0) = T - t: temporal gaps at the origin are exactly
        // dt * (slices apart), dominated by rho1.
        let (spec, grid, _, field) = heat_field();
        let origin = grid.origin_node();
        let k = grid.n_t / 3;
        let gap = (field.slices[0][origin] - field.slices[k][origin]).abs();
        assert!((gap - grid.time(k)).abs() < 5e-3, "gap {gap}");
        let report = modulus_report(&field, &spec, &grid, 2000, 9).unwrap();
        assert!(report.fitted_c_temporal <= 1.0 + 1e-6, "{}", report.fitted_c_temporal);
    }

    #[test]
    fn constant_field_fitted_c_zero() {
        let spec = families::constant(1, 1.0, 1.0, vec![0.0], 0.0, 2.0).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![31])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let field = solve_game(&spec, &grid, &kernel, Side::Lower).field;
        let report = modulus_report(&field, &spec, &grid, 500, 4).unwrap();
        assert!(report.fitted_c_spatial < 1e-12);
        assert!(report.fitted_c_temporal < 1e-12);
    }

    #[test]
    fn fitted_c_grows_with_probe_set() {
        let (spec, grid, _, field) = heat_field();
        let small = modulus_report(&field, &spec, &grid, 100, 21).unwrap();
        let large = modulus_report(&field, &spec, &grid, 1000, 21).unwrap();
        assert!(large.fitted_c_spatial >= small.fitted_c_spatial);
        assert!(large.fitted_c_temporal >= small.fitted_c_temporal);
    }

    #[test]
    fn example81_modulus_stable_across_refinement() {
        let spec = families::example81(0.3, 0.5, 1.0, 5, 5).unwrap();
        let mut reports = Vec::new();
        for res in [31usize, 61] {
            let grid = build_grid(&spec, &GridRequest::new(vec![res, res])).unwrap();
            let kernel = build_kernel(&spec, &grid).unwrap();
            let field = solve_game(&spec, &grid, &kernel, Side::Lower).field;
            reports.push((modulus_report(&field, &spec, &grid, 3000, 13).unwrap(), grid));
        }
        assert!(
            modulus_stable(&reports[0].0, &reports[1].0),
            "coarse ({}, {}) vs fine ({}, {})",
            reports[0].0.fitted_c_spatial,
            reports[0].0.fitted_c_temporal,
            reports[1].0.fitted_c_spatial,
            reports[1].0.fitted_c_temporal
        );
    }

    #[test]
    fn apriori_zero_data_is_zero() {
        let spec = families::constant(1, 1.0, 1.0, vec![0.0], 0.0, 0.0).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![21])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let report = bsde_apriori(&spec, &grid, &kernel, 3, 2).unwrap();
        assert!(report.passed);
        for t in &report.trials {
            assert_eq!(t.i0_sq, 0.0);
            assert_eq!(t.energy_lhs, 0.0);
        }
    }

    #[test]
    fn apriori_constant_driver_shape() {
        // f = 2, xi = 0: value 2 (T - t), I0^2 about 4 T; the bound holds
        // with slack and the window inequality matches the stated shape.
        let spec = families::constant(1, 1.0, 1.0, vec![0.0], 2.0, 0.0).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![61])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let report = bsde_apriori(&spec, &grid, &kernel, 3, 8).unwrap();
        assert!(report.passed, "{report:?}");
        for t in &report.trials {
            assert!((t.i0_sq - 4.0).abs() < 0.1, "I0^2 {}", t.i0_sq);
            assert!(t.energy_lhs <= 4.0 + 1e-9);
        }
    }

    #[test]
    fn apriori_example81_random_policies() {
        let spec = families::example81(0.3, 0.5, 1.0, 5, 5).unwrap();
        let grid = build_grid(&spec, &GridRequest::new(vec![31, 31])).unwrap();
        let kernel = build_kernel(&spec, &grid).unwrap();
        let report = bsde_apriori(&spec, &grid, &kernel, 10, 17).unwrap();
        assert!(report.passed, "c^2 {} kappa^2 {}", report.c_sq, report.kappa_sq);
    }

    #[test]
    fn reports_are_deterministic() {
        let (spec, grid, kernel, field) = heat_field();
        let a = modulus_report(&field, &spec, &grid, 200, 5).unwrap();
        let b = modulus_report(&field, &spec, &grid, 200, 5).unwrap();
        assert_eq!(a.fitted_c_spatial.to_bits(), b.fitted_c_spatial.to_bits());
        let ra = bsde_apriori(&spec, &grid, &kernel, 2, 5).unwrap();
        let rb = bsde_apriori(&spec, &grid, &kernel, 2, 5).unwrap();
        assert_eq!(
            ra.trials[0].energy_lhs.to_bits(),
            rb.trials[0].energy_lhs.to_bits()
        );
    }
}

//! Extraction and verification of approximate saddle points.
//!
//! The argmax policy of the lower recursion and the argmin policy of the
//! upper recursion form the candidate pair; the achievable epsilon is the
//! measured spread between the two fields plus one-step arithmetic slack.
//! Verification replays the pair against random node-wise deviations and
//! against the exact lattice best response (the strongest feedback
//! adversary available from the solved fields): neither side may gain
//! more than epsilon by deviating unilaterally.

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::chain::TransitionKernel;
use crate::dpp::{
    best_response, evaluate_policies, gap_stats, ControlSide, GameSolution, Policy,
};
use crate::error::Result;
use crate::model::{GameSpec, Grid};
use crate::tolerances::ONE_STEP_TOL;

/// One deviation trial: the payoff of (u', v*) or (u*, v') at the origin,
/// its excess over the center inequality, and the violation beyond
/// epsilon (zero when the inequality holds).
#[derive(Debug, Clone, Serialize)]
pub struct DeviationTrial {
    pub id: String,
    pub side: char,
    pub payoff: f64,
    pub excess: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleCertificate {
    pub scenario: String,
    pub epsilon: f64,
    pub value_at_origin: f64,
    pub deviations: usize,
    pub seed: u64,
    pub trials: Vec<DeviationTrial>,
    pub max_violation: f64,
    pub passed: bool,
}

/// Candidate pair and the achievable epsilon from solved lower and upper
/// games on the same grid: u* from the lower argmax, v* from the upper
/// argmin, epsilon = max-node |upper - lower| + one-step slack.
pub fn extract(
    grid: &Grid,
    lower: &GameSolution,
    upper: &GameSolution,
) -> (Policy, Policy, f64) {
    let stats = gap_stats(&lower.field, &upper.field, grid);
    (
        lower.u_policy.clone(),
        upper.v_policy.clone(),
        stats.max_abs_gap + ONE_STEP_TOL,
    )
}

/// Checks both saddle inequalities at the origin against `deviations`
/// random feedback policies per side plus the greedy (exact) best
/// responses. Deterministic for a fixed seed.
pub fn verify(
    spec: &GameSpec,
    grid: &Grid,
    kernel: &TransitionKernel,
    u_star: &Policy,
    v_star: &Policy,
    epsilon: f64,
    deviations: usize,
    seed: u64,
) -> Result<SaddleCertificate> {
    let origin = grid.origin_node();
    let center_field = evaluate_policies(spec, grid, kernel, u_star, v_star)?;
    let center = center_field.slices[0][origin];

    let mut trials = Vec::with_capacity(2 * deviations + 3);
    trials.push(DeviationTrial {
        id: "center-replay".into(),
        side: '-',
        payoff: center,
        excess: 0.0,
        violation: 0.0,
    });

    let mut push_trial = |id: String, side: char, payoff: f64| {
        let excess = match side {
            'u' => payoff - center,
            _ => center - payoff,
        };
        trials.push(DeviationTrial {
            id,
            side,
            payoff,
            excess,
            violation: (excess - epsilon).max(0.0),
        });
    };

    let br_u = best_response(spec, grid, kernel, v_star, ControlSide::U)?;
    push_trial(
        "greedy-best-response".into(),
        'u',
        br_u.field.slices[0][origin],
    );
    let br_v = best_response(spec, grid, kernel, u_star, ControlSide::V)?;
    push_trial(
        "greedy-best-response".into(),
        'v',
        br_v.field.slices[0][origin],
    );

    let mut rng = StdRng::seed_from_u64(seed);
    for k in 0..deviations {
        let u_dev = Policy::random(ControlSide::U, grid, spec.u_set.len(), &mut rng);
        let payoff = evaluate_policies(spec, grid, kernel, &u_dev, v_star)?.slices[0][origin];
        push_trial(format!("random-{k}"), 'u', payoff);

        let v_dev = Policy::random(ControlSide::V, grid, spec.v_set.len(), &mut rng);
        let payoff = evaluate_policies(spec, grid, kernel, u_star, &v_dev)?.slices[0][origin];
        push_trial(format!("random-{k}"), 'v', payoff);
    }

    let max_violation = trials.iter().map(|t| t.violation).fold(0.0_f64, f64::max);
    Ok(SaddleCertificate {
        scenario: spec.name.clone(),
        epsilon,
        value_at_origin: center,
        deviations,
        seed,
        trials,
        max_violation,
        passed: max_violation == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_kernel;
    use crate::dpp::{solve_game, Side};
    use crate::model::families;
    use crate::model::grid::{build_grid, GridRequest};

    fn solve_both(
        spec: &GameSpec,
        res: Vec<usize>,
    ) -> (Grid, TransitionKernel, GameSolution, GameSolution) {
        let grid = build_grid(spec, &GridRequest::new(res)).unwrap();
        let kernel = build_kernel(spec, &grid).unwrap();
        let lower = solve_game(spec, &grid, &kernel, Side::Lower);
        let upper = solve_game(spec, &grid, &kernel, Side::Upper);
        (grid, kernel, lower, upper)
    }

    #[test]
    fn singleton_v_reduces_to_optimal_control() {
        let spec = families::drift_control(1.0).unwrap();
        let (grid, kernel, lower, upper) = solve_both(&spec, vec![101]);
        let (u_star, v_star, eps) = extract(&grid, &lower, &upper);
        // Degenerate game: both sides are the same optimization.
        assert!(eps <= 2.0 * ONE_STEP_TOL, "eps {eps}");
        let cert = verify(&spec, &grid, &kernel, &u_star, &v_star, eps, 10, 7).unwrap();
        assert!(cert.passed, "max violation {}", cert.max_violation);
        // The extracted policy is Bellman-optimal: the greedy best
        // response cannot beat it beyond arithmetic slack.
        let greedy = &cert.trials[1];
        assert!(greedy.excess <= ONE_STEP_TOL);
    }

    #[test]
    fn constant_game_any_policy_qualifies() {
        let spec = families::constant(1, 1.0, 1.0, vec![0.0], 0.0, 2.5).unwrap();
        let (grid, kernel, lower, upper) = solve_both(&spec, vec![31]);
        let (u_star, v_star, eps) = extract(&grid, &lower, &upper);
        assert!(eps <= 2.0 * ONE_STEP_TOL);
        assert!(u_star.choices.iter().all(|s| s.iter().all(|&c| c == 0)));
        let cert = verify(&spec, &grid, &kernel, &u_star, &v_star, eps, 5, 3).unwrap();
        assert!(cert.passed);
        assert!((cert.value_at_origin - 2.5).abs() < 1e-10);
    }

    #[test]
    fn example81_certificate_passes() {
        let spec = families::example81(0.3, 0.5, 1.0, 5, 5).unwrap();
        let (grid, kernel, lower, upper) = solve_both(&spec, vec![41, 41]);
        let (u_star, v_star, eps) = extract(&grid, &lower, &upper);
        let cert = verify(&spec, &grid, &kernel, &u_star, &v_star, eps, 20, 11).unwrap();
        assert!(cert.passed, "epsilon {} violation {}", eps, cert.max_violation);
        // Replay exactness: the center sits within the scheme epsilon of
        // both game values at the origin on the Isaacs-holding game.
        let lower0 = lower.field.slices[0][grid.origin_node()];
        let upper0 = upper.field.slices[0][grid.origin_node()];
        assert!((cert.value_at_origin - lower0).abs() <= eps);
        assert!((cert.value_at_origin - upper0).abs() <= eps);
    }

    #[test]
    fn certificate_is_deterministic() {
        let spec = families::matching_pennies(1.0).unwrap();
        let (grid, kernel, lower, upper) = solve_both(&spec, vec![21]);
        let (u_star, v_star, eps) = extract(&grid, &lower, &upper);
        let a = verify(&spec, &grid, &kernel, &u_star, &v_star, eps, 8, 5).unwrap();
        let b = verify(&spec, &grid, &kernel, &u_star, &v_star, eps, 8, 5).unwrap();
        assert_eq!(a.max_violation.to_bits(), b.max_violation.to_bits());
        assert_eq!(a.trials.len(), b.trials.len());
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.payoff.to_bits(), y.payoff.to_bits());
        }
    }

    #[test]
    fn epsilon_shrinks_under_refinement() {
        let spec = families::example81(0.3, 0.5, 1.0, 5, 5).unwrap();
        let (grid_a, _, lower_a, upper_a) = solve_both(&spec, vec![31, 31]);
        let (_, _, eps_a) = extract(&grid_a, &lower_a, &upper_a);
        let (grid_b, _, lower_b, upper_b) = solve_both(&spec, vec![61, 61]);
        let (_, _, eps_b) = extract(&grid_b, &lower_b, &upper_b);
        assert!(eps_b < eps_a, "eps {eps_a} -> {eps_b}");
    }
}

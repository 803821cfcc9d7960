//! Randomized invariants of the mirror-descent machinery. Each property is a
//! statement that must hold for every input, not a statistical tendency, so
//! tolerances only absorb floating-point error.

use bcomd_core::bcomd::{compute_parameters, BcomdState, ScheduleMode};
use bcomd_core::simplex::{
    kl_divergence, multiplicative_step, project_kl, project_kl_bisection,
};
use proptest::prelude::*;

fn positive_weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..5.0, n..=n)
}

fn dims() -> impl Strategy<Value = usize> {
    2usize..8
}

/// Feasible floor paired with weights of matching dimension.
fn weights_and_gamma() -> impl Strategy<Value = (Vec<f64>, f64)> {
    dims().prop_flat_map(|n| {
        (positive_weights(n), 0.0f64..1.0)
            .prop_map(move |(y, u)| (y, u * 0.999 / n as f64))
    })
}

/// A point of the floored simplex with the same dimension and floor.
fn floored_point(n: usize, gamma: f64, raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|v| gamma + (1.0 - gamma * n as f64) * v / total)
        .collect()
}

proptest! {
    // Projection output is a distribution respecting the floor.
    #[test]
    fn projection_is_feasible((y, gamma) in weights_and_gamma()) {
        let x = project_kl(&y, gamma).unwrap();
        let sum: f64 = x.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        for &v in &x {
            prop_assert!(v >= gamma - 1e-12);
        }
    }

    // Projecting a projection changes nothing.
    #[test]
    fn projection_is_idempotent((y, gamma) in weights_and_gamma()) {
        let once = project_kl(&y, gamma).unwrap();
        let twice = project_kl(&once, gamma).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    // The closed-form solver and the bisection fallback agree.
    #[test]
    fn projection_matches_bisection((y, gamma) in weights_and_gamma()) {
        let fast = project_kl(&y, gamma).unwrap();
        let slow = project_kl_bisection(&y, gamma);
        for (a, b) in fast.iter().zip(slow.iter()) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    // No feasible point is closer to the pre-projection weights.
    #[test]
    fn projection_minimizes_divergence(
        (y, gamma) in weights_and_gamma(),
        raw in positive_weights(8),
    ) {
        let x = project_kl(&y, gamma).unwrap();
        let candidate = floored_point(y.len(), gamma, &raw[..y.len()]);
        let ours = kl_divergence(&x, &y).unwrap();
        let theirs = kl_divergence(&candidate, &y).unwrap();
        prop_assert!(ours <= theirs + 1e-9, "{ours} vs {theirs}");
    }

    // Generalized Pythagorean inequality: for any feasible u, stepping
    // through the projection never takes a detour.
    #[test]
    fn projection_satisfies_pythagorean_inequality(
        (y, gamma) in weights_and_gamma(),
        raw in positive_weights(8),
    ) {
        let x = project_kl(&y, gamma).unwrap();
        let u = floored_point(y.len(), gamma, &raw[..y.len()]);
        let direct = kl_divergence(&u, &y).unwrap();
        let through = kl_divergence(&u, &x).unwrap() + kl_divergence(&x, &y).unwrap();
        prop_assert!(direct >= through - 1e-9, "{direct} vs {through}");
    }

    // Divergence between floored distributions is at most ln(1/gamma).
    #[test]
    fn floored_simplex_diameter(
        n in dims(),
        raw_a in positive_weights(8),
        raw_b in positive_weights(8),
        u in 0.01f64..1.0,
    ) {
        let gamma = u * 0.999 / n as f64;
        let a = floored_point(n, gamma, &raw_a[..n]);
        let b = floored_point(n, gamma, &raw_b[..n]);
        let d = kl_divergence(&a, &b).unwrap();
        prop_assert!(d <= (1.0 / gamma).ln() + 1e-9);
    }

    // Second-order bound on the multiplicative step with nonnegative costs:
    // the divergence to the stepped point is at most (eta^2/2) sum x b^2.
    #[test]
    fn multiplicative_step_is_second_order(
        n in dims(),
        raw in positive_weights(8),
        costs in prop::collection::vec(0.0f64..50.0, 8),
        eta in 0.001f64..0.5,
    ) {
        let x = floored_point(n, 1e-4, &raw[..n]);
        let b = &costs[..n];
        let stepped = multiplicative_step(&x, b, eta).unwrap();
        let d = kl_divergence(&x, &stepped.weights).unwrap();
        let quad: f64 = x.iter().zip(b.iter()).map(|(xa, ba)| xa * ba * ba).sum();
        prop_assert!(d <= eta * eta / 2.0 * quad + 1e-9, "{d}");
    }
}

fn manual_state(
    n: usize,
    eta: f64,
    mu: f64,
    gamma: f64,
    seed: u64,
) -> BcomdState {
    let params = compute_parameters(
        n,
        1_000,
        0.25,
        ScheduleMode::Manual {
            eta,
            mu,
            gamma,
            omega: 0.0,
        },
    )
    .unwrap();
    BcomdState::new(params, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Along any feedback path: the dual stays nonnegative, the distribution
    // stays a floored simplex point, and the cumulative observed constraint
    // is bounded by the final dual over its step size (the update only ever
    // clips upward, so lambda accumulates at least mu times the sum).
    #[test]
    fn policy_path_invariants(
        seed in 0u64..1000,
        eta in 0.001f64..0.3,
        mu_scale in 0.1f64..1.0,
        feedback in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 1..60),
    ) {
        let n = 4;
        let gamma = 0.01;
        let mu = eta * mu_scale;
        let mut state = manual_state(n, eta, mu, gamma, seed);
        let mut cumulative = 0.0;
        for (loss, constraint) in feedback {
            let outcome = state.step(|_| (loss, constraint)).unwrap();
            cumulative += outcome.constraint;
            prop_assert!(outcome.lambda >= 0.0);
            let sum: f64 = state.x.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for &p in &state.x {
                prop_assert!(p >= gamma - 1e-12);
            }
        }
        prop_assert!(cumulative <= state.lambda / mu + 1e-9);
    }

    // The dual-frozen baseline never grows a multiplier.
    #[test]
    fn frozen_dual_stays_zero(
        seed in 0u64..1000,
        feedback in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 1..40),
    ) {
        let mut state = manual_state(3, 0.1, 0.05, 0.01, seed).exp3_mode();
        for (loss, constraint) in feedback {
            let outcome = state.step(|_| (loss, constraint)).unwrap();
            prop_assert_eq!(outcome.lambda, 0.0);
        }
    }

    // Two states with the same seed replay the same actions.
    #[test]
    fn identical_seeds_identical_paths(seed in 0u64..10_000) {
        let mut a = manual_state(5, 0.05, 0.02, 0.005, seed);
        let mut b = manual_state(5, 0.05, 0.02, 0.005, seed);
        for t in 0..30 {
            let loss = (t as f64 * 0.137) % 1.0;
            let oa = a.step(|arm| (loss, if arm == 0 { 0.5 } else { -0.5 })).unwrap();
            let ob = b.step(|arm| (loss, if arm == 0 { 0.5 } else { -0.5 })).unwrap();
            prop_assert_eq!(oa.action, ob.action);
            prop_assert_eq!(oa.lambda, ob.lambda);
        }
    }
}

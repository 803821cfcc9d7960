//! Shared input builders for the benchmark suite. Sizes mirror the
//! experiments the hot paths actually serve: 25 arms, horizons in the
//! thousands, floors small enough that projections leave the fast path.

use bcomd_core::bcomd::{compute_parameters, BcomdParams, ScheduleMode};
use bcomd_core::environment::{generate_shifting_trace, Trace, TraceGenConfig};
use bcomd_core::meta::MetaConfig;

/// Geometrically decaying weights; with `ratio` well below one, the tail
/// lands under any practical floor, forcing the sort-scan projection.
pub fn skewed_weights(n: usize, ratio: f64) -> Vec<f64> {
    let mut weights = Vec::with_capacity(n);
    let mut w = 1.0;
    for _ in 0..n {
        weights.push(w);
        w *= ratio;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Mildly perturbed uniform weights that renormalize straight onto the
/// floored simplex, staying on the projection fast path.
pub fn near_uniform_weights(n: usize) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.01 * ((i % 7) as f64 - 3.0))
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// A feasible noisy trace at experiment scale.
pub fn bench_trace(n: usize, horizon: usize, seed: u64) -> Trace {
    let cfg = TraceGenConfig {
        n,
        horizon,
        window: (horizon / 4).max(1),
        shift: (n / 5).max(1),
        noise_std: 0.05,
        ..TraceGenConfig::default()
    };
    generate_shifting_trace(&cfg, seed).expect("bench trace")
}

/// Manual step sizes from the practical range.
pub fn manual_params(n: usize, horizon: usize) -> BcomdParams {
    compute_parameters(
        n,
        horizon,
        0.25,
        ScheduleMode::Manual {
            eta: 0.01,
            mu: 0.005,
            gamma: 1e-4,
            omega: 0.0,
        },
    )
    .expect("manual params")
}

/// Phased-policy config with the grid tuning used in the experiments.
pub fn meta_config(n: usize, horizon: usize) -> MetaConfig {
    MetaConfig {
        n,
        horizon,
        rho: 0.25,
        m_override: Some(4.0),
        cap_grid: true,
        stabilize: false,
    }
}

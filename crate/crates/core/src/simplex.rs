//! Negative-entropy geometry on the probability simplex.
//!
//! Three primitives, all pure functions:
//!
//! - [`kl_divergence`]: the Bregman divergence of negative entropy in its
//!   general form `sum x ln(x/y) - sum x + sum y`, valid for unnormalized
//!   second arguments and reducing to ordinary KL for two distributions.
//! - [`multiplicative_step`]: the unprojected mirror step
//!   `y_a = x_a exp(-eta b_a)`.
//! - [`project_kl`]: the exact Bregman projection onto the truncated simplex
//!   `{ x : sum x = 1, x_a >= gamma }`.
//!
//! DESIGN NOTES
//!
//! The projection is solved in closed form. Normalizing the input solves the
//! unconstrained problem, so when no coordinate of `y / sum(y)` falls below
//! `gamma` that is the answer. Otherwise the KKT conditions force the shape
//! `x_a = max(gamma, c * y_a)` for a single scalar `c`; sorting the weights
//! ascending and scanning the clamp boundary finds `c` in O(n log n). A
//! monotone bisection on `c` backs up the scan for borderline inputs, and the
//! two solvers are required (by test) to agree to [`tol::SOLVER_AGREE`].
//!
//! Exponents in the multiplicative step are clamped at [`tol::EXP_CLAMP`] to
//! keep `exp` finite; callers receive the clamp count and are expected to
//! surface it, never to ignore it.

use crate::tol;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimplexError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entry {value} at index {index}: expected {needed}")]
    BadEntry {
        index: usize,
        value: f64,
        needed: &'static str,
    },
    #[error("truncation infeasible: gamma {gamma} with n {n} leaves no distribution")]
    InfeasibleTruncation { gamma: f64, n: usize },
    #[error("empty vector")]
    Empty,
}

fn check_finite(v: &[f64]) -> Result<(), SimplexError> {
    if v.is_empty() {
        return Err(SimplexError::Empty);
    }
    for (i, &e) in v.iter().enumerate() {
        if !e.is_finite() {
            return Err(SimplexError::BadEntry {
                index: i,
                value: e,
                needed: "a finite value",
            });
        }
    }
    Ok(())
}

fn check_strictly_positive(v: &[f64]) -> Result<(), SimplexError> {
    check_finite(v)?;
    for (i, &e) in v.iter().enumerate() {
        if e <= 0.0 {
            return Err(SimplexError::BadEntry {
                index: i,
                value: e,
                needed: "a strictly positive value",
            });
        }
    }
    Ok(())
}

/// Bregman divergence of negative entropy: `sum x ln(x/y) - sum x + sum y`,
/// with the convention `0 ln 0 = 0`. `x` may have zero entries; `y` must be
/// strictly positive. Nonnegative whenever both arguments are distributions.
pub fn kl_divergence(x: &[f64], y: &[f64]) -> Result<f64, SimplexError> {
    if x.len() != y.len() {
        return Err(SimplexError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x)?;
    for (i, &e) in x.iter().enumerate() {
        if e < 0.0 {
            return Err(SimplexError::BadEntry {
                index: i,
                value: e,
                needed: "a nonnegative value",
            });
        }
    }
    check_strictly_positive(y)?;
    let mut div = 0.0;
    for (&xa, &ya) in x.iter().zip(y.iter()) {
        if xa > 0.0 {
            div += xa * (xa / ya).ln();
        }
        div -= xa;
        div += ya;
    }
    Ok(div)
}

/// Result of a multiplicative step. `clamped` counts coordinates whose
/// exponent hit the clamp; it is folded into policy counters downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeStep {
    pub weights: Vec<f64>,
    pub clamped: usize,
}

/// Unprojected mirror step under negative entropy: `w_a = x_a exp(-eta b_a)`.
/// Exponents are clamped to `[-EXP_CLAMP, EXP_CLAMP]` and the count reported.
pub fn multiplicative_step(
    x: &[f64],
    b: &[f64],
    eta: f64,
) -> Result<MultiplicativeStep, SimplexError> {
    if x.len() != b.len() {
        return Err(SimplexError::DimensionMismatch {
            left: x.len(),
            right: b.len(),
        });
    }
    check_strictly_positive(x)?;
    check_finite(b)?;
    if !eta.is_finite() || eta <= 0.0 {
        return Err(SimplexError::BadEntry {
            index: 0,
            value: eta,
            needed: "a positive step size",
        });
    }
    let mut weights = Vec::with_capacity(x.len());
    let mut clamped = 0;
    for (&xa, &ba) in x.iter().zip(b.iter()) {
        let mut e = -eta * ba;
        if e.abs() > tol::EXP_CLAMP {
            e = e.clamp(-tol::EXP_CLAMP, tol::EXP_CLAMP);
            clamped += 1;
        }
        weights.push(xa * e.exp());
    }
    Ok(MultiplicativeStep { weights, clamped })
}

/// Exact KL (Bregman) projection of a positive weight vector onto the
/// truncated simplex `{ x : sum x = 1, x_a >= gamma }`.
pub fn project_kl(y: &[f64], gamma: f64) -> Result<Vec<f64>, SimplexError> {
    check_strictly_positive(y)?;
    let n = y.len();
    if !(0.0..=1.0).contains(&gamma) || gamma * n as f64 > 1.0 + tol::DIST_SUM {
        return Err(SimplexError::InfeasibleTruncation { gamma, n });
    }

    // Fast path: plain normalization already satisfies the floor.
    let total: f64 = y.iter().sum();
    let normalized: Vec<f64> = y.iter().map(|&v| v / total).collect();
    if normalized.iter().all(|&v| v >= gamma) {
        return Ok(normalized);
    }

    // KKT form x_a = max(gamma, c y_a). With weights sorted ascending, the k
    // smallest are clamped and c = (1 - k gamma) / (sum of the rest); the
    // split k is correct when the largest clamped weight scales below gamma
    // and the smallest free weight scales above it.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| y[i].total_cmp(&y[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    // suffix[k] = sum of sorted[k..].
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + sorted[k];
    }
    for k in 1..n {
        let c = (1.0 - gamma * k as f64) / suffix[k];
        if c * sorted[k - 1] <= gamma && c * sorted[k] >= gamma {
            let mut x = vec![0.0; n];
            for (rank, &i) in order.iter().enumerate() {
                x[i] = if rank < k { gamma } else { c * y[i] };
            }
            return Ok(x);
        }
    }
    // Everything clamped: only consistent when the floor uses all the mass.
    if (gamma * n as f64 - 1.0).abs() <= tol::DIST_SUM {
        return Ok(vec![gamma; n]);
    }
    Ok(project_kl_bisection(y, gamma))
}

/// Bisection fallback (and reference solver for tests): the unique root of
/// the monotone map `c -> sum_a max(gamma, c y_a) - 1`.
#[doc(hidden)]
pub fn project_kl_bisection(y: &[f64], gamma: f64) -> Vec<f64> {
    let max_y = y.iter().cloned().fold(f64::MIN, f64::max);
    let (mut lo, mut hi) = (0.0_f64, 1.0 / max_y);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = y.iter().map(|&v| (mid * v).max(gamma)).sum();
        if s < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    y.iter().map(|&v| (c * v).max(gamma)).collect()
}

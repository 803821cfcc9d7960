//! Dynamic benchmark: per-round constrained optima and trace regularity.
//!
//! Each round's benchmark is the cheapest distribution over arms whose
//! expected constraint is nonpositive. With one linear constraint over the
//! simplex, an optimal point is either a feasible vertex or a mixture of
//! exactly two arms sitting on the constraint boundary, so enumerating those
//! candidates solves the problem exactly.

use crate::bcomd::RoundOutcome;
use crate::environment::Trace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("dimension mismatch: {left} losses vs {right} constraints")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty problem")]
    Empty,
    #[error("non-finite entry at index {index}")]
    BadEntry { index: usize },
    #[error("no feasible distribution in slot {slot}: every arm violates")]
    NoFeasiblePoint { slot: usize },
    #[error("record/trace mismatch at round {t}: {detail}")]
    RecordMismatch { t: usize, detail: String },
}

/// Minimizer of one slot's constrained problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

fn check_slot(losses: &[f64], constraints: &[f64]) -> Result<(), OracleError> {
    if losses.len() != constraints.len() {
        return Err(OracleError::DimensionMismatch {
            left: losses.len(),
            right: constraints.len(),
        });
    }
    if losses.is_empty() {
        return Err(OracleError::Empty);
    }
    for (i, v) in losses.iter().chain(constraints.iter()).enumerate() {
        if !v.is_finite() {
            return Err(OracleError::BadEntry {
                index: i % losses.len(),
            });
        }
    }
    Ok(())
}

fn slot_optimum(losses: &[f64], constraints: &[f64], slot: usize) -> Result<SlotOptimum, OracleError> {
    check_slot(losses, constraints)?;
    let n = losses.len();

    // Feasible vertices first; ties keep the lowest arm index.
    let mut best: Option<SlotOptimum> = None;
    let mut consider = |x: Vec<f64>, value: f64| {
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(SlotOptimum { x, value });
        }
    };
    for a in 0..n {
        if constraints[a] <= 0.0 {
            let mut x = vec![0.0; n];
            x[a] = 1.0;
            consider(x, losses[a]);
        }
    }
    // Boundary mixtures: one violating arm, one strictly feasible arm,
    // weighted so the expected constraint is exactly zero.
    for a in 0..n {
        if constraints[a] <= 0.0 {
            continue;
        }
        for b in 0..n {
            if constraints[b] >= 0.0 {
                continue;
            }
            let p = -constraints[b] / (constraints[a] - constraints[b]);
            let value = p * losses[a] + (1.0 - p) * losses[b];
            let mut x = vec![0.0; n];
            x[a] = p;
            x[b] = 1.0 - p;
            consider(x, value);
        }
    }
    best.ok_or(OracleError::NoFeasiblePoint { slot })
}

/// Solve one slot: minimize expected loss subject to nonpositive expected
/// constraint over the simplex.
pub fn per_slot_optimum(losses: &[f64], constraints: &[f64]) -> Result<SlotOptimum, OracleError> {
    slot_optimum(losses, constraints, 0)
}

/// Per-round optima for a whole trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorSequence {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

pub fn comparator_sequence(trace: &Trace) -> Result<ComparatorSequence, OracleError> {
    let mut points = Vec::with_capacity(trace.horizon);
    let mut values = Vec::with_capacity(trace.horizon);
    for t in 0..trace.horizon {
        let opt = slot_optimum(&trace.losses[t], &trace.constraints[t], t)?;
        points.push(opt.x);
        values.push(opt.value);
    }
    Ok(ComparatorSequence { points, values })
}

/// How much the benchmark and the losses move over the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityMeasures {
    /// Sum of l1 distances between consecutive comparator points.
    pub path_length: f64,
    /// Sum of sup-norm distances between consecutive loss rows.
    pub temporal_variation: f64,
}

pub fn regularity_measures(trace: &Trace, comparators: &ComparatorSequence) -> RegularityMeasures {
    let path_length = comparators
        .points
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(w[1].iter())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
        })
        .sum();
    let temporal_variation = trace
        .losses
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(w[1].iter())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        })
        .sum();
    RegularityMeasures {
        path_length,
        temporal_variation,
    }
}

/// Prefix statistics of one run against the per-round benchmark. All vectors
/// have one entry per played round; entry `t` covers rounds `0..=t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub cum_loss: Vec<f64>,
    pub cum_violation: Vec<f64>,
    pub comparator_value: Vec<f64>,
    pub regret_prefix: Vec<f64>,
}

/// Score a played run. Records must agree with the trace they were produced
/// from: the stored loss and constraint of the chosen arm are cross-checked
/// against the matrices, so evaluating against the wrong trace fails loudly
/// instead of producing plausible numbers.
pub fn evaluate_run(
    trace: &Trace,
    comparators: &ComparatorSequence,
    rounds: &[RoundOutcome],
) -> Result<RunEvaluation, OracleError> {
    if rounds.len() > trace.horizon || comparators.values.len() < rounds.len() {
        return Err(OracleError::RecordMismatch {
            t: rounds.len(),
            detail: format!(
                "{} records, trace horizon {}, {} comparator slots",
                rounds.len(),
                trace.horizon,
                comparators.values.len()
            ),
        });
    }
    let mut cum_loss = Vec::with_capacity(rounds.len());
    let mut cum_violation = Vec::with_capacity(rounds.len());
    let mut comparator_value = Vec::with_capacity(rounds.len());
    let mut regret_prefix = Vec::with_capacity(rounds.len());
    let (mut loss_acc, mut viol_acc, mut comp_acc) = (0.0, 0.0, 0.0);
    for (t, round) in rounds.iter().enumerate() {
        if round.action >= trace.n {
            return Err(OracleError::RecordMismatch {
                t,
                detail: format!("action {} out of 0..{}", round.action, trace.n),
            });
        }
        let (expect_f, expect_g) = (
            trace.losses[t][round.action],
            trace.constraints[t][round.action],
        );
        if round.loss != expect_f || round.constraint != expect_g {
            return Err(OracleError::RecordMismatch {
                t,
                detail: format!(
                    "recorded ({}, {}) but trace holds ({expect_f}, {expect_g})",
                    round.loss, round.constraint
                ),
            });
        }
        loss_acc += round.loss;
        viol_acc += round.constraint;
        comp_acc += comparators.values[t];
        cum_loss.push(loss_acc);
        cum_violation.push(viol_acc);
        comparator_value.push(comp_acc);
        regret_prefix.push(loss_acc - comp_acc);
    }
    Ok(RunEvaluation {
        cum_loss,
        cum_violation,
        comparator_value,
        regret_prefix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate_incomparability_fixture, FixtureKind, TraceMetadata};

    #[test]
    fn feasible_vertex_wins_when_cheapest() {
        let opt = per_slot_optimum(&[0.9, 0.1], &[-0.25, -0.25]).unwrap();
        assert_eq!(opt.x, vec![0.0, 1.0]);
        assert_eq!(opt.value, 0.1);
    }

    #[test]
    fn boundary_mixture_beats_pure_feasible_arm() {
        let opt = per_slot_optimum(&[0.2, 0.8], &[0.5, -0.5]).unwrap();
        assert_eq!(opt.x, vec![0.5, 0.5]);
        assert_eq!(opt.value, 0.5);

        let opt = per_slot_optimum(&[0.0, 1.0], &[0.1, -0.1]).unwrap();
        assert_eq!(opt.x, vec![0.5, 0.5]);
        assert_eq!(opt.value, 0.5);
    }

    #[test]
    fn ties_keep_the_lowest_arm() {
        let opt = per_slot_optimum(&[0.3, 0.3], &[-1.0, -1.0]).unwrap();
        assert_eq!(opt.x, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_constraint_arm_is_feasible() {
        let opt = per_slot_optimum(&[0.4, 0.6], &[0.0, -0.5]).unwrap();
        assert_eq!(opt.x, vec![1.0, 0.0]);
        assert_eq!(opt.value, 0.4);
    }

    #[test]
    fn all_violating_slot_is_rejected() {
        assert_eq!(
            per_slot_optimum(&[0.1, 0.2], &[0.5, 0.25]),
            Err(OracleError::NoFeasiblePoint { slot: 0 })
        );
        assert!(per_slot_optimum(&[0.1], &[0.5, 0.25]).is_err());
        assert!(per_slot_optimum(&[f64::NAN], &[-0.5]).is_err());
    }

    fn literal_trace(losses: Vec<Vec<f64>>, constraints: Vec<Vec<f64>>) -> Trace {
        let rho_hat = Trace::compute_rho_hat(&constraints);
        Trace {
            n: losses[0].len(),
            horizon: losses.len(),
            losses,
            constraints,
            metadata: TraceMetadata {
                generator: "literal".into(),
                seed: 0,
                params: String::new(),
                rho_hat,
            },
        }
    }

    #[test]
    fn alternating_losses_have_known_measures() {
        let trace = literal_trace(
            vec![
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
            ],
            vec![vec![-0.25; 2]; 4],
        );
        let comps = comparator_sequence(&trace).unwrap();
        assert_eq!(comps.values, vec![0.0; 4]);
        let m = regularity_measures(&trace, &comps);
        assert_eq!(m.path_length, 6.0);
        assert_eq!(m.temporal_variation, 3.0);
    }

    #[test]
    fn fixtures_match_their_analytic_measures() {
        for horizon in [4usize, 8, 16] {
            let trace =
                generate_incomparability_fixture(FixtureKind::VtSmallPtLarge, horizon).unwrap();
            let comps = comparator_sequence(&trace).unwrap();
            let m = regularity_measures(&trace, &comps);
            assert_eq!(m.path_length, 2.0 * (horizon - 1) as f64);
            assert_eq!(m.temporal_variation, (horizon - 1) as f64 / horizon as f64);

            let trace =
                generate_incomparability_fixture(FixtureKind::VtLargePtSmall, horizon).unwrap();
            let comps = comparator_sequence(&trace).unwrap();
            let m = regularity_measures(&trace, &comps);
            assert_eq!(m.path_length, 0.0);
            assert_eq!(m.temporal_variation, (horizon - 1) as f64 / 2.0);
        }
    }

    #[test]
    fn stationary_trace_has_zero_measures() {
        let trace = literal_trace(vec![vec![0.3, 0.7]; 5], vec![vec![-0.25, 0.25]; 5]);
        let comps = comparator_sequence(&trace).unwrap();
        let m = regularity_measures(&trace, &comps);
        assert_eq!(m.path_length, 0.0);
        assert_eq!(m.temporal_variation, 0.0);
    }

    #[test]
    fn run_evaluation_accumulates_prefixes() {
        let trace = literal_trace(
            vec![vec![0.2, 0.8], vec![0.2, 0.8], vec![0.2, 0.8]],
            vec![vec![0.5, -0.5]; 3],
        );
        let comps = comparator_sequence(&trace).unwrap();
        // Benchmark mixes to value 0.5 each round.
        let rounds: Vec<RoundOutcome> = [1usize, 0, 1]
            .iter()
            .map(|&a| RoundOutcome {
                action: a,
                loss: trace.losses[0][a],
                constraint: trace.constraints[0][a],
                lambda: 0.0,
            })
            .collect();
        let eval = evaluate_run(&trace, &comps, &rounds).unwrap();
        assert_eq!(eval.cum_loss, vec![0.8, 1.0, 1.8]);
        assert_eq!(eval.cum_violation, vec![-0.5, 0.0, -0.5]);
        assert_eq!(eval.comparator_value, vec![0.5, 1.0, 1.5]);
        assert_eq!(eval.regret_prefix[2], 1.8 - 1.5);
    }

    #[test]
    fn run_evaluation_rejects_mismatched_records() {
        let trace = literal_trace(vec![vec![0.2, 0.8]], vec![vec![-0.5, -0.5]]);
        let comps = comparator_sequence(&trace).unwrap();
        let wrong = vec![RoundOutcome {
            action: 0,
            loss: 0.3,
            constraint: -0.5,
            lambda: 0.0,
        }];
        assert!(matches!(
            evaluate_run(&trace, &comps, &wrong),
            Err(OracleError::RecordMismatch { t: 0, .. })
        ));
    }
}

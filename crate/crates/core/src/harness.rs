//! Experiment orchestration: trace resolution, policy construction, per-seed
//! parallel runs, and the CSV and JSON artifacts.
//!
//! Everything downstream of a config is deterministic. Per-seed runs execute
//! on their own threads but each run depends only on its seed, the resolved
//! trace, and the policy spec, so artifacts are byte-identical across
//! invocations regardless of scheduling.

use crate::bcomd::{compute_parameters, BcomdState, PolicyError, RoundOutcome, ScheduleMode};
use crate::environment::{
    generate_incomparability_fixture, generate_shifting_trace, read_trace, FixtureKind, Trace,
    TraceError, TraceGenConfig,
};
use crate::meta::{MetaConfig, MetaState};
use crate::oracle::{self, ComparatorSequence, OracleError, RegularityMeasures};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Column layout of per-round run files.
pub const CSV_HEADER: &str =
    "t,action,loss,constraint,lambda,cum_loss,cum_violation,comparator_value,regret_prefix";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("artifact encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("infeasible: measured slater margin {rho_hat} cannot support required margin {required}")]
    Infeasible { rho_hat: f64, required: f64 },
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("worker thread failed: {0}")]
    Thread(String),
}

impl HarnessError {
    /// Distinguishes "the environment cannot support this run" from plain
    /// validation failures; callers map this to its own exit code. A slot
    /// with no feasible distribution counts: the comparator, and with it
    /// regret, is undefined there for every policy.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            HarnessError::Infeasible { .. }
                | HarnessError::Trace(TraceError::Infeasible { .. })
                | HarnessError::Oracle(OracleError::NoFeasiblePoint { .. })
        )
    }
}

/// Where the environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum TraceSource {
    Shifting {
        #[serde(flatten)]
        cfg: TraceGenConfig,
        #[serde(default)]
        seed: u64,
    },
    Fixture {
        kind: FixtureKind,
        horizon: usize,
    },
    File {
        path: PathBuf,
    },
}

pub fn resolve_trace(source: &TraceSource) -> Result<Trace, HarnessError> {
    let trace = match source {
        TraceSource::Shifting { cfg, seed } => generate_shifting_trace(cfg, *seed)?,
        TraceSource::Fixture { kind, horizon } => {
            generate_incomparability_fixture(*kind, *horizon)?
        }
        TraceSource::File { path } => read_trace(path)?,
    };
    Ok(trace)
}

fn default_true() -> bool {
    true
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Which policy to run. The tag strings are the stable external names used
/// on the command line and in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    /// Full derived schedule from the horizon, Slater margin, and the
    /// trace's regularity measures.
    BcomdTheorem1,
    /// Fixed step sizes supplied by the caller.
    BcomdManual {
        eta: f64,
        mu: f64,
        gamma: f64,
        #[serde(default)]
        omega: f64,
    },
    /// Doubling phases with a grid of experts under an entropic mixer.
    Mbcomd {
        #[serde(default)]
        m_override: Option<f64>,
        #[serde(default)]
        cap_grid: bool,
        #[serde(default = "default_true")]
        stabilize: bool,
    },
    /// Unconstrained baseline: same primal update, dual frozen at zero.
    Exp3 { eta: f64, gamma: f64 },
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::BcomdTheorem1 => "bcomd-theorem1",
            PolicySpec::BcomdManual { .. } => "bcomd-manual",
            PolicySpec::Mbcomd { .. } => "mbcomd",
            PolicySpec::Exp3 { .. } => "exp3",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PolicySpec::BcomdTheorem1 => "derived schedule".into(),
            PolicySpec::BcomdManual {
                eta,
                mu,
                gamma,
                omega,
            } => format!("eta={eta} mu={mu} gamma={gamma} omega={omega}"),
            PolicySpec::Mbcomd {
                m_override,
                cap_grid,
                stabilize,
            } => format!("m_override={m_override:?} cap_grid={cap_grid} stabilize={stabilize}"),
            PolicySpec::Exp3 { eta, gamma } => format!("eta={eta} gamma={gamma}"),
        }
    }

    /// Whether the policy's guarantees require a certified Slater margin.
    fn needs_slater(&self) -> bool {
        matches!(self, PolicySpec::BcomdTheorem1 | PolicySpec::Mbcomd { .. })
    }
}

/// A constructed policy ready to play a trace.
pub enum PolicyRuntime {
    Single(BcomdState),
    Meta(Box<MetaState>),
}

impl PolicyRuntime {
    pub fn step<F>(&mut self, oracle: F) -> Result<RoundOutcome, PolicyError>
    where
        F: FnMut(usize) -> (f64, f64),
    {
        match self {
            PolicyRuntime::Single(s) => s.step(oracle),
            PolicyRuntime::Meta(m) => m.step(oracle),
        }
    }

    pub fn clamp_events(&self) -> u64 {
        match self {
            PolicyRuntime::Single(s) => s.clamp_events,
            PolicyRuntime::Meta(m) => m.clamp_events(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PolicyRuntime::Single(s) => format!(
                "n={} horizon={} rho={} eta={} mu={} gamma={} omega={} c_t={} scheduled={} dual_frozen={}",
                s.params.n,
                s.params.horizon,
                s.params.rho,
                s.params.eta,
                s.params.mu,
                s.params.gamma,
                s.params.omega,
                s.params.c_t,
                s.params.scheduled,
                s.is_dual_frozen(),
            ),
            PolicyRuntime::Meta(m) => format!(
                "n={} horizon={} rho={} phases={} m_override={:?} cap_grid={} stabilize={}",
                m.cfg.n,
                m.cfg.horizon,
                m.cfg.rho,
                m.plan.phases.len(),
                m.cfg.m_override,
                m.cfg.cap_grid,
                m.cfg.stabilize,
            ),
        }
    }
}

/// Resolve the margin handed to schedules. A zero request means "use the
/// measured one". Policies whose guarantees need Assumption-style feasibility
/// reject margins the trace does not certify; the others only carry the value
/// for the record, so an infeasible trace falls back to a unit placeholder.
fn effective_rho(
    requested: f64,
    trace: &Trace,
    policy: &PolicySpec,
) -> Result<f64, HarnessError> {
    if !requested.is_finite() || !(0.0..=1.0).contains(&requested) {
        return Err(HarnessError::InvalidConfig(format!(
            "rho must be in [0,1] (0 means measured), got {requested}"
        )));
    }
    let rho_hat = trace.metadata.rho_hat;
    if requested > 0.0 {
        if policy.needs_slater() && requested > rho_hat {
            return Err(HarnessError::Infeasible {
                rho_hat,
                required: requested,
            });
        }
        return Ok(requested);
    }
    if rho_hat > 0.0 {
        Ok(rho_hat.min(1.0))
    } else if policy.needs_slater() {
        Err(HarnessError::Infeasible {
            rho_hat,
            required: 0.0,
        })
    } else {
        Ok(1.0)
    }
}

pub fn build_policy(
    spec: &PolicySpec,
    n: usize,
    horizon: usize,
    rho: f64,
    measures: &RegularityMeasures,
    seed: u64,
) -> Result<PolicyRuntime, PolicyError> {
    let runtime = match spec {
        PolicySpec::BcomdTheorem1 => {
            let params = compute_parameters(
                n,
                horizon,
                rho,
                ScheduleMode::Theorem1 {
                    path_length: measures.path_length,
                    temporal_variation: measures.temporal_variation,
                },
            )?;
            PolicyRuntime::Single(BcomdState::new(params, seed))
        }
        PolicySpec::BcomdManual {
            eta,
            mu,
            gamma,
            omega,
        } => {
            let params = compute_parameters(
                n,
                horizon,
                rho,
                ScheduleMode::Manual {
                    eta: *eta,
                    mu: *mu,
                    gamma: *gamma,
                    omega: *omega,
                },
            )?;
            PolicyRuntime::Single(BcomdState::new(params, seed))
        }
        PolicySpec::Mbcomd {
            m_override,
            cap_grid,
            stabilize,
        } => {
            let cfg = MetaConfig {
                n,
                horizon,
                rho,
                m_override: *m_override,
                cap_grid: *cap_grid,
                stabilize: *stabilize,
            };
            PolicyRuntime::Meta(Box::new(MetaState::new(cfg, seed)?))
        }
        PolicySpec::Exp3 { eta, gamma } => {
            let params = compute_parameters(
                n,
                horizon,
                rho,
                ScheduleMode::Manual {
                    eta: *eta,
                    mu: 0.0,
                    gamma: *gamma,
                    omega: 0.0,
                },
            )?;
            PolicyRuntime::Single(BcomdState::new(params, seed).exp3_mode())
        }
    };
    Ok(runtime)
}

/// Play every round of a trace.
pub fn play_trace(
    runtime: &mut PolicyRuntime,
    trace: &Trace,
) -> Result<Vec<RoundOutcome>, PolicyError> {
    let mut rounds = Vec::with_capacity(trace.horizon);
    for t in 0..trace.horizon {
        let outcome = runtime.step(|a| (trace.losses[t][a], trace.constraints[t][a]))?;
        rounds.push(outcome);
    }
    Ok(rounds)
}

/// One experiment: a policy on a trace over a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trace: TraceSource,
    pub policy: PolicySpec,
    /// Slater margin handed to schedules; 0 means "use the measured one".
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub emit_csv: bool,
}

/// Endpoint statistics of one seed's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub rounds: usize,
    pub final_loss: f64,
    pub final_violation: f64,
    /// Largest prefix of cumulative violation; captures transients that the
    /// endpoint alone would hide.
    pub peak_violation: f64,
    pub final_regret: f64,
    pub clamp_events: u64,
    pub csv_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub policy: String,
    pub policy_detail: String,
    pub resolved_params: String,
    pub generator: String,
    pub n: usize,
    pub horizon: usize,
    pub rho: f64,
    pub rho_hat: f64,
    pub path_length: f64,
    pub temporal_variation: f64,
    pub comparator_total: f64,
    pub runs: Vec<RunRecord>,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_violation: f64,
    pub stderr_violation: f64,
    pub mean_peak_violation: f64,
    pub total_clamp_events: u64,
    pub wall_seconds: f64,
}

/// Sample mean and standard error; a single observation has zero error.
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn render_csv(rounds: &[RoundOutcome], eval: &oracle::RunEvaluation) -> String {
    let mut out = String::with_capacity(64 * (rounds.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, round) in rounds.iter().enumerate() {
        // Rounds and actions are 1-based on the wire.
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t + 1,
            round.action + 1,
            round.loss,
            round.constraint,
            round.lambda,
            eval.cum_loss[t],
            eval.cum_violation[t],
            eval.comparator_value[t],
            eval.regret_prefix[t],
        )
        .expect("write to string");
    }
    out
}

fn run_one_seed(
    spec: &PolicySpec,
    trace: &Trace,
    comparators: &ComparatorSequence,
    measures: &RegularityMeasures,
    rho: f64,
    seed: u64,
    csv_path: Option<PathBuf>,
) -> Result<RunRecord, HarnessError> {
    let mut runtime = build_policy(spec, trace.n, trace.horizon, rho, measures, seed)?;
    let rounds = play_trace(&mut runtime, trace)?;
    let eval = oracle::evaluate_run(trace, comparators, &rounds)?;
    let last = rounds.len() - 1;
    let written = match &csv_path {
        Some(path) => {
            std::fs::write(path, render_csv(&rounds, &eval))?;
            Some(path.display().to_string())
        }
        None => None,
    };
    Ok(RunRecord {
        seed,
        rounds: rounds.len(),
        final_loss: eval.cum_loss[last],
        final_violation: eval.cum_violation[last],
        peak_violation: eval.cum_violation.iter().cloned().fold(f64::MIN, f64::max),
        final_regret: eval.regret_prefix[last],
        clamp_events: runtime.clamp_events(),
        csv_path: written,
    })
}

fn run_all_seeds(
    spec: &PolicySpec,
    trace: &Trace,
    comparators: &ComparatorSequence,
    measures: &RegularityMeasures,
    rho: f64,
    seeds: &[u64],
    csv_dir: Option<&Path>,
) -> Result<Vec<RunRecord>, HarnessError> {
    let results: Vec<Result<RunRecord, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let csv_path = csv_dir.map(|d| d.join(format!("run_s{seed}.csv")));
                scope.spawn(move || {
                    run_one_seed(spec, trace, comparators, measures, rho, seed, csv_path)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(HarnessError::Thread("seed worker panicked".into())))
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Run one policy over all seeds of a config, in parallel, and aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    let started = Instant::now();
    if cfg.seeds.is_empty() {
        return Err(HarnessError::InvalidConfig("need at least one seed".into()));
    }
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let trace = resolve_trace(&cfg.trace)?;
    let comparators = oracle::comparator_sequence(&trace)?;
    let measures = oracle::regularity_measures(&trace, &comparators);
    let rho = effective_rho(cfg.rho, &trace, &cfg.policy)?;
    // Parameter resolution is seed independent; fail fast before spawning.
    let probe = build_policy(&cfg.policy, trace.n, trace.horizon, rho, &measures, seeds[0])?;
    let resolved_params = probe.describe();
    drop(probe);

    let csv_dir = if cfg.emit_csv { cfg.out_dir.as_deref() } else { None };
    if let Some(dir) = cfg.out_dir.as_deref() {
        std::fs::create_dir_all(dir)?;
    }
    let runs = run_all_seeds(
        &cfg.policy,
        &trace,
        &comparators,
        &measures,
        rho,
        &seeds,
        csv_dir,
    )?;

    let regrets: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
    let violations: Vec<f64> = runs.iter().map(|r| r.final_violation).collect();
    let peaks: Vec<f64> = runs.iter().map(|r| r.peak_violation).collect();
    let (mean_regret, stderr_regret) = mean_stderr(&regrets);
    let (mean_violation, stderr_violation) = mean_stderr(&violations);
    let (mean_peak_violation, _) = mean_stderr(&peaks);
    let summary = ExperimentSummary {
        policy: cfg.policy.label().into(),
        policy_detail: cfg.policy.describe(),
        resolved_params,
        generator: trace.metadata.generator.clone(),
        n: trace.n,
        horizon: trace.horizon,
        rho,
        rho_hat: trace.metadata.rho_hat,
        path_length: measures.path_length,
        temporal_variation: measures.temporal_variation,
        comparator_total: comparators.values.iter().sum(),
        total_clamp_events: runs.iter().map(|r| r.clamp_events).sum(),
        runs,
        mean_regret,
        stderr_regret,
        mean_violation,
        stderr_violation,
        mean_peak_violation,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = cfg.out_dir.as_deref() {
        let file = std::fs::File::create(dir.join("summary.json"))?;
        serde_json::to_writer_pretty(file, &summary)?;
    }
    Ok(summary)
}

/// Several policies on one trace, with per-policy error isolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub trace: TraceSource,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Mean final violation a row may carry and still be picked as best.
    #[serde(default)]
    pub violation_budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub label: String,
    pub detail: String,
    pub policy: PolicySpec,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_violation: f64,
    pub mean_peak_violation: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the admissible row with the least regret.
    pub best: Option<usize>,
    pub rho_hat: f64,
    pub path_length: f64,
    pub temporal_variation: f64,
}

/// Least mean regret among error-free rows within the violation budget.
pub fn select_best(rows: &[SweepRow], violation_budget: Option<f64>) -> Option<usize> {
    rows.iter()
        .filter(|r| r.error.is_none())
        .filter(|r| violation_budget.is_none_or(|b| r.mean_violation <= b))
        .min_by(|a, b| a.mean_regret.total_cmp(&b.mean_regret))
        .map(|r| r.index)
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepOutcome, HarnessError> {
    if cfg.policies.is_empty() {
        return Err(HarnessError::InvalidConfig("empty policy list".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(HarnessError::InvalidConfig("need at least one seed".into()));
    }
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let trace = resolve_trace(&cfg.trace)?;
    let comparators = oracle::comparator_sequence(&trace)?;
    let measures = oracle::regularity_measures(&trace, &comparators);

    let mut rows = Vec::with_capacity(cfg.policies.len());
    for (index, policy) in cfg.policies.iter().enumerate() {
        let outcome = effective_rho(cfg.rho, &trace, policy).and_then(|rho| {
            run_all_seeds(policy, &trace, &comparators, &measures, rho, &seeds, None)
        });
        let row = match outcome {
            Ok(runs) => {
                let regrets: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
                let violations: Vec<f64> = runs.iter().map(|r| r.final_violation).collect();
                let peaks: Vec<f64> = runs.iter().map(|r| r.peak_violation).collect();
                let (mean_regret, stderr_regret) = mean_stderr(&regrets);
                let (mean_violation, _) = mean_stderr(&violations);
                let (mean_peak_violation, _) = mean_stderr(&peaks);
                SweepRow {
                    index,
                    label: policy.label().into(),
                    detail: policy.describe(),
                    policy: policy.clone(),
                    mean_regret,
                    stderr_regret,
                    mean_violation,
                    mean_peak_violation,
                    error: None,
                }
            }
            Err(err) => SweepRow {
                index,
                label: policy.label().into(),
                detail: policy.describe(),
                policy: policy.clone(),
                mean_regret: f64::NAN,
                stderr_regret: f64::NAN,
                mean_violation: f64::NAN,
                mean_peak_violation: f64::NAN,
                error: Some(err.to_string()),
            },
        };
        rows.push(row);
    }
    let best = select_best(&rows, cfg.violation_budget);
    let outcome = SweepOutcome {
        best,
        rho_hat: trace.metadata.rho_hat,
        path_length: measures.path_length,
        temporal_variation: measures.temporal_variation,
        rows,
    };
    if let Some(dir) = cfg.out_dir.as_deref() {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join("sweep.json"))?;
        serde_json::to_writer_pretty(file, &outcome)?;
    }
    Ok(outcome)
}

/// Static facts about a trace, for validation tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub n: usize,
    pub horizon: usize,
    pub generator: String,
    pub seed: u64,
    pub rho_hat: f64,
    pub feasible: bool,
    pub path_length: f64,
    pub temporal_variation: f64,
    pub comparator_total: f64,
}

pub fn analyze_trace(trace: &Trace) -> Result<TraceReport, HarnessError> {
    trace.validate()?;
    let comparators = oracle::comparator_sequence(trace)?;
    let measures = oracle::regularity_measures(trace, &comparators);
    Ok(TraceReport {
        n: trace.n,
        horizon: trace.horizon,
        generator: trace.metadata.generator.clone(),
        seed: trace.metadata.seed,
        rho_hat: trace.metadata.rho_hat,
        feasible: trace.metadata.rho_hat > 0.0,
        path_length: measures.path_length,
        temporal_variation: measures.temporal_variation,
        comparator_total: comparators.values.iter().sum(),
    })
}

//! Command line front end for the constrained bandit crates.
//!
//! Subcommands map one-to-one onto library entry points: `generate` writes
//! trace files, `measure` reports their regularity, `run` executes one policy
//! over a set of seeds, `sweep` ranks several policies on one trace, `check`
//! runs the acceptance suite, and `plot` folds per-seed run CSVs into a
//! gnuplot-ready data file.
//!
//! Exit codes: 0 on success, 1 on validation or usage failure, 2 when the
//! requested run is infeasible for the policy's requirements.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcomd_core::environment::{
    generate_incomparability_fixture, generate_shifting_trace, read_trace, write_trace,
    FixtureKind, TraceGenConfig,
};
use bcomd_core::harness::{
    analyze_trace, run_experiment, ExperimentConfig, HarnessError, SweepConfig, TraceSource,
    CSV_HEADER,
};
use bcomd_core::{acceptance, PolicySpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bcomd",
    version,
    about = "Constrained bandit mirror descent: trace generation, runs, sweeps, and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trace file
    Generate(GenerateArgs),
    /// Report a trace file's regularity measures and Slater margin
    Measure(MeasureArgs),
    /// Run one policy over a trace for one or more seeds
    Run(RunArgs),
    /// Run several policies on one trace and rank them
    Sweep(SweepArgs),
    /// Run the acceptance suite
    Check(CheckArgs),
    /// Aggregate per-seed run CSVs into a gnuplot-ready data file
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    /// Drifting optimum under nearly constant losses
    VtSmallPtLarge,
    /// Fixed optimum under alternating losses
    VtLargePtSmall,
}

impl From<FixtureArg> for FixtureKind {
    fn from(arg: FixtureArg) -> Self {
        match arg {
            FixtureArg::VtSmallPtLarge => FixtureKind::VtSmallPtLarge,
            FixtureArg::VtLargePtSmall => FixtureKind::VtLargePtSmall,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Destination trace file
    #[arg(long)]
    out: PathBuf,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit a deterministic fixture instead of the shifting generator
    #[arg(long, value_enum)]
    fixture: Option<FixtureArg>,
    /// Number of arms
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// Rounds; 0 means window times repetitions (fixtures require an explicit value)
    #[arg(long, default_value_t = 0)]
    horizon: usize,
    /// Rounds between profile shifts
    #[arg(long, default_value_t = 2000)]
    window: usize,
    /// Arms the profile rotates by at each shift
    #[arg(long, default_value_t = 5)]
    shift: usize,
    /// Number of windows when horizon is 0
    #[arg(long, default_value_t = 6)]
    repetitions: usize,
    /// Gaussian noise level on losses and constraints
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    /// Constraint magnitude before noise
    #[arg(long, default_value_t = 0.25)]
    margin: f64,
    /// Keep traces whose measured Slater margin is not positive
    #[arg(long)]
    allow_infeasible: bool,
}

#[derive(Args)]
struct MeasureArgs {
    /// Trace file to analyze
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config: a JSON file path or an inline JSON object
    #[arg(long, conflicts_with_all = ["trace", "policy", "seed", "out", "rho", "no_csv"])]
    config: Option<String>,
    /// Trace file produced by `generate`
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Policy name (bcomd-theorem1, mbcomd) or a JSON spec
    #[arg(long, default_value = "bcomd-theorem1")]
    policy: String,
    /// Policy seeds, repeated or comma separated
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Directory for per-seed CSVs and summary.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Slater margin handed to schedules; 0 uses the measured one
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Skip per-round CSV emission
    #[arg(long)]
    no_csv: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config: a JSON file path or an inline JSON object
    #[arg(long, conflicts_with_all = ["trace", "policy", "seed", "out", "rho", "budget"])]
    config: Option<String>,
    /// Trace file every candidate runs on
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Candidate policy, repeatable; name or JSON spec
    #[arg(long)]
    policy: Vec<String>,
    /// Policy seeds, repeated or comma separated
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Directory for sweep.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Slater margin handed to schedules; 0 uses the measured one
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Mean final violation a candidate may carry and still be ranked best
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    /// Run only these criterion numbers (1 through 11), comma separated
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
    /// Also write the report lines to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Run CSV files, or directories searched for run_*.csv
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Destination data file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Harness(HarnessError),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Harness(err) => err.fmt(f),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    fn is_infeasibility(&self) -> bool {
        matches!(self, CliError::Harness(err) if err.is_infeasibility())
    }
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        CliError::Harness(err)
    }
}

impl From<bcomd_core::environment::TraceError> for CliError {
    fn from(err: bcomd_core::environment::TraceError) -> Self {
        CliError::Harness(err.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Harness(err.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Harness(err.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Help and version surface as "errors" here; they exit 0. Real parse
        // failures must exit 1 because 2 is reserved for infeasibility.
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_infeasibility() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Measure(args) => measure(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Check(args) => check(args),
        Command::Plot(args) => plot(args),
    }
}

/// Accepts either inline JSON (starts with `{`) or a path to a JSON file.
fn load_json<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)
            .map_err(|err| CliError::Usage(format!("cannot read config {arg}: {err}")))?
    };
    serde_json::from_str(&text).map_err(|err| CliError::Usage(format!("bad config: {err}")))
}

/// Accepts a bare policy name for the parameter-free policies, or a JSON
/// spec for the ones that need explicit step sizes.
fn parse_policy(arg: &str) -> Result<PolicySpec, CliError> {
    let trimmed = arg.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed)
            .map_err(|err| CliError::Usage(format!("bad policy spec: {err}")));
    }
    match trimmed {
        "bcomd-theorem1" => Ok(PolicySpec::BcomdTheorem1),
        "mbcomd" => Ok(PolicySpec::Mbcomd {
            m_override: None,
            cap_grid: false,
            stabilize: true,
        }),
        other => Err(CliError::Usage(format!(
            "unknown policy {other:?}; named policies are bcomd-theorem1 and mbcomd, \
             others take JSON like {{\"kind\":\"bcomd-manual\",\"eta\":0.01,\"mu\":0.005,\"gamma\":1e-4}}"
        ))),
    }
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let trace = match args.fixture {
        Some(kind) => generate_incomparability_fixture(kind.into(), args.horizon)?,
        None => {
            let cfg = TraceGenConfig {
                n: args.n,
                horizon: args.horizon,
                window: args.window,
                shift: args.shift,
                repetitions: args.repetitions,
                noise_std: args.noise_std,
                margin: args.margin,
                allow_infeasible: args.allow_infeasible,
                ..TraceGenConfig::default()
            };
            generate_shifting_trace(&cfg, args.seed)?
        }
    };
    write_trace(&trace, &args.out)?;
    let summary = serde_json::json!({
        "path": args.out,
        "generator": trace.metadata.generator,
        "seed": trace.metadata.seed,
        "n": trace.n,
        "horizon": trace.horizon,
        "rho_hat": trace.metadata.rho_hat,
        "feasible": trace.metadata.rho_hat > 0.0,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn measure(args: MeasureArgs) -> Result<(), CliError> {
    let trace = read_trace(&args.trace)?;
    let report = analyze_trace(&trace)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let cfg: ExperimentConfig = match args.config {
        Some(src) => load_json(&src)?,
        None => {
            let path = args
                .trace
                .ok_or_else(|| CliError::Usage("either --config or --trace is required".into()))?;
            ExperimentConfig {
                trace: TraceSource::File { path },
                policy: parse_policy(&args.policy)?,
                rho: args.rho,
                seeds: if args.seed.is_empty() { vec![0] } else { args.seed },
                out_dir: args.out,
                emit_csv: !args.no_csv,
            }
        }
    };
    let summary = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg: SweepConfig = match args.config {
        Some(src) => load_json(&src)?,
        None => {
            let path = args
                .trace
                .ok_or_else(|| CliError::Usage("either --config or --trace is required".into()))?;
            if args.policy.is_empty() {
                return Err(CliError::Usage(
                    "at least one --policy is required without --config".into(),
                ));
            }
            let policies = args
                .policy
                .iter()
                .map(|p| parse_policy(p))
                .collect::<Result<Vec<_>, _>>()?;
            SweepConfig {
                trace: TraceSource::File { path },
                policies,
                rho: args.rho,
                seeds: if args.seed.is_empty() { vec![0] } else { args.seed },
                out_dir: args.out,
                violation_budget: args.budget,
            }
        }
    };
    let outcome = bcomd_core::harness::sweep(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(())
}

fn criterion_by_id(id: usize) -> Option<acceptance::CriterionReport> {
    Some(match id {
        1 => acceptance::criterion_1(),
        2 => acceptance::criterion_2(),
        3 => acceptance::criterion_3(),
        4 => acceptance::criterion_4(),
        5 => acceptance::criterion_5(),
        6 => acceptance::criterion_6(),
        7 => acceptance::criterion_7(),
        8 => acceptance::criterion_8(),
        9 => acceptance::criterion_9(),
        10 => acceptance::criterion_10(),
        11 => acceptance::criterion_11(),
        _ => return None,
    })
}

fn check(args: CheckArgs) -> Result<(), CliError> {
    let reports = if args.only.is_empty() {
        acceptance::run_all()
    } else {
        let mut ids = args.only.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|id| {
                criterion_by_id(id)
                    .ok_or_else(|| CliError::Usage(format!("no criterion numbered {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut lines = String::new();
    for report in &reports {
        let line = report.line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    if let Some(path) = &args.out {
        fs::write(path, &lines)?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Usage(format!(
            "{failed} of {} criteria failed",
            reports.len()
        )));
    }
    Ok(())
}

/// Cumulative loss, cumulative violation, and regret prefix of one run CSV.
struct Series {
    cum_loss: Vec<f64>,
    cum_violation: Vec<f64>,
    regret: Vec<f64>,
}

fn read_series(path: &Path) -> Result<Series, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Usage(format!("{}: empty file", path.display())))?;
    if header != CSV_HEADER {
        return Err(CliError::Usage(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut series = Series {
        cum_loss: Vec::new(),
        cum_violation: Vec::new(),
        regret: Vec::new(),
    };
    for (offset, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CliError::Usage(format!(
                "{}: line {}: expected 9 fields, found {}",
                path.display(),
                offset + 2,
                fields.len()
            )));
        }
        let parse = |idx: usize| -> Result<f64, CliError> {
            fields[idx].parse().map_err(|err| {
                CliError::Usage(format!(
                    "{}: line {}: column {}: {err}",
                    path.display(),
                    offset + 2,
                    idx + 1
                ))
            })
        };
        series.cum_loss.push(parse(5)?);
        series.cum_violation.push(parse(6)?);
        series.regret.push(parse(8)?);
    }
    Ok(series)
}

fn collect_csvs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .map(|entry| entry.path())
                .filter(|path| {
                    path.file_name()
                        .and_then(|name| name.to_str())
                        .is_some_and(|name| name.starts_with("run_") && name.ends_with(".csv"))
                })
                .collect();
            if found.is_empty() {
                return Err(CliError::Usage(format!(
                    "no run_*.csv files in {}",
                    input.display()
                )));
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn plot(args: PlotArgs) -> Result<(), CliError> {
    let files = collect_csvs(&args.inputs)?;
    let series = files
        .iter()
        .map(|path| read_series(path))
        .collect::<Result<Vec<_>, _>>()?;
    let rounds = series[0].regret.len();
    if let Some(pos) = series.iter().position(|s| s.regret.len() != rounds) {
        return Err(CliError::Usage(format!(
            "{}: {} rounds, but {} has {}",
            files[0].display(),
            rounds,
            files[pos].display(),
            series[pos].regret.len()
        )));
    }
    let k = series.len() as f64;
    let mut out = String::with_capacity(48 * (rounds + 2));
    out.push_str(&format!("# aggregated over {} runs\n", series.len()));
    out.push_str("# t cum_loss cum_violation regret regret_stderr\n");
    for t in 0..rounds {
        let loss = series.iter().map(|s| s.cum_loss[t]).sum::<f64>() / k;
        let violation = series.iter().map(|s| s.cum_violation[t]).sum::<f64>() / k;
        let regret = series.iter().map(|s| s.regret[t]).sum::<f64>() / k;
        let stderr = if series.len() < 2 {
            0.0
        } else {
            let var = series
                .iter()
                .map(|s| (s.regret[t] - regret) * (s.regret[t] - regret))
                .sum::<f64>()
                / (k - 1.0);
            (var / k).sqrt()
        };
        out.push_str(&format!(
            "{} {loss} {violation} {regret} {stderr}\n",
            t + 1
        ));
    }
    fs::write(&args.out, out)?;
    Ok(())
}

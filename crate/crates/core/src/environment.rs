//! Synthetic adversarial traces and the trace-file interchange format.
//!
//! A [`Trace`] is the whole environment fixed up front: a loss matrix in
//! `[0,1]` and a constraint matrix in `[-1,1]`, one row per round. Policies
//! only ever see single entries of it, but generating the full matrices first
//! is what makes the adversary oblivious by construction.
//!
//! Generators:
//!
//! - [`generate_shifting_trace`]: sinusoidal loss profile and a two-level
//!   constraint profile, both cyclically shifted every `window` rounds and
//!   perturbed with Gaussian noise. `shift = 0, noise_std = 0` degenerates to
//!   the stationary control.
//! - [`generate_incomparability_fixture`]: two tiny alternating-loss
//!   constructions whose path length and temporal variation are known in
//!   closed form, one with large path length and vanishing variation, one the
//!   other way around.
//!
//! The file format is line oriented: a header `n T generator seed`, then `T`
//! lines of `n` losses followed by `n` constraints, printed with 17
//! significant digits so values survive a round trip bit-exactly.

use crate::rng::{stream, SplitMix64};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema error at line {line}: {detail}")]
    Schema { line: usize, detail: String },
    #[error("{kind} out of {range} at ({t},{a}): {value}")]
    OutOfRange {
        kind: &'static str,
        range: &'static str,
        t: usize,
        a: usize,
        value: f64,
    },
    #[error("infeasible trace: slater margin rho_hat = {rho_hat} is not positive")]
    Infeasible { rho_hat: f64 },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// What to do when noise pushes an entry outside its range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClipBehavior {
    /// Saturate at the boundary. Deterministic, unlike resampling.
    #[default]
    Saturate,
    /// Reject the trace instead of clipping.
    Error,
}

/// Generator settings for the shifting trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceGenConfig {
    pub n: usize,
    /// Rounds; 0 means `window * repetitions`.
    pub horizon: usize,
    /// Rounds between profile shifts.
    pub window: usize,
    /// Arms the profiles advance per window.
    pub shift: usize,
    /// Number of windows used for the default horizon.
    pub repetitions: usize,
    pub noise_std: f64,
    /// Magnitude of the two-level constraint profile; the feasibility margin
    /// of the noiseless trace.
    pub margin: f64,
    pub clip: ClipBehavior,
    /// Keep a trace whose measured Slater margin is not positive.
    pub allow_infeasible: bool,
}

impl Default for TraceGenConfig {
    fn default() -> Self {
        Self {
            n: 25,
            horizon: 0,
            window: 2000,
            shift: 5,
            repetitions: 6,
            noise_std: 0.1,
            margin: 0.25,
            clip: ClipBehavior::Saturate,
            allow_infeasible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub generator: String,
    pub seed: u64,
    /// Human-readable generator parameters. Not part of the file format, so
    /// a read-back trace carries an empty string here.
    pub params: String,
    /// Measured Slater margin `min_t max_a (-g[t][a])`.
    pub rho_hat: f64,
}

/// A full environment: losses in `[0,1]`, constraints in `[-1,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub n: usize,
    pub horizon: usize,
    pub losses: Vec<Vec<f64>>,
    pub constraints: Vec<Vec<f64>>,
    pub metadata: TraceMetadata,
}

impl Trace {
    /// Best margin any fixed distribution could certify per round; since the
    /// constraint is linear this is attained at an arm.
    pub fn compute_rho_hat(constraints: &[Vec<f64>]) -> f64 {
        constraints
            .iter()
            .map(|row| row.iter().fold(f64::MIN, |m, &g| m.max(-g)))
            .fold(f64::MAX, f64::min)
    }

    /// Full pass over every entry: dimensions, finiteness, and ranges.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.losses.len() != self.horizon || self.constraints.len() != self.horizon {
            return Err(TraceError::Schema {
                line: 0,
                detail: format!(
                    "expected {} rows, found {} loss rows and {} constraint rows",
                    self.horizon,
                    self.losses.len(),
                    self.constraints.len()
                ),
            });
        }
        for (t, (lrow, grow)) in self.losses.iter().zip(self.constraints.iter()).enumerate() {
            if lrow.len() != self.n || grow.len() != self.n {
                return Err(TraceError::Schema {
                    line: t + 2,
                    detail: format!("row {t} does not have {} entries per matrix", self.n),
                });
            }
            for (a, &v) in lrow.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(TraceError::OutOfRange {
                        kind: "loss",
                        range: "[0,1]",
                        t,
                        a,
                        value: v,
                    });
                }
            }
            for (a, &v) in grow.iter().enumerate() {
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(TraceError::OutOfRange {
                        kind: "constraint",
                        range: "[-1,1]",
                        t,
                        a,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

fn clip(
    value: f64,
    lo: f64,
    hi: f64,
    behavior: ClipBehavior,
    out_of_range: impl FnOnce(f64) -> TraceError,
) -> Result<f64, TraceError> {
    if (lo..=hi).contains(&value) {
        return Ok(value);
    }
    match behavior {
        ClipBehavior::Saturate => Ok(value.clamp(lo, hi)),
        ClipBehavior::Error => Err(out_of_range(value)),
    }
}

/// Cyclic-shift trace. The loss profile is `1 + sin(pi a / (n-1))` rescaled
/// affinely to `[0,1]` before noise (arm 0 lands exactly on 0); the
/// constraint profile is `+margin` for 1-based arms `a <= n/1.5` and
/// `-margin` for the rest. Every `window` rounds both profiles advance
/// cyclically by `shift` arms: entry `a` reads profile position
/// `(a + offset) mod n`. I.i.d. Gaussian noise is added per entry per round,
/// then losses clip to `[0,1]` and constraints to `[-1,1]`.
pub fn generate_shifting_trace(cfg: &TraceGenConfig, seed: u64) -> Result<Trace, TraceError> {
    if cfg.n < 3 {
        return Err(TraceError::InvalidConfig(format!(
            "need n >= 3 for the sinusoidal profile, got {}",
            cfg.n
        )));
    }
    if cfg.window == 0 {
        return Err(TraceError::InvalidConfig("window must be positive".into()));
    }
    if cfg.shift >= cfg.n {
        return Err(TraceError::InvalidConfig(format!(
            "shift {} must be smaller than n {}",
            cfg.shift, cfg.n
        )));
    }
    if !(cfg.noise_std.is_finite() && cfg.noise_std >= 0.0) {
        return Err(TraceError::InvalidConfig(format!(
            "noise_std must be nonnegative, got {}",
            cfg.noise_std
        )));
    }
    if !(cfg.margin.is_finite() && cfg.margin > 0.0 && cfg.margin <= 1.0) {
        return Err(TraceError::InvalidConfig(format!(
            "margin must be in (0,1], got {}",
            cfg.margin
        )));
    }
    let horizon = if cfg.horizon > 0 {
        cfg.horizon
    } else {
        cfg.window * cfg.repetitions
    };
    if horizon == 0 {
        return Err(TraceError::InvalidConfig(
            "horizon resolves to zero rounds".into(),
        ));
    }

    let n = cfg.n;
    let raw: Vec<f64> = (0..n)
        .map(|a| 1.0 + (std::f64::consts::PI * a as f64 / (n - 1) as f64).sin())
        .collect();
    let lo = raw.iter().cloned().fold(f64::MAX, f64::min);
    let hi = raw.iter().cloned().fold(f64::MIN, f64::max);
    let loss_profile: Vec<f64> = raw.iter().map(|&v| (v - lo) / (hi - lo)).collect();
    // 1-based indicator threshold: arms 1..=floor(n/1.5) violate.
    let constraint_profile: Vec<f64> = (0..n)
        .map(|a| {
            if (a + 1) as f64 <= n as f64 / 1.5 {
                cfg.margin
            } else {
                -cfg.margin
            }
        })
        .collect();

    let mut rng = SplitMix64::substream(seed, stream::TRACE);
    let mut losses = Vec::with_capacity(horizon);
    let mut constraints = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let offset = (t / cfg.window) * cfg.shift % n;
        let mut lrow = Vec::with_capacity(n);
        let mut grow = Vec::with_capacity(n);
        for a in 0..n {
            let mut v = loss_profile[(a + offset) % n];
            if cfg.noise_std > 0.0 {
                v += cfg.noise_std * rng.next_gaussian();
            }
            lrow.push(clip(v, 0.0, 1.0, cfg.clip, |value| TraceError::OutOfRange {
                kind: "loss",
                range: "[0,1]",
                t,
                a,
                value,
            })?);
        }
        for a in 0..n {
            let mut v = constraint_profile[(a + offset) % n];
            if cfg.noise_std > 0.0 {
                v += cfg.noise_std * rng.next_gaussian();
            }
            grow.push(clip(v, -1.0, 1.0, cfg.clip, |value| TraceError::OutOfRange {
                kind: "constraint",
                range: "[-1,1]",
                t,
                a,
                value,
            })?);
        }
        losses.push(lrow);
        constraints.push(grow);
    }

    let rho_hat = Trace::compute_rho_hat(&constraints);
    if rho_hat <= 0.0 && !cfg.allow_infeasible {
        return Err(TraceError::Infeasible { rho_hat });
    }
    let trace = Trace {
        n,
        horizon,
        losses,
        constraints,
        metadata: TraceMetadata {
            generator: "shifting".into(),
            seed,
            params: format!(
                "n={n} horizon={horizon} window={} shift={} repetitions={} noise_std={} margin={} indicator=1-based offset=(a+w*shift)%n",
                cfg.window, cfg.shift, cfg.repetitions, cfg.noise_std, cfg.margin
            ),
            rho_hat,
        },
    };
    trace.validate()?;
    Ok(trace)
}

/// The two closed-form fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    /// Three arms, losses alternating `(0, 1/T, 1)` and `(1/T, 0, 1)`: the
    /// comparator hops between two vertices every round (path length
    /// `2(T-1)`) while the losses barely move (variation `(T-1)/T`).
    VtSmallPtLarge,
    /// Two arms, losses alternating `(0, 1)` and `(0, 1/2)`: the comparator
    /// never moves (path length 0) while the losses swing (variation
    /// `(T-1)/2`).
    VtLargePtSmall,
}

impl FixtureKind {
    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::VtSmallPtLarge => "vt-small-pt-large",
            FixtureKind::VtLargePtSmall => "vt-large-pt-small",
        }
    }
}

/// Fixture margin: every arm satisfies the constraint with this slack.
pub const FIXTURE_MARGIN: f64 = 0.25;

/// Build one of the closed-form fixtures. Constraints are `-FIXTURE_MARGIN`
/// everywhere, so every slot is feasible and violations cannot occur.
pub fn generate_incomparability_fixture(
    kind: FixtureKind,
    horizon: usize,
) -> Result<Trace, TraceError> {
    if horizon < 2 {
        return Err(TraceError::InvalidConfig(format!(
            "fixtures need at least 2 rounds, got {horizon}"
        )));
    }
    let (n, rows): (usize, [Vec<f64>; 2]) = match kind {
        FixtureKind::VtSmallPtLarge => {
            let eps = 1.0 / horizon as f64;
            (3, [vec![0.0, eps, 1.0], vec![eps, 0.0, 1.0]])
        }
        FixtureKind::VtLargePtSmall => (2, [vec![0.0, 1.0], vec![0.0, 0.5]]),
    };
    let losses: Vec<Vec<f64>> = (0..horizon).map(|t| rows[t % 2].clone()).collect();
    let constraints = vec![vec![-FIXTURE_MARGIN; n]; horizon];
    let analytic = match kind {
        FixtureKind::VtSmallPtLarge => format!(
            "path_length=2(T-1)={} temporal_variation=(T-1)/T={}",
            2 * (horizon - 1),
            (horizon - 1) as f64 / horizon as f64
        ),
        FixtureKind::VtLargePtSmall => format!(
            "path_length=0 temporal_variation=(T-1)/2={}",
            (horizon - 1) as f64 / 2.0
        ),
    };
    Ok(Trace {
        n,
        horizon,
        losses,
        constraints,
        metadata: TraceMetadata {
            generator: kind.name().into(),
            seed: 0,
            params: analytic,
            rho_hat: FIXTURE_MARGIN,
        },
    })
}

/// Write a trace in the interchange format. The generator name is written
/// into the header and must not contain whitespace.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), TraceError> {
    trace.validate()?;
    if trace.metadata.generator.contains(char::is_whitespace)
        || trace.metadata.generator.is_empty()
    {
        return Err(TraceError::Schema {
            line: 1,
            detail: format!(
                "generator name {:?} must be a single token",
                trace.metadata.generator
            ),
        });
    }
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "{} {} {} {}",
        trace.n, trace.horizon, trace.metadata.generator, trace.metadata.seed
    )?;
    let mut line = String::new();
    for (lrow, grow) in trace.losses.iter().zip(trace.constraints.iter()) {
        line.clear();
        for &v in lrow.iter().chain(grow.iter()) {
            if !line.is_empty() {
                line.push(' ');
            }
            // 17 significant digits: exact f64 round trip.
            write!(line, "{v:.16e}").expect("write to string");
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_token<T: std::str::FromStr>(
    token: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, TraceError> {
    token
        .ok_or_else(|| TraceError::Schema {
            line,
            detail: format!("missing {what}"),
        })?
        .parse::<T>()
        .map_err(|_| TraceError::Schema {
            line,
            detail: format!("cannot parse {what}"),
        })
}

/// Read and fully validate a trace file. The measured Slater margin is
/// recomputed from the constraint matrix; generator parameters beyond the
/// name are not part of the format and come back empty.
pub fn read_trace(path: &Path) -> Result<Trace, TraceError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or(TraceError::Schema {
        line: 1,
        detail: "empty file".into(),
    })??;
    let mut tokens = header.split_ascii_whitespace();
    let n: usize = parse_token(tokens.next(), 1, "arm count")?;
    let horizon: usize = parse_token(tokens.next(), 1, "horizon")?;
    let generator: String = parse_token(tokens.next(), 1, "generator name")?;
    let seed: u64 = parse_token(tokens.next(), 1, "seed")?;
    if tokens.next().is_some() {
        return Err(TraceError::Schema {
            line: 1,
            detail: "trailing tokens in header".into(),
        });
    }
    if n == 0 || horizon == 0 {
        return Err(TraceError::Schema {
            line: 1,
            detail: format!("degenerate dimensions n={n} T={horizon}"),
        });
    }

    let mut losses = Vec::with_capacity(horizon);
    let mut constraints = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let line_no = t + 2;
        let line = lines
            .next()
            .ok_or(TraceError::Schema {
                line: line_no,
                detail: format!("expected {horizon} data lines, file ends at round {t}"),
            })??;
        let values: Vec<f64> = line
            .split_ascii_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| TraceError::Schema {
                    line: line_no,
                    detail: format!("cannot parse value {tok:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != 2 * n {
            return Err(TraceError::Schema {
                line: line_no,
                detail: format!("expected {} columns, got {}", 2 * n, values.len()),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(TraceError::Schema {
                line: line_no,
                detail: format!("non-finite value in column {bad}"),
            });
        }
        losses.push(values[..n].to_vec());
        constraints.push(values[n..].to_vec());
    }
    if let Some(extra) = lines.next() {
        let extra = extra?;
        if !extra.trim().is_empty() {
            return Err(TraceError::Schema {
                line: horizon + 2,
                detail: "trailing data after final round".into(),
            });
        }
    }

    let rho_hat = Trace::compute_rho_hat(&constraints);
    let trace = Trace {
        n,
        horizon,
        losses,
        constraints,
        metadata: TraceMetadata {
            generator,
            seed,
            params: String::new(),
            rho_hat,
        },
    };
    trace.validate()?;
    Ok(trace)
}

/// Write then re-read; the wire content must survive bit-exactly.
pub fn trace_roundtrip(trace: &Trace, path: &Path) -> Result<Trace, TraceError> {
    write_trace(trace, path)?;
    read_trace(path)
}

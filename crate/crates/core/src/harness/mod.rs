//! Multi-seed experiments, aggregation, rate fits and bound comparisons.

mod analysis;
pub mod presets;
mod series;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{
    compare_bound, compare_bound_on_window, default_window, fit_rate, load_bound_csv,
    read_bound_csv, write_bound_csv, BoundViolationPoint, ComparisonReport, RateFit,
};
pub use series::{
    aggregate, load_series_csv, read_series_csv, save_series_csv, select_series, write_series_csv,
    AggregateSeries, Metric, MetricStats, SeriesAccumulator,
};

use crate::bounds::{
    closed_form_bound, compute_delta0, compute_n0, Divisor, ProblemConstants, RunPrefixStats,
    Theorem, TheoremBoundReport,
};
use crate::error::{Error, Result};
use crate::optimizer::{run, OptimizerConfig, RunKey, Trajectory};
use crate::problems::{
    estimate_constants, solve_optimum, OptimumCertificate, Problem, ProblemSpec,
};
use crate::schedules::{make_schedule, Schedule, ScheduleSpec, StepRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSchedule {
    pub name: String,
    #[serde(flatten)]
    pub spec: ScheduleSpec,
}

/// Closed-form bound to evaluate against every schedule's mean squared distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    #[serde(flatten)]
    pub theorem: Theorem,
    /// Indices to compare; every recorded index past the warm-up when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputOptions {
    /// Write every raw trajectory as CSV under `trajectories/`.
    #[serde(default)]
    pub persist_trajectories: bool,
}

fn default_tau() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub schedules: Vec<NamedSchedule>,
    pub seeds: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_tol")]
    pub certificate_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundCheck>,
    #[serde(default)]
    pub output: OutputOptions,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds < 1 {
            return Err(Error::param("seeds", "need at least one seed"));
        }
        if self.schedules.is_empty() {
            return Err(Error::param("schedules", "need at least one schedule"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.schedules {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::param(
                    "schedules",
                    format!("duplicate name `{}`", s.name),
                ));
            }
            if s.name.is_empty() || s.name.contains(['/', '\\', ',', '\n']) {
                return Err(Error::param(
                    "schedules",
                    format!("unusable name `{}`", s.name),
                ));
            }
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; the machine's parallelism when absent. Results never depend on it.
    pub parallel: Option<usize>,
    /// Directory that relative data paths resolve against.
    pub base_dir: Option<PathBuf>,
    /// Keep every raw trajectory in the result.
    pub keep_trajectories: bool,
}

/// Warm-up statistics maximized over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixSummary {
    pub n0: u64,
    pub divisor: Divisor,
    pub stats: RunPrefixStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub name: String,
    pub spec: ScheduleSpec,
    pub series: AggregateSeries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<PrefixSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<TheoremBoundReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    /// Why no bound was evaluated, when one was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_error: Option<String>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub certificate: OptimumCertificate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ProblemConstants>,
    pub schedules: Vec<ScheduleOutcome>,
}

impl ExperimentResult {
    pub fn series(&self) -> Vec<AggregateSeries> {
        self.schedules.iter().map(|s| s.series.clone()).collect()
    }

    pub fn outcome(&self, name: &str) -> Option<&ScheduleOutcome> {
        self.schedules.iter().find(|s| s.name == name)
    }

    /// Schedule with the smallest final mean of `metric`.
    pub fn best_final(&self, metric: Metric) -> Result<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for s in &self.schedules {
            let v = *s
                .series
                .mean(metric)?
                .last()
                .ok_or_else(|| Error::Unavailable {
                    what: format!("records for `{}`", s.name),
                })?;
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((&s.name, v));
            }
        }
        best.ok_or_else(|| Error::param("schedules", "need at least one schedule"))
    }
}

const SEED_CHUNK: u64 = 32;

/// Runs every schedule for seeds `0..R` and reduces in ascending seed order.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    config.validate()?;
    let problem = config.problem.build(opts.base_dir.as_deref())?;
    let cert = solve_optimum(&problem, config.certificate_tol)?;
    let constants = estimate_constants(&problem, Some(&cert), config.tau).ok();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.parallel {
        if n < 1 {
            return Err(Error::param("parallel", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Unavailable {
        what: format!("worker pool: {e}"),
    })?;
    let mut outcomes = Vec::with_capacity(config.schedules.len());
    for named in &config.schedules {
        let schedule = make_schedule(named.spec.clone())?;
        outcomes.push(run_schedule(
            config,
            opts,
            &pool,
            &problem,
            &cert,
            constants.as_ref(),
            named,
            &schedule,
        )?);
    }
    Ok(ExperimentResult {
        certificate: cert,
        constants,
        schedules: outcomes,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_schedule(
    config: &ExperimentConfig,
    opts: &RunOptions,
    pool: &rayon::ThreadPool,
    problem: &Problem,
    cert: &OptimumCertificate,
    constants: Option<&ProblemConstants>,
    named: &NamedSchedule,
    schedule: &Schedule,
) -> Result<ScheduleOutcome> {
    let divisor = config
        .bound
        .as_ref()
        .map_or(Divisor::Two, |b| b.theorem.warmup_divisor());
    let n0 = constants.and_then(|c| compute_n0(schedule, c, schedule.horizon(), divisor).ok());
    let mut acc = SeriesAccumulator::new(&named.name);
    let mut prefix: Option<RunPrefixStats> = None;
    let mut kept = Vec::new();
    let mut lo = 0;
    while lo < config.seeds {
        let hi = (lo + SEED_CHUNK).min(config.seeds);
        let chunk: Vec<Result<Trajectory>> = pool.install(|| {
            (lo..hi)
                .into_par_iter()
                .map(|r| {
                    run(
                        problem,
                        schedule,
                        &config.optimizer,
                        cert,
                        RunKey::new(config.master_seed, r),
                    )
                })
                .collect()
        });
        for (r, tr) in (lo..hi).zip(chunk) {
            let tr = tr.map_err(|e| Error::Experiment {
                schedule: named.name.clone(),
                seed: r,
                source: Box::new(e),
            })?;
            acc.push(&tr)?;
            if let Some(n0) = n0 {
                let p = tr.prefix_stats(n0);
                prefix = Some(match prefix {
                    None => p,
                    Some(q) => RunPrefixStats {
                        dist0: q.dist0.max(p.dist0),
                        f_prefix_max: q.f_prefix_max.max(p.f_prefix_max),
                    },
                });
            }
            if opts.keep_trajectories || config.output.persist_trajectories {
                kept.push(tr);
            }
        }
        lo = hi;
    }
    let series = acc.finish();
    let prefix = n0
        .zip(prefix)
        .map(|(n0, stats)| PrefixSummary { n0, divisor, stats });
    let fit = default_window(&series)
        .and_then(|w| fit_rate(&series, Metric::SqDist, w))
        .ok();
    let mut outcome = ScheduleOutcome {
        name: named.name.clone(),
        spec: named.spec.clone(),
        series,
        prefix,
        fit,
        bound: None,
        comparison: None,
        bound_error: None,
        trajectories: kept,
    };
    if let Some(check) = &config.bound {
        match evaluate_bound(check, schedule, constants, &outcome) {
            Ok((report, cmp)) => {
                outcome.bound = Some(report);
                outcome.comparison = Some(cmp);
            }
            Err(e) => outcome.bound_error = Some(e.to_string()),
        }
    }
    Ok(outcome)
}

fn evaluate_bound(
    check: &BoundCheck,
    schedule: &Schedule,
    constants: Option<&ProblemConstants>,
    outcome: &ScheduleOutcome,
) -> Result<(TheoremBoundReport, ComparisonReport)> {
    let constants = constants.ok_or(Error::MissingCertificate("problem constants"))?;
    let prefix = outcome.prefix.as_ref().ok_or_else(|| Error::Unavailable {
        what: "a warm-up length below the schedule horizon".into(),
    })?;
    let mut terms = compute_delta0(schedule, prefix.n0, &prefix.stats, constants)?;
    terms.divisor = Some(prefix.divisor);
    let horizons = match &check.horizons {
        Some(h) => h.clone(),
        None => outcome
            .series
            .t
            .iter()
            .copied()
            .filter(|&t| t > prefix.n0)
            .collect(),
    };
    let metric = match check.theorem {
        Theorem::WeightedAverage { .. } => Metric::AvgFGap,
        _ => Metric::SqDist,
    };
    let report = closed_form_bound(&check.theorem, constants, &terms, &horizons)?;
    let cmp = compare_bound(&outcome.series, metric, &report.curve)?;
    Ok((report, cmp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

pub fn export_series(series: &[AggregateSeries], format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::Csv => save_series_csv(series, path),
        ExportFormat::Json => write_json(series, path),
    }
}

pub fn import_series_json(path: &Path) -> Result<Vec<AggregateSeries>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `series.csv`, `series.json`, `summary.json` and, when configured, one CSV per
/// raw trajectory under `trajectories/<schedule>/seed_<r>.csv`.
pub fn write_outputs(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let series = result.series();
    export_series(&series, ExportFormat::Csv, &dir.join("series.csv"))?;
    export_series(&series, ExportFormat::Json, &dir.join("series.json"))?;
    write_json(result, &dir.join("summary.json"))?;
    if config.output.persist_trajectories {
        for s in &result.schedules {
            let sub = dir.join("trajectories").join(&s.name);
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            for (r, tr) in s.trajectories.iter().enumerate() {
                tr.save_csv(&sub.join(format!("seed_{r}.csv")))?;
            }
        }
    }
    Ok(())
}

/// Parses `10,100,1000` or `10,100,...,1e6`. A `...` continues the ratio of the two
/// preceding entries up to the entry after it. Integers may use `1e6` notation.
pub fn parse_horizons(text: &str) -> Result<Vec<u64>> {
    let bad = |tok: &str| Error::param("horizons", format!("cannot read `{tok}`"));
    let parse_one = |tok: &str| -> Result<u64> {
        let v: f64 = tok.parse().map_err(|_| bad(tok))?;
        if v >= 1.0 && v.fract() == 0.0 && v < 2f64.powi(63) {
            Ok(v as u64)
        } else {
            Err(bad(tok))
        }
    };
    let tokens: Vec<&str> = text.split(',').map(str::trim).collect();
    let mut out: Vec<u64> = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        let tok = tokens[k];
        if tok == "..." {
            let (a, b) = match out.as_slice() {
                [.., a, b] => (*a, *b),
                _ => {
                    return Err(Error::param(
                        "horizons",
                        "`...` needs two entries before it",
                    ))
                }
            };
            let end = tokens
                .get(k + 1)
                .ok_or_else(|| Error::param("horizons", "`...` needs an entry after it"))?;
            let end = parse_one(end)?;
            if b <= a || end <= b {
                return Err(Error::param("horizons", "`...` needs increasing entries"));
            }
            let ratio = b as f64 / a as f64;
            let mut next = (b as f64 * ratio).round() as u64;
            while next < end {
                out.push(next);
                next = (next as f64 * ratio).round() as u64;
            }
            out.push(end);
            k += 2;
            continue;
        }
        out.push(parse_one(tok)?);
        k += 1;
    }
    if out.is_empty() || out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "horizons",
            "must be nonempty and strictly increasing",
        ));
    }
    Ok(out)
}

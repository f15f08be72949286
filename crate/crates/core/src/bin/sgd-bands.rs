use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sgd_bands::bands::{audit_band, BandSpec};
use sgd_bands::bounds::{
    closed_form_bound, delta_terms, ProblemConstants, RunPrefixStats, Theorem,
};
use sgd_bands::harness::{
    compare_bound, fit_rate, load_bound_csv, load_series_csv, parse_horizons, run_experiment,
    select_series, write_bound_csv, write_json, write_outputs, ExperimentConfig, Metric,
    RunOptions,
};
use sgd_bands::schedules::{make_schedule, ScheduleSpec, StepRule};
use sgd_bands::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sgd-bands",
    version,
    about = "Banded SGD step sizes, bounds and experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a schedule as `t,eta` rows.
    Schedule {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a schedule against a band.
    Audit {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        band: PathBuf,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a closed-form error bound.
    Bound {
        /// `thm1`..`thm9`, `cor1`, or a bare number.
        #[arg(long)]
        theorem: String,
        #[arg(long)]
        schedule: PathBuf,
        /// JSON with `mu`, `l_f`, `sigma2`, `tau`, `dist0` and optionally `f_prefix_max`.
        #[arg(long)]
        constants: PathBuf,
        /// e.g. `10,100,...,1e6`.
        #[arg(long)]
        horizons: String,
        /// Theorem parameters as a JSON object or `@file`; the schedule's declared band
        /// supplies `m` and `M` when omitted.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Intermediate constants; defaults to the output path with a `.json` extension.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a multi-seed experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Fit a log-log slope to an aggregated series.
    Fit {
        #[arg(long)]
        series: PathBuf,
        /// `t_lo,t_hi`
        #[arg(long)]
        window: String,
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, default_value = "sq_dist")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare an aggregated series with a bound curve.
    Compare {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        bound: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, default_value = "sq_dist")]
        metric: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundInputs {
    #[serde(flatten)]
    constants: ProblemConstants,
    dist0: f64,
    #[serde(default)]
    f_prefix_max: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_json(value, p),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn theorem_params(
    raw: Option<&str>,
    band: Option<&BandSpec>,
    id: &str,
) -> Result<serde_json::Value> {
    match raw {
        Some(s) if s.starts_with('@') => read_json(Path::new(&s[1..])),
        Some(s) => Ok(serde_json::from_str(s)?),
        None => {
            let band = band.ok_or_else(|| {
                Error::param("params", "schedule declares no band; pass --params")
            })?;
            let mut v = serde_json::json!({"m": band.m, "M": band.big_m});
            if matches!(
                id.trim().to_ascii_lowercase().as_str(),
                "thm2" | "2" | "weighted_average"
            ) {
                v["t0"] = serde_json::json!(0);
            }
            Ok(v)
        }
    }
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Schedule { spec, emit, out } => {
            let spec: ScheduleSpec = read_json(&spec)?;
            let sched = make_schedule(spec.clone())?;
            let mut w = output(out.as_deref())?;
            let written = (|| -> std::io::Result<()> {
                match emit {
                    Emit::Csv => {
                        writeln!(w, "t,eta")?;
                        for t in 1..=sched.horizon() {
                            writeln!(w, "{t},{:?}", sched.eta(t))?;
                        }
                    }
                    Emit::Json => writeln!(w, "{}", serde_json::to_string_pretty(&spec)?)?,
                }
                w.flush()
            })();
            match written {
                // a reader such as `head` closing early is not a failure
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(Error::io("<output>", e))
                }
                _ => {}
            }
        }
        Cmd::Audit {
            schedule,
            band,
            horizon,
            report,
        } => {
            let sched = make_schedule(read_json(&schedule)?)?;
            let band: BandSpec = read_json(&band)?;
            let rep = audit_band(&sched, &band, horizon)?;
            eprintln!(
                "{}: {} violations, m_hat = {:e} at t = {}, M_hat = {:e} at t = {}",
                if rep.holds { "holds" } else { "violated" },
                rep.violation_count,
                rep.m_hat,
                rep.m_hat_at,
                rep.big_m_hat,
                rep.big_m_hat_at
            );
            print_json(&rep, report.as_deref())?;
        }
        Cmd::Bound {
            theorem,
            schedule,
            constants,
            horizons,
            params,
            out,
            report,
        } => {
            let sched = make_schedule(read_json(&schedule)?)?;
            let inputs: BoundInputs = read_json(&constants)?;
            let th = Theorem::from_id(
                &theorem,
                theorem_params(params.as_deref(), sched.declared_band(), &theorem)?,
            )?;
            let horizons = parse_horizons(&horizons)?;
            let prefix = RunPrefixStats {
                dist0: inputs.dist0,
                f_prefix_max: inputs.f_prefix_max,
            };
            let terms = delta_terms(
                &sched,
                &inputs.constants,
                &prefix,
                sched.horizon(),
                th.warmup_divisor(),
            )?;
            let rep = closed_form_bound(&th, &inputs.constants, &terms, &horizons)?;
            write_bound_csv(&rep.curve, output(Some(&out))?)?;
            let report = report.unwrap_or_else(|| out.with_extension("json"));
            write_json(&rep, &report)?;
        }
        Cmd::Run {
            config,
            out,
            parallel,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions {
                parallel,
                base_dir: config.parent().map(Path::to_path_buf),
                keep_trajectories: false,
            };
            let res = run_experiment(&cfg, &opts)?;
            write_outputs(&res, &cfg, &out)?;
            for s in &res.schedules {
                match &s.fit {
                    Some(f) => eprintln!(
                        "{}: slope {:.4} on [{}, {}], R^2 {:.4}",
                        s.name, f.slope, f.t_lo, f.t_hi, f.r_squared
                    ),
                    None => eprintln!("{}: no rate fit", s.name),
                }
            }
        }
        Cmd::Fit {
            series,
            window,
            schedule,
            metric,
            out,
        } => {
            let all = load_series_csv(&series)?;
            let s = select_series(&all, schedule.as_deref())?;
            let (lo, hi) = window
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| Error::param("window", "expected `t_lo,t_hi`"))?;
            let fit = fit_rate(s, Metric::parse(&metric)?, (lo, hi))?;
            print_json(&fit, out.as_deref())?;
        }
        Cmd::Compare {
            series,
            bound,
            report,
            schedule,
            metric,
        } => {
            let all = load_series_csv(&series)?;
            let s = select_series(&all, schedule.as_deref())?;
            let curve = load_bound_csv(&bound)?;
            let rep = compare_bound(s, Metric::parse(&metric)?, &curve)?;
            eprintln!(
                "dominance {:.4}, max ratio {:.4} at t = {}",
                rep.dominance, rep.max_ratio, rep.max_ratio_at
            );
            write_json(&rep, &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

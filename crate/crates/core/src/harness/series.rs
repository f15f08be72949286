use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{fmt_f64, Trajectory};

/// Quantity tracked per index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    SqDist,
    FGap,
    AvgSqDist,
    AvgFGap,
    TestAccuracy,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::SqDist,
        Metric::FGap,
        Metric::AvgSqDist,
        Metric::AvgFGap,
        Metric::TestAccuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SqDist => "sq_dist",
            Metric::FGap => "f_gap",
            Metric::AvgSqDist => "avg_sq_dist",
            Metric::AvgFGap => "avg_f_gap",
            Metric::TestAccuracy => "test_accuracy",
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param("metric", format!("unknown metric `{s}`")))
    }

    fn column(self, tr: &Trajectory) -> Option<&[f64]> {
        match self {
            Metric::SqDist => Some(&tr.sq_dist),
            Metric::FGap => Some(&tr.f_gap),
            Metric::AvgSqDist => tr.avg_sq_dist.as_deref(),
            Metric::AvgFGap => tr.avg_f_gap.as_deref(),
            Metric::TestAccuracy => tr.test_accuracy.as_deref(),
        }
    }
}

/// Mean and standard error of the mean across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub schedule: String,
    pub t: Vec<u64>,
    pub n_seeds: u64,
    pub metrics: BTreeMap<Metric, MetricStats>,
}

impl AggregateSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn stats(&self, metric: Metric) -> Result<&MetricStats> {
        self.metrics.get(&metric).ok_or_else(|| Error::Unavailable {
            what: format!("metric {} in series `{}`", metric.name(), self.schedule),
        })
    }

    pub fn mean(&self, metric: Metric) -> Result<&[f64]> {
        Ok(&self.stats(metric)?.mean)
    }

    /// A single-seed series with the given means.
    pub fn from_means(schedule: &str, t: Vec<u64>, metric: Metric, mean: Vec<f64>) -> Self {
        let stderr = vec![0.0; mean.len()];
        Self {
            schedule: schedule.to_string(),
            t,
            n_seeds: 1,
            metrics: BTreeMap::from([(metric, MetricStats { mean, stderr })]),
        }
    }
}

/// Welford accumulation over trajectories, fed in seed order.
#[derive(Debug, Clone)]
pub struct SeriesAccumulator {
    schedule: String,
    t: Vec<u64>,
    n: u64,
    cols: BTreeMap<Metric, (Vec<f64>, Vec<f64>)>,
}

impl SeriesAccumulator {
    pub fn new(schedule: &str) -> Self {
        Self {
            schedule: schedule.to_string(),
            t: Vec::new(),
            n: 0,
            cols: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, tr: &Trajectory) -> Result<()> {
        if self.n == 0 {
            self.t = tr.t.clone();
            for m in Metric::ALL {
                if m.column(tr).is_some() {
                    self.cols
                        .insert(m, (vec![0.0; tr.len()], vec![0.0; tr.len()]));
                }
            }
        } else if tr.t != self.t {
            return Err(Error::GridMismatch(format!(
                "trajectory indices differ within schedule `{}`",
                self.schedule
            )));
        }
        self.n += 1;
        let n = self.n as f64;
        for (m, (mean, m2)) in self.cols.iter_mut() {
            let col = m.column(tr).ok_or_else(|| {
                Error::GridMismatch(format!("trajectory lacks column {}", m.name()))
            })?;
            for ((mu, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(col) {
                let d = x - *mu;
                *mu += d / n;
                *s += d * (x - *mu);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> AggregateSeries {
        let n = self.n as f64;
        let metrics = self
            .cols
            .into_iter()
            .map(|(m, (mean, m2))| {
                let stderr = m2
                    .iter()
                    .map(|&s| {
                        if self.n < 2 {
                            0.0
                        } else {
                            (s.max(0.0) / (n - 1.0) / n).sqrt()
                        }
                    })
                    .collect();
                (m, MetricStats { mean, stderr })
            })
            .collect();
        AggregateSeries {
            schedule: self.schedule,
            t: self.t,
            n_seeds: self.n,
            metrics,
        }
    }
}

/// Mean and standard error over a plain slice.
pub fn aggregate(schedule: &str, trajectories: &[Trajectory]) -> Result<AggregateSeries> {
    let mut acc = SeriesAccumulator::new(schedule);
    for tr in trajectories {
        acc.push(tr)?;
    }
    Ok(acc.finish())
}

const BASE_COLUMNS: [&str; 7] = [
    "schedule",
    "t",
    "mean_sq_dist",
    "stderr_sq_dist",
    "mean_f_gap",
    "stderr_f_gap",
    "n_seeds",
];

const OPTIONAL: [Metric; 3] = [Metric::AvgSqDist, Metric::AvgFGap, Metric::TestAccuracy];

/// One row per `(schedule, t)`. Optional metrics add `mean_*`/`stderr_*` columns after
/// the fixed ones when any series carries them.
pub fn write_series_csv<W: Write>(series: &[AggregateSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let extras: Vec<Metric> = OPTIONAL
        .into_iter()
        .filter(|m| series.iter().any(|s| s.metrics.contains_key(m)))
        .collect();
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for m in &extras {
        header.push(format!("mean_{}", m.name()));
        header.push(format!("stderr_{}", m.name()));
    }
    w.write_record(&header)?;
    for s in series {
        let get = |m: Metric, k: usize| -> (String, String) {
            match s.metrics.get(&m) {
                Some(st) => (fmt_f64(st.mean[k]), fmt_f64(st.stderr[k])),
                None => (String::new(), String::new()),
            }
        };
        for k in 0..s.len() {
            let (ms, ss) = get(Metric::SqDist, k);
            let (mf, sf) = get(Metric::FGap, k);
            let mut row = vec![s.schedule.clone(), s.t[k].to_string(), ms, ss, mf, sf];
            row.push(s.n_seeds.to_string());
            for &m in &extras {
                let (a, b) = get(m, k);
                row.push(a);
                row.push(b);
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(Path::new("<series>"), e))?;
    Ok(())
}

pub fn save_series_csv(series: &[AggregateSeries], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_series_csv(series, std::io::BufWriter::new(f))
}

/// Reads the CSV layout written by [`write_series_csv`]; schedules keep file order.
pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<AggregateSeries>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| {
        col(name).ok_or_else(|| Error::Parse {
            line: 1,
            reason: format!("missing column `{name}`"),
        })
    };
    let (c_sched, c_t, c_n) = (need("schedule")?, need("t")?, need("n_seeds")?);
    let metric_cols: Vec<(Metric, usize, usize)> = Metric::ALL
        .into_iter()
        .filter_map(|m| {
            Some((
                m,
                col(&format!("mean_{}", m.name()))?,
                col(&format!("stderr_{}", m.name()))?,
            ))
        })
        .collect();
    let mut out: Vec<AggregateSeries> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let bad = |what: &str| Error::Parse {
            line,
            reason: format!("bad {what}"),
        };
        let name = rec.get(c_sched).ok_or_else(|| bad("schedule"))?;
        let t: u64 = rec
            .get(c_t)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("t"))?;
        let n: u64 = rec
            .get(c_n)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("n_seeds"))?;
        if out.last().map(|s| s.schedule.as_str()) != Some(name) {
            if out.iter().any(|s| s.schedule == name) {
                return Err(Error::Parse {
                    line,
                    reason: format!("rows of schedule `{name}` are not contiguous"),
                });
            }
            out.push(AggregateSeries {
                schedule: name.to_string(),
                t: Vec::new(),
                n_seeds: n,
                metrics: BTreeMap::new(),
            });
        }
        let s = out.last_mut().unwrap();
        if s.t.last().is_some_and(|&prev| t <= prev) {
            return Err(bad("t (indices must increase)"));
        }
        if n != s.n_seeds {
            return Err(bad("n_seeds (must be constant within a schedule)"));
        }
        s.t.push(t);
        for &(m, cm, cs) in &metric_cols {
            let (mv, sv) = (rec.get(cm).unwrap_or(""), rec.get(cs).unwrap_or(""));
            if mv.is_empty() {
                continue;
            }
            let mean: f64 = mv.parse().map_err(|_| bad(&format!("mean_{}", m.name())))?;
            let se: f64 = sv
                .parse()
                .map_err(|_| bad(&format!("stderr_{}", m.name())))?;
            let st = s.metrics.entry(m).or_default();
            st.mean.push(mean);
            st.stderr.push(se);
        }
    }
    for s in &out {
        if let Some((m, _)) = s.metrics.iter().find(|(_, st)| st.mean.len() != s.t.len()) {
            return Err(Error::Parse {
                line: 0,
                reason: format!("column {} is partly empty in `{}`", m.name(), s.schedule),
            });
        }
    }
    Ok(out)
}

pub fn load_series_csv(path: &Path) -> Result<Vec<AggregateSeries>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_csv(std::io::BufReader::new(f))
}

/// Picks the series named `name`, or the only one when `name` is absent.
pub fn select_series<'a>(
    series: &'a [AggregateSeries],
    name: Option<&str>,
) -> Result<&'a AggregateSeries> {
    match name {
        Some(n) => series
            .iter()
            .find(|s| s.schedule == n)
            .ok_or_else(|| Error::param("schedule", format!("no series named `{n}`"))),
        None if series.len() == 1 => Ok(&series[0]),
        None => Err(Error::param(
            "schedule",
            format!("{} series present; name one", series.len()),
        )),
    }
}

//! SGD, Epoch-SGD, heavy-ball momentum and averaged iterates.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::RunPrefixStats;
use crate::error::{Error, Result};
use crate::problems::{sq_dist, OptimumCertificate, Problem, SampleScratch};
use crate::schedules::StepRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    #[default]
    Sgd,
    /// `v <- beta v + g`, `x <- x - eta v`.
    Momentum { beta: f64 },
    /// Plain SGD that also tracks the uniform average of its iterates.
    AveragedSgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// One step size per outer loop, held across its inner steps.
    PerEpoch,
    #[default]
    PerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    PerEpoch,
    #[default]
    PerIteration,
}

/// Weights `(t + t0)^power` over the iterates `x_1, ..., x_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Averaging {
    #[serde(default)]
    pub t0: u64,
    #[serde(default = "one_u32")]
    pub power: u32,
}

fn one_u32() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "one_usize")]
    pub batch_size: usize,
    pub outer_loops: u64,
    #[serde(default = "one_u64")]
    pub inner_loops: u64,
    #[serde(default)]
    pub step_mode: StepMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<Averaging>,
    #[serde(default)]
    pub record: RecordMode,
    /// Starting point; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_init: Option<Vec<f64>>,
}

impl OptimizerConfig {
    /// Plain per-iteration SGD for `steps` steps.
    pub fn sgd(steps: u64) -> Self {
        Self {
            method: Method::Sgd,
            batch_size: 1,
            outer_loops: steps,
            inner_loops: 1,
            step_mode: StepMode::PerIteration,
            averaging: None,
            record: RecordMode::PerIteration,
            x_init: None,
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.outer_loops.saturating_mul(self.inner_loops)
    }

    /// Number of step-size indices the schedule must cover.
    pub fn required_horizon(&self) -> u64 {
        match self.step_mode {
            StepMode::PerEpoch => self.outer_loops,
            StepMode::PerIteration => self.total_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Method::Momentum { beta } = self.method {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::param("beta", "must lie in [0, 1)"));
            }
        }
        if self.batch_size < 1 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if self.outer_loops < 1 {
            return Err(Error::param("outer_loops", "must be at least 1"));
        }
        if self.inner_loops < 1 {
            return Err(Error::param("inner_loops", "must be at least 1"));
        }
        if let Some(a) = self.averaging {
            if a.power < 1 {
                return Err(Error::param("power", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Identifies one run: the master seed of an experiment and the run's index in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunKey {
    pub master: u64,
    pub run: u64,
}

impl RunKey {
    pub fn new(master: u64, run: u64) -> Self {
        Self { master, run }
    }

    /// Generator for inner step `i` of outer loop `t`. The stream depends only on the
    /// four coordinates, never on what ran before.
    pub fn step_rng(&self, t: u64, i: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.run.to_le_bytes());
        key[16..24].copy_from_slice(b"sgdbands");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(t);
        rng.set_word_pos((i as u128) << 40);
        rng
    }
}

/// Running weighted mean that never stores the iterate history.
#[derive(Debug, Clone)]
pub struct WeightedAverager {
    t0: u64,
    power: u32,
    count: u64,
    weight_sum: f64,
    mean: Vec<f64>,
}

impl WeightedAverager {
    /// `power = 0` gives the uniform average.
    pub fn new(dim: usize, t0: u64, power: u32) -> Self {
        Self {
            t0,
            power,
            count: 0,
            weight_sum: 0.0,
            mean: vec![0.0; dim],
        }
    }

    pub fn uniform(dim: usize) -> Self {
        Self::new(dim, 0, 0)
    }

    pub fn weight(&self, t: u64) -> f64 {
        ((t + self.t0) as f64).powi(self.power as i32)
    }

    /// Adds the next iterate; its index is one past the previous one.
    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let w = self.weight(self.count);
        self.weight_sum += w;
        let r = w / self.weight_sum;
        for (m, v) in self.mean.iter_mut().zip(x) {
            *m += r * (v - *m);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn mean(&self) -> Option<&[f64]> {
        (self.count > 0).then_some(self.mean.as_slice())
    }
}

/// Normalized weights `(t + t0)^power / sum` for `t = 1..=horizon`.
pub fn average_weights(t0: u64, power: u32, horizon: u64) -> Vec<f64> {
    let avg = WeightedAverager::new(0, t0, power);
    let raw: Vec<f64> = (1..=horizon).map(|t| avg.weight(t)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Weighted average of a nonempty iterate stream with weights `(t + t0)^power`.
pub fn weighted_average<'a, I>(iterates: I, t0: u64, power: u32) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut it = iterates.into_iter().peekable();
    let dim = it
        .peek()
        .map(|x| x.len())
        .ok_or_else(|| Error::param("iterates", "stream is empty"))?;
    let mut avg = WeightedAverager::new(dim, t0, power);
    for x in it {
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: x.len(),
            });
        }
        avg.push(x);
    }
    Ok(avg.mean.clone())
}

/// Columns recorded by one run. Entry `k` describes the iterate after the `t[k]`-th
/// recorded step; the averaged columns describe the average of the iterates before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<u64>,
    pub sq_dist: Vec<f64>,
    pub f_gap: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_sq_dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_f_gap: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<Vec<f64>>,
    pub final_iterate: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_iterate: Option<Vec<f64>>,
    /// `|x_1 - x*|^2`
    pub dist0: f64,
    /// `f(x_1) - f*`
    pub f_gap0: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `dist0` and the largest `f(x_t) - f*` over `t <= n0`, with `x_1` the start point
    /// and `x_{t+1}` the iterate recorded at index `t`.
    pub fn prefix_stats(&self, n0: u64) -> RunPrefixStats {
        let mut f_max = self.f_gap0;
        for (&t, &f) in self.t.iter().zip(&self.f_gap) {
            if t + 1 > n0 {
                break;
            }
            f_max = f_max.max(f);
        }
        RunPrefixStats {
            dist0: self.dist0,
            f_prefix_max: f_max.max(0.0),
        }
    }

    /// CSV with columns `t,sq_dist,f_gap,eta` and any optional columns that were recorded.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t", "sq_dist", "f_gap", "eta"];
        let optional = [
            ("avg_sq_dist", &self.avg_sq_dist),
            ("avg_f_gap", &self.avg_f_gap),
            ("test_accuracy", &self.test_accuracy),
        ];
        for (name, col) in &optional {
            if col.is_some() {
                header.push(name);
            }
        }
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![
                self.t[k].to_string(),
                fmt_f64(self.sq_dist[k]),
                fmt_f64(self.f_gap[k]),
                fmt_f64(self.eta[k]),
            ];
            for (_, col) in &optional {
                if let Some(c) = col {
                    row.push(fmt_f64(c[k]));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()
            .map_err(|e| Error::io(Path::new("<trajectory>"), e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Shortest decimal that round-trips.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

const DIVERGENCE_FACTOR: f64 = 1e12;

/// Runs the configured method on `problem`. The step size of outer loop `t` (per-epoch)
/// or global step `k` (per-iteration) is `rule.eta(..)`, both 1-based.
pub fn run<R: StepRule + ?Sized>(
    problem: &Problem,
    rule: &R,
    config: &OptimizerConfig,
    cert: &OptimumCertificate,
    key: RunKey,
) -> Result<Trajectory> {
    config.validate()?;
    let d = problem.dim();
    if cert.x_star.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: cert.x_star.len(),
        });
    }
    if let Some(n) = problem.n() {
        if config.batch_size > n {
            return Err(Error::param(
                "batch_size",
                format!("exceeds the {n} samples"),
            ));
        }
    }
    if rule.horizon() < config.required_horizon() {
        return Err(Error::param(
            "horizon",
            format!(
                "schedule covers {} steps but the run needs {}",
                rule.horizon(),
                config.required_horizon()
            ),
        ));
    }
    let mut x = match &config.x_init {
        Some(x0) if x0.len() != d => {
            return Err(Error::Dimension {
                expected: d,
                got: x0.len(),
            })
        }
        Some(x0) => x0.clone(),
        None => vec![0.0; d],
    };
    let x_star = &cert.x_star;
    let dist0 = sq_dist(&x, x_star);
    let f_gap0 = problem.gap_unchecked(&x, cert);
    let limit = DIVERGENCE_FACTOR * (1.0 + dist0);

    let mut averager = match (config.averaging, config.method) {
        (Some(a), _) => Some(WeightedAverager::new(d, a.t0, a.power)),
        (None, Method::AveragedSgd) => Some(WeightedAverager::uniform(d)),
        (None, _) => None,
    };
    let beta = match config.method {
        Method::Momentum { beta } => Some(beta),
        _ => None,
    };
    let has_test = problem.test_accuracy(&x).is_some();

    let n_records = match config.record {
        RecordMode::PerEpoch => config.outer_loops,
        RecordMode::PerIteration => config.total_steps(),
    } as usize;
    let mut traj = Trajectory {
        t: Vec::with_capacity(n_records),
        sq_dist: Vec::with_capacity(n_records),
        f_gap: Vec::with_capacity(n_records),
        eta: Vec::with_capacity(n_records),
        avg_sq_dist: averager.as_ref().map(|_| Vec::with_capacity(n_records)),
        avg_f_gap: averager.as_ref().map(|_| Vec::with_capacity(n_records)),
        test_accuracy: has_test.then(|| Vec::with_capacity(n_records)),
        final_iterate: Vec::new(),
        average_iterate: None,
        dist0,
        f_gap0,
    };

    let mut g = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut scratch = SampleScratch::default();
    let m = config.inner_loops;
    for t in 1..=config.outer_loops {
        let mut eta = 0.0;
        for i in 1..=m {
            let k = (t - 1) * m + i;
            eta = match config.step_mode {
                StepMode::PerEpoch => rule.eta(t),
                StepMode::PerIteration => rule.eta(k),
            };
            if let Some(a) = averager.as_mut() {
                a.push(&x);
            }
            let mut rng = key.step_rng(t, i);
            problem.sample_gradient_unchecked(
                &x,
                &mut rng,
                config.batch_size,
                &mut scratch,
                &mut g,
            );
            match beta {
                Some(b) => {
                    for ((xj, vj), gj) in x.iter_mut().zip(v.iter_mut()).zip(&g) {
                        *vj = b * *vj + gj;
                        *xj -= eta * *vj;
                    }
                }
                None => {
                    for (xj, gj) in x.iter_mut().zip(&g) {
                        *xj -= eta * gj;
                    }
                }
            }
            let norm2: f64 = x.iter().map(|a| a * a).sum();
            if !(norm2 <= limit) {
                return Err(Error::Divergence {
                    t: k,
                    norm: norm2.sqrt(),
                });
            }
            if config.record == RecordMode::PerIteration {
                record(&mut traj, problem, cert, &x, averager.as_ref(), k, eta);
            }
        }
        if config.record == RecordMode::PerEpoch {
            record(&mut traj, problem, cert, &x, averager.as_ref(), t, eta);
        }
    }
    traj.average_iterate = averager.and_then(|a| a.mean().map(<[f64]>::to_vec));
    traj.final_iterate = x;
    Ok(traj)
}

fn record(
    traj: &mut Trajectory,
    problem: &Problem,
    cert: &OptimumCertificate,
    x: &[f64],
    averager: Option<&WeightedAverager>,
    t: u64,
    eta: f64,
) {
    traj.t.push(t);
    traj.sq_dist.push(sq_dist(x, &cert.x_star));
    traj.f_gap.push(problem.gap_unchecked(x, cert));
    traj.eta.push(eta);
    if let (Some(avg), Some(ds), Some(fs)) = (
        averager.and_then(WeightedAverager::mean),
        traj.avg_sq_dist.as_mut(),
        traj.avg_f_gap.as_mut(),
    ) {
        ds.push(sq_dist(avg, &cert.x_star));
        fs.push(problem.gap_unchecked(avg, cert));
    }
    if let Some(acc) = traj.test_accuracy.as_mut() {
        acc.push(problem.test_accuracy(x).unwrap_or(f64::NAN));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{solve_optimum, QuadraticProblem};
    use crate::schedules::FnRule;

    fn scalar(noise: f64) -> (Problem, OptimumCertificate) {
        let p = Problem::Quadratic(QuadraticProblem {
            x_star: vec![0.0],
            noise,
        });
        let c = solve_optimum(&p, 1e-10).unwrap();
        (p, c)
    }

    #[test]
    fn noiseless_three_steps() {
        let (p, c) = scalar(0.0);
        let mut cfg = OptimizerConfig::sgd(3);
        cfg.x_init = Some(vec![1.0]);
        let tr = run(&p, &FnRule::new(3, |_| 0.5), &cfg, &c, RunKey::new(0, 0)).unwrap();
        assert_eq!(tr.sq_dist, vec![0.25, 0.0625, 0.015625]);
        assert_eq!(tr.t, vec![1, 2, 3]);
    }

    #[test]
    fn zero_step_keeps_start() {
        let (p, c) = scalar(1.0);
        let mut cfg = OptimizerConfig::sgd(5);
        cfg.x_init = Some(vec![2.0]);
        let tr = run(&p, &FnRule::new(5, |_| 0.0), &cfg, &c, RunKey::new(1, 2)).unwrap();
        assert!(tr.sq_dist.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn weighted_average_examples() {
        let xs: [&[f64]; 3] = [&[1.0], &[2.0], &[3.0]];
        let a = weighted_average(xs, 1, 1).unwrap();
        assert!((a[0] - 20.0 / 9.0).abs() < 1e-15);
        let xs: [&[f64]; 2] = [&[1.0], &[0.0]];
        assert!((weighted_average(xs, 0, 2).unwrap()[0] - 0.2).abs() < 1e-15);
        assert!(weighted_average(std::iter::empty::<&[f64]>(), 0, 1).is_err());
    }

    #[test]
    fn horizon_and_batch_checks() {
        let (p, c) = scalar(1.0);
        let cfg = OptimizerConfig::sgd(10);
        assert!(run(&p, &FnRule::new(9, |_| 0.1), &cfg, &c, RunKey::new(0, 0)).is_err());
        let mut bad = cfg.clone();
        bad.method = Method::Momentum { beta: 1.0 };
        assert!(run(&p, &FnRule::new(10, |_| 0.1), &bad, &c, RunKey::new(0, 0)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (p, c) = scalar(0.0);
        let mut cfg = OptimizerConfig::sgd(200);
        cfg.x_init = Some(vec![1.0]);
        match run(&p, &FnRule::new(200, |_| 3.0), &cfg, &c, RunKey::new(0, 0)) {
            Err(Error::Divergence { t, .. }) => assert!(t > 1 && t < 200),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prefix_stats_window() {
        let (p, c) = scalar(0.0);
        let mut cfg = OptimizerConfig::sgd(4);
        cfg.x_init = Some(vec![1.0]);
        let tr = run(&p, &FnRule::new(4, |_| 1.5), &cfg, &c, RunKey::new(0, 0)).unwrap();
        // x alternates sign with |x| halving: gaps 0.5, 0.125, ...
        assert_eq!(tr.prefix_stats(0).f_prefix_max, 0.5);
        assert_eq!(tr.prefix_stats(3).f_prefix_max, 0.5);
        assert_eq!(tr.prefix_stats(3).dist0, 1.0);
    }

    #[test]
    fn csv_layout() {
        let (p, c) = scalar(0.0);
        let mut cfg = OptimizerConfig::sgd(2);
        cfg.x_init = Some(vec![1.0]);
        let tr = run(&p, &FnRule::new(2, |_| 0.5), &cfg, &c, RunKey::new(0, 0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,sq_dist,f_gap,eta\n1,0.25,0.125,0.5\n2,0.0625,0.03125,0.5\n"
        );
    }
}

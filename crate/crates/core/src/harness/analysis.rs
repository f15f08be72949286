use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::series::{AggregateSeries, Metric};
use crate::bounds::BoundCurve;
use crate::error::{Error, Result};
use crate::optimizer::fmt_f64;

/// Least-squares line through `(ln t, ln mean)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub schedule: String,
    pub metric: Metric,
    pub t_lo: u64,
    pub t_hi: u64,
    pub n_points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// The last two decades `[T/100, T]` of the recorded indices.
pub fn default_window(series: &AggregateSeries) -> Result<(u64, u64)> {
    let t_hi = *series
        .t
        .last()
        .ok_or_else(|| Error::Fit("series is empty".into()))?;
    Ok(((t_hi / 100).max(1), t_hi))
}

pub fn fit_rate(series: &AggregateSeries, metric: Metric, window: (u64, u64)) -> Result<RateFit> {
    let (t_lo, t_hi) = window;
    if t_lo >= t_hi {
        return Err(Error::Fit(format!("window [{t_lo}, {t_hi}] is empty")));
    }
    let (first, last) = match (series.t.first(), series.t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Fit("series is empty".into())),
    };
    if t_lo < first || t_hi > last {
        return Err(Error::Fit(format!(
            "window [{t_lo}, {t_hi}] leaves the recorded range [{first}, {last}]"
        )));
    }
    let mean = series.mean(metric)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &y) in series.t.iter().zip(mean) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Fit(format!("mean {y} at t = {t} is not positive")));
        }
        xs.push((t as f64).ln());
        ys.push(y.ln());
    }
    if xs.len() < 2 {
        return Err(Error::Fit("fewer than two points in the window".into()));
    }
    // shift by the first point so a flat series has exactly zero deviations
    let (x0, y0) = (xs[0], ys[0]);
    for (x, y) in xs.iter_mut().zip(ys.iter_mut()) {
        *x -= x0;
        *y -= y0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let shifted_intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - shifted_intercept - slope * x).powi(2))
        .sum();
    let intercept = y0 + shifted_intercept - slope * x0;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        schedule: series.schedule.clone(),
        metric,
        t_lo,
        t_hi,
        n_points: xs.len(),
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolationPoint {
    pub t: u64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schedule: String,
    pub metric: Metric,
    pub n_points: usize,
    /// Share of indices with `mean <= bound`.
    pub dominance: f64,
    pub max_ratio: f64,
    pub max_ratio_at: u64,
    pub violation_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<BoundViolationPoint>,
}

fn ratio(mean: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        mean / bound
    } else if mean <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Compares the series mean with `bound` on the bound's indices, which must all be
/// recorded in the series. No interpolation.
pub fn compare_bound(
    series: &AggregateSeries,
    metric: Metric,
    bound: &BoundCurve,
) -> Result<ComparisonReport> {
    let stats = series.stats(metric)?;
    if bound.points.is_empty() {
        return Err(Error::GridMismatch("bound curve is empty".into()));
    }
    let mut k = 0usize;
    let mut report = ComparisonReport {
        schedule: series.schedule.clone(),
        metric,
        n_points: bound.points.len(),
        dominance: 0.0,
        max_ratio: f64::NEG_INFINITY,
        max_ratio_at: 0,
        violation_count: 0,
        first_violation: None,
    };
    for &(t, b) in &bound.points {
        while k < series.t.len() && series.t[k] < t {
            k += 1;
        }
        if k == series.t.len() || series.t[k] != t {
            return Err(Error::GridMismatch(format!(
                "bound index {t} is not recorded in series `{}`",
                series.schedule
            )));
        }
        let (mean, se) = (stats.mean[k], stats.stderr[k]);
        let r = ratio(mean, b);
        if r > report.max_ratio {
            report.max_ratio = r;
            report.max_ratio_at = t;
        }
        if mean <= b {
            report.dominance += 1.0;
        } else {
            report.violation_count += 1;
            if report.first_violation.is_none() {
                report.first_violation = Some(BoundViolationPoint {
                    t,
                    mean,
                    stderr: se,
                    bound: b,
                });
            }
        }
    }
    report.dominance /= bound.points.len() as f64;
    Ok(report)
}

/// Like [`compare_bound`], but first requires the bound grid to equal the series indices
/// inside `[t_lo, t_hi]` exactly.
pub fn compare_bound_on_window(
    series: &AggregateSeries,
    metric: Metric,
    bound: &BoundCurve,
    window: (u64, u64),
) -> Result<ComparisonReport> {
    let expected: Vec<u64> = series
        .t
        .iter()
        .copied()
        .filter(|&t| t >= window.0 && t <= window.1)
        .collect();
    if bound.horizons() != expected {
        return Err(Error::GridMismatch(format!(
            "bound grid ({} points) differs from the {} series indices in [{}, {}]",
            bound.points.len(),
            expected.len(),
            window.0,
            window.1
        )));
    }
    compare_bound(series, metric, bound)
}

/// Rows `T,bound`.
pub fn write_bound_csv<W: Write>(curve: &BoundCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "bound"])?;
    for &(t, b) in &curve.points {
        w.write_record([t.to_string(), fmt_f64(b)])?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<bound>"), e))?;
    Ok(())
}

pub fn read_bound_csv<R: Read>(input: R) -> Result<BoundCurve> {
    let mut r = csv::Reader::from_reader(input);
    let mut points: Vec<(u64, f64)> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse {
            line: k + 2,
            reason: "expected `T,bound`".into(),
        };
        let t: u64 = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let b: f64 = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if points.last().is_some_and(|&(p, _)| t <= p) {
            return Err(Error::Parse {
                line: k + 2,
                reason: "T must increase".into(),
            });
        }
        points.push((t, b));
    }
    Ok(BoundCurve { points })
}

pub fn load_bound_csv(path: &Path) -> Result<BoundCurve> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_bound_csv(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, ts: impl Iterator<Item = u64>) -> AggregateSeries {
        let t: Vec<u64> = ts.collect();
        let mean = t.iter().map(|&v| f(v as f64)).collect();
        AggregateSeries::from_means("s", t, Metric::SqDist, mean)
    }

    fn curve(f: impl Fn(f64) -> f64, ts: impl Iterator<Item = u64>) -> BoundCurve {
        BoundCurve {
            points: ts.map(|t| (t, f(t as f64))).collect(),
        }
    }

    #[test]
    fn fit_examples() {
        let s = series(|t| 1.0 / t, 1..=1000);
        let f = fit_rate(&s, Metric::SqDist, (1, 1000)).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let s = series(|_| 5.0, 1..=10);
        assert_eq!(fit_rate(&s, Metric::SqDist, (1, 10)).unwrap().slope, 0.0);
        let s = series(|t| t.powf(-0.25), 1000..=100_000);
        let f = fit_rate(&s, Metric::SqDist, (1000, 100_000)).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let s = series(|t| 1.0 - t / 5.0, 1..=10);
        assert!(matches!(
            fit_rate(&s, Metric::SqDist, (1, 10)),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            fit_rate(&s, Metric::SqDist, (3, 3)),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            fit_rate(&s, Metric::SqDist, (1, 11)),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn compare_examples() {
        let s = series(|t| 1.0 / t, 1..=50);
        let r = compare_bound(&s, Metric::SqDist, &curve(|t| 2.0 / t, 1..=50)).unwrap();
        assert_eq!((r.dominance, r.max_ratio), (1.0, 0.5));
        let r = compare_bound(&s, Metric::SqDist, &curve(|t| 1.0 / t, 1..=50)).unwrap();
        assert_eq!((r.dominance, r.max_ratio), (1.0, 1.0));
        let s2 = series(|t| 2.0 / t, 1..=50);
        let r = compare_bound(&s2, Metric::SqDist, &curve(|t| 1.0 / t, 1..=50)).unwrap();
        assert_eq!(r.dominance, 0.0);
        assert_eq!(r.first_violation.unwrap().t, 1);
        assert!(matches!(
            compare_bound(&s, Metric::SqDist, &curve(|t| t, 40..=60)),
            Err(Error::GridMismatch(_))
        ));
        assert!(
            compare_bound_on_window(&s, Metric::SqDist, &curve(|t| t, 5..=50), (5, 50)).is_ok()
        );
        assert!(
            compare_bound_on_window(&s, Metric::SqDist, &curve(|t| t, 6..=50), (5, 50)).is_err()
        );
    }

    #[test]
    fn bound_csv_round_trip() {
        let c = curve(|t| 1.0 / (3.0 * t), [1, 10, 1000].into_iter());
        let mut buf = Vec::new();
        write_bound_csv(&c, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("T,bound\n1,"));
        assert_eq!(read_bound_csv(buf.as_slice()).unwrap(), c);
    }
}

//! Boundary functions, band audits and the constants derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::StepRule;

/// A positive, non-increasing reference curve `delta(t)` for `t >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BoundaryFn {
    /// `t^-p`
    PowerLaw {
        p: f64,
    },
    Constant,
    /// `ln(t+1) / (t+1)`
    LogOverT,
    /// `1 / ((t+1) ln(t+1))`
    InverseTLog,
    /// `1 / ln(t+1)`
    InverseLog,
    /// `t^-r` up to `floor(c1 * horizon^p)`, then `1/t`.
    PiecewisePowerThenInverse {
        r: f64,
        p: f64,
        c1: f64,
        horizon: u64,
    },
    /// `1` up to `floor(c1 * horizon^p)`, then `1/t`.
    PiecewiseConstThenInverse {
        p: f64,
        c1: f64,
        horizon: u64,
    },
    /// Step function with `values[k]` on `[k+1, k+2)`; the last value extends to infinity.
    Tabulated {
        values: Vec<f64>,
    },
}

/// Where `t * delta(t)` goes as `t` grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailLimit {
    Zero,
    One,
    Infinity,
}

/// Symbolic verdicts for a built-in boundary family.
///
/// `h1`: `sum delta` diverges and `sum delta^2` converges.
/// `h2`: `sum delta` diverges, `sum delta^q` converges for some `q > 0`, `delta` decreases and
/// `1/delta(t) - 1/delta(t-1)` stays bounded.
/// `h3`: `sum delta` diverges, `delta -> 0` and `delta` is non-increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryClass {
    pub limit: TailLimit,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
}

impl BoundaryFn {
    pub fn validate(&self) -> Result<()> {
        let unit = |field, v: f64, lo_open: f64, hi: f64, hi_closed: bool| {
            let ok = v > lo_open && if hi_closed { v <= hi } else { v < hi };
            if ok {
                Ok(())
            } else {
                Err(Error::param(field, format!("{v} out of range")))
            }
        };
        match self {
            BoundaryFn::PowerLaw { p } => unit("p", *p, 0.0, 1.0, true),
            BoundaryFn::PiecewisePowerThenInverse { r, p, c1, horizon } => {
                unit("r", *r, 0.0, 1.0, true)?;
                unit("p", *p, 0.0, 1.0, false)?;
                check_switch(*c1, *horizon)
            }
            BoundaryFn::PiecewiseConstThenInverse { p, c1, horizon } => {
                unit("p", *p, 0.0, 1.0, false)?;
                check_switch(*c1, *horizon)
            }
            BoundaryFn::Tabulated { values } => {
                if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    Err(Error::param(
                        "values",
                        "need at least one positive finite value",
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// `floor(c1 * T^p)` for the piecewise families.
    pub fn switch_point(&self) -> Option<u64> {
        match self {
            BoundaryFn::PiecewisePowerThenInverse { p, c1, horizon, .. }
            | BoundaryFn::PiecewiseConstThenInverse { p, c1, horizon } => {
                Some((c1 * (*horizon as f64).powf(*p)).floor() as u64)
            }
            _ => None,
        }
    }

    /// Checked evaluation for `t >= 1`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.value(t))
    }

    /// Unchecked evaluation; callers guarantee `t >= 1`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            BoundaryFn::PowerLaw { p } => {
                if *p == 1.0 {
                    1.0 / t
                } else {
                    t.powf(-p)
                }
            }
            BoundaryFn::Constant => 1.0,
            BoundaryFn::LogOverT => (t + 1.0).ln() / (t + 1.0),
            BoundaryFn::InverseTLog => 1.0 / ((t + 1.0) * (t + 1.0).ln()),
            BoundaryFn::InverseLog => 1.0 / (t + 1.0).ln(),
            BoundaryFn::PiecewisePowerThenInverse { r, .. } => {
                if t <= self.switch_point().unwrap() as f64 {
                    t.powf(-r)
                } else {
                    1.0 / t
                }
            }
            BoundaryFn::PiecewiseConstThenInverse { .. } => {
                if t <= self.switch_point().unwrap() as f64 {
                    1.0
                } else {
                    1.0 / t
                }
            }
            BoundaryFn::Tabulated { values } => {
                let k = (t.floor() as usize).clamp(1, values.len());
                values[k - 1]
            }
        }
    }

    /// `ln delta(t)`, exact where the direct value would underflow.
    pub fn ln_value(&self, t: f64) -> f64 {
        match self {
            BoundaryFn::PowerLaw { p } => -p * t.ln(),
            _ => self.value(t).ln(),
        }
    }

    /// `integral_a^b delta(u) du`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        check_t(a)?;
        if a > b {
            return Err(Error::Range {
                what: "integration lower limit",
                value: a,
                range: format!("[1, {b}]"),
            });
        }
        Ok(self.integral_unchecked(a, b))
    }

    fn integral_unchecked(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            BoundaryFn::PowerLaw { p } => power_integral(*p, a, b),
            BoundaryFn::Constant => b - a,
            BoundaryFn::LogOverT => {
                let (la, lb) = ((a + 1.0).ln(), (b + 1.0).ln());
                0.5 * (lb - la) * (lb + la)
            }
            BoundaryFn::InverseTLog => (b + 1.0).ln().ln() - (a + 1.0).ln().ln(),
            BoundaryFn::InverseLog => {
                // substitute u = ln(x+1): integral of e^u / u
                let (ua, ub) = ((a + 1.0).ln(), (b + 1.0).ln());
                adaptive_simpson(&|u: f64| u.exp() / u, ua, ub, 1e-10)
            }
            BoundaryFn::PiecewisePowerThenInverse { r, .. } => {
                let k = self.switch_point().unwrap() as f64;
                split_integral(
                    a,
                    b,
                    k,
                    |x, y| power_integral(*r, x, y),
                    |x, y| (y / x).ln(),
                )
            }
            BoundaryFn::PiecewiseConstThenInverse { .. } => {
                let k = self.switch_point().unwrap() as f64;
                split_integral(a, b, k, |x, y| y - x, |x, y| (y / x).ln())
            }
            BoundaryFn::Tabulated { .. } => {
                let mut total = 0.0;
                let mut x = a;
                while x < b {
                    let next = (x.floor() + 1.0).min(b);
                    total += self.value(x) * (next - x);
                    x = next;
                }
                total
            }
        }
    }

    /// `-d delta / dt` on the smooth piece containing `t`.
    pub fn neg_derivative(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.neg_derivative_unchecked(t))
    }

    fn neg_derivative_unchecked(&self, t: f64) -> f64 {
        let d = self.value(t);
        match self {
            BoundaryFn::Tabulated { .. } => 0.0,
            _ => self.decay_ratio_unchecked(t) * d * d,
        }
    }

    /// `(-d delta / dt) / delta^2`.
    fn decay_ratio_unchecked(&self, t: f64) -> f64 {
        match self {
            BoundaryFn::PowerLaw { p } => p * t.powf(p - 1.0),
            BoundaryFn::Constant => 0.0,
            BoundaryFn::LogOverT => {
                let y = (t + 1.0).ln();
                (y - 1.0) / (y * y)
            }
            BoundaryFn::InverseTLog => (t + 1.0).ln() + 1.0,
            BoundaryFn::InverseLog => 1.0 / (t + 1.0),
            BoundaryFn::PiecewisePowerThenInverse { r, .. } => {
                if t <= self.switch_point().unwrap() as f64 {
                    r * t.powf(r - 1.0)
                } else {
                    1.0
                }
            }
            BoundaryFn::PiecewiseConstThenInverse { .. } => {
                if t <= self.switch_point().unwrap() as f64 {
                    0.0
                } else {
                    1.0
                }
            }
            BoundaryFn::Tabulated { .. } => 0.0,
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if t >= 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Range {
            what: "t",
            value: t,
            range: "[1, inf)".into(),
        })
    }
}

fn check_switch(c1: f64, horizon: u64) -> Result<()> {
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(Error::param("c1", format!("must be positive, got {c1}")));
    }
    if horizon == 0 {
        return Err(Error::param("horizon", "must be >= 1"));
    }
    Ok(())
}

fn power_integral(p: f64, a: f64, b: f64) -> f64 {
    if p == 1.0 {
        (b / a).ln()
    } else {
        let q = 1.0 - p;
        (b.powf(q) - a.powf(q)) / q
    }
}

fn split_integral(
    a: f64,
    b: f64,
    k: f64,
    head: impl Fn(f64, f64) -> f64,
    tail: impl Fn(f64, f64) -> f64,
) -> f64 {
    if b <= k {
        head(a, b)
    } else if a >= k {
        tail(a, b)
    } else {
        head(a, k) + tail(k, b)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let rough = simpson(fa, fm, fb, b - a);
    let tol = rtol * rough.abs().max(f64::MIN_POSITIVE);
    recurse(f, a, b, fa, fm, fb, rough, tol, 48)
}

/// Symbolic classification of a built-in family.
pub fn classify_boundary(delta: &BoundaryFn) -> Result<BoundaryClass> {
    let class = |limit, h1, h2| BoundaryClass {
        limit,
        h1,
        h2,
        h3: true,
    };
    let constant = BoundaryClass {
        limit: TailLimit::Infinity,
        h1: false,
        h2: false,
        h3: false,
    };
    Ok(match delta {
        BoundaryFn::PowerLaw { p } => {
            let limit = if *p == 1.0 {
                TailLimit::One
            } else {
                TailLimit::Infinity
            };
            class(limit, *p > 0.5, true)
        }
        BoundaryFn::Constant => constant,
        BoundaryFn::LogOverT => class(TailLimit::Infinity, true, true),
        BoundaryFn::InverseTLog => class(TailLimit::Zero, true, false),
        BoundaryFn::InverseLog => class(TailLimit::Infinity, false, false),
        BoundaryFn::PiecewisePowerThenInverse { .. }
        | BoundaryFn::PiecewiseConstThenInverse { .. } => class(TailLimit::One, true, true),
        BoundaryFn::Tabulated { .. } => {
            return Err(Error::Unavailable {
                what: "boundary classification".into(),
            })
        }
    })
}

/// `sup_{t in [t_m, horizon]} (-delta'(t)) / delta(t)^2` over integers, plus interior
/// maximizers where the ratio is not monotone.
pub fn estimate_c1(delta: &BoundaryFn, t_m: u64, horizon: u64) -> Result<f64> {
    if let BoundaryFn::Tabulated { .. } = delta {
        return Err(Error::Unavailable {
            what: "c1 estimation".into(),
        });
    }
    if t_m < 1 || t_m > horizon {
        return Err(Error::Range {
            what: "T_M",
            value: t_m as f64,
            range: format!("[1, {horizon}]"),
        });
    }
    let mut best = f64::NEG_INFINITY;
    for t in t_m..=horizon {
        best = best.max(delta.decay_ratio_unchecked(t as f64));
    }
    if let BoundaryFn::LogOverT = delta {
        // (y - 1)/y^2 peaks at y = ln(t+1) = 2
        let peak = std::f64::consts::E.powi(2) - 1.0;
        if peak >= t_m as f64 && peak <= horizon as f64 {
            best = best.max(delta.decay_ratio_unchecked(peak));
        }
    }
    Ok(best)
}

/// The smallest `T_M` whose tail ratio supremum is at most `limit`, with that supremum.
pub fn smallest_t_m(delta: &BoundaryFn, limit: f64, horizon: u64) -> Result<Option<(u64, f64)>> {
    if let BoundaryFn::Tabulated { .. } = delta {
        return Err(Error::Unavailable {
            what: "c1 estimation".into(),
        });
    }
    let ratios: Vec<f64> = (1..=horizon)
        .map(|t| delta.decay_ratio_unchecked(t as f64))
        .collect();
    let mut suffix = vec![f64::NEG_INFINITY; ratios.len() + 1];
    for i in (0..ratios.len()).rev() {
        suffix[i] = suffix[i + 1].max(ratios[i]);
    }
    for (i, &s) in suffix[..ratios.len()].iter().enumerate() {
        if s <= limit {
            let t_m = i as u64 + 1;
            return Ok(Some((t_m, estimate_c1(delta, t_m, horizon)?)));
        }
    }
    Ok(None)
}

/// `m * lower(t) <= eta(t) <= M * upper(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub lower: BoundaryFn,
    pub upper: BoundaryFn,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

impl BandSpec {
    pub fn inverse_time(m: f64, big_m: f64) -> Self {
        Self {
            lower: BoundaryFn::PowerLaw { p: 1.0 },
            upper: BoundaryFn::PowerLaw { p: 1.0 },
            m,
            big_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::param(
                "m",
                format!("must be positive, got {}", self.m),
            ));
        }
        if !(self.big_m >= self.m && self.big_m.is_finite()) {
            return Err(Error::param(
                "M",
                format!("must satisfy m <= M, got {}", self.big_m),
            ));
        }
        self.lower.validate()?;
        self.upper.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandViolation {
    pub t: u64,
    pub eta: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandAuditReport {
    pub holds: bool,
    /// First violations, at most [`MAX_LISTED_VIOLATIONS`].
    pub violations: Vec<BandViolation>,
    pub violation_count: u64,
    pub m_hat: f64,
    #[serde(rename = "M_hat")]
    pub big_m_hat: f64,
    pub ln_m_hat: f64,
    #[serde(rename = "ln_M_hat")]
    pub ln_big_m_hat: f64,
    pub m_hat_at: u64,
    #[serde(rename = "M_hat_at")]
    pub big_m_hat_at: u64,
    pub horizon: u64,
}

pub const MAX_LISTED_VIOLATIONS: usize = 1000;

const AUDIT_RTOL: f64 = 1e-12;

/// Exhaustive check of the band over `t = 1..=horizon`.
pub fn audit_band<R: StepRule + ?Sized>(
    rule: &R,
    band: &BandSpec,
    horizon: u64,
) -> Result<BandAuditReport> {
    band.validate()?;
    check_horizon(rule, horizon)?;
    let (ln_m, ln_big_m) = (band.m.ln(), band.big_m.ln());
    let mut report = BandAuditReport {
        holds: true,
        violations: Vec::new(),
        violation_count: 0,
        m_hat: 0.0,
        big_m_hat: 0.0,
        ln_m_hat: f64::INFINITY,
        ln_big_m_hat: f64::NEG_INFINITY,
        m_hat_at: 1,
        big_m_hat_at: 1,
        horizon,
    };
    for t in 1..=horizon {
        let tf = t as f64;
        let ln_eta = rule.ln_eta(t);
        let lo = ln_eta - band.lower.ln_value(tf);
        let hi = ln_eta - band.upper.ln_value(tf);
        if lo < report.ln_m_hat {
            report.ln_m_hat = lo;
            report.m_hat_at = t;
        }
        if hi > report.ln_big_m_hat {
            report.ln_big_m_hat = hi;
            report.big_m_hat_at = t;
        }
        // a relative tolerance on the ratio is an absolute one in log space
        if lo < ln_m - AUDIT_RTOL || hi > ln_big_m + AUDIT_RTOL {
            report.violation_count += 1;
            if report.violations.len() < MAX_LISTED_VIOLATIONS {
                report.violations.push(BandViolation {
                    t,
                    eta: ln_eta.exp(),
                    lower: band.m * band.lower.value(tf),
                    upper: band.big_m * band.upper.value(tf),
                });
            }
        }
    }
    report.holds = report.violation_count == 0;
    report.m_hat = report.ln_m_hat.exp();
    report.big_m_hat = report.ln_big_m_hat.exp();
    Ok(report)
}

fn check_horizon<R: StepRule + ?Sized>(rule: &R, horizon: u64) -> Result<()> {
    if horizon < 1 || horizon > rule.horizon() {
        return Err(Error::Range {
            what: "horizon",
            value: horizon as f64,
            range: format!("[1, {}]", rule.horizon()),
        });
    }
    Ok(())
}

/// How the lower band constant evolves as the audited horizon grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerConstantTrend {
    pub horizons: Vec<u64>,
    pub ln_m_hat: Vec<f64>,
    /// `m_hat(last) / m_hat(first)`, possibly zero after underflow; see `ln_ratio`.
    pub ratio: f64,
    pub ln_ratio: f64,
    /// The lower constant keeps falling, so no fixed `m > 0` covers every horizon.
    pub shrinking: bool,
}

/// Running `m_hat` against `lower` sampled at each horizon (ascending).
pub fn lower_constant_trend<R: StepRule + ?Sized>(
    rule: &R,
    lower: &BoundaryFn,
    horizons: &[u64],
) -> Result<LowerConstantTrend> {
    if horizons.len() < 2 || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "horizons",
            "need at least two increasing horizons",
        ));
    }
    check_horizon(rule, *horizons.last().unwrap())?;
    let mut out = Vec::with_capacity(horizons.len());
    let mut running = f64::INFINITY;
    let mut next = 0;
    for t in 1..=*horizons.last().unwrap() {
        running = running.min(rule.ln_eta(t) - lower.ln_value(t as f64));
        if t == horizons[next] {
            out.push(running);
            next += 1;
        }
    }
    let ln_ratio = out.last().unwrap() - out[0];
    Ok(LowerConstantTrend {
        horizons: horizons.to_vec(),
        ratio: ln_ratio.exp(),
        ln_ratio,
        shrinking: ln_ratio < 0.0,
        ln_m_hat: out,
    })
}

/// Largest `C` with `sum_{t=t*}^T eta(t) >= C ln((T+1)/t*)` for every `t*` in `[1, T]`.
pub fn estimate_a1_constant<R: StepRule + ?Sized>(rule: &R, horizon: u64) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::param("T", "must be >= 2"));
    }
    check_horizon(rule, horizon)?;
    let end = (horizon + 1) as f64;
    let mut suffix = 0.0;
    let mut best = f64::INFINITY;
    for t in (1..=horizon).rev() {
        suffix += rule.eta(t);
        let c = suffix / (end / t as f64).ln();
        best = best.min(c);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{make_schedule, FnRule, ScheduleFamily, ScheduleSpec};
    use std::f64::consts::{E, LN_2};

    fn close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * b.abs().max(1e-300)
    }

    #[test]
    fn boundary_values() {
        assert_eq!(BoundaryFn::PowerLaw { p: 1.0 }.eval(10.0).unwrap(), 0.1);
        assert!(close(
            BoundaryFn::LogOverT.eval(E - 1.0).unwrap(),
            1.0 / E,
            1e-15
        ));
        assert!(close(
            BoundaryFn::InverseTLog.eval(1.0).unwrap(),
            0.721_347_520_444_481_7,
            1e-15
        ));
        assert!(matches!(
            BoundaryFn::InverseLog.eval(0.5),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn boundary_integrals() {
        let b = E * E - 1.0;
        assert!(close(
            BoundaryFn::PowerLaw { p: 1.0 }.integral(1.0, 10.0).unwrap(),
            10f64.ln(),
            1e-15
        ));
        assert!(close(
            BoundaryFn::InverseTLog.integral(1.0, b).unwrap(),
            LN_2 - LN_2.ln(),
            1e-14
        ));
        assert!(close(
            BoundaryFn::LogOverT.integral(1.0, b).unwrap(),
            0.5 * (4.0 - LN_2 * LN_2),
            1e-14
        ));
        assert!(BoundaryFn::Constant.integral(3.0, 2.0).is_err());
    }

    #[test]
    fn inverse_log_quadrature_matches_fine_simpson() {
        let f = |x: f64| 1.0 / (x + 1.0).ln();
        let (a, b) = (1.0, 1000.0);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        let reference = s * h / 3.0;
        let got = BoundaryFn::InverseLog.integral(a, b).unwrap();
        assert!(close(got, reference, 1e-10), "{got} vs {reference}");
    }

    #[test]
    fn classification_verdicts() {
        let c = classify_boundary(&BoundaryFn::InverseTLog).unwrap();
        assert_eq!(
            c,
            BoundaryClass {
                limit: TailLimit::Zero,
                h1: true,
                h2: false,
                h3: true
            }
        );
        let c = classify_boundary(&BoundaryFn::PowerLaw { p: 0.5 }).unwrap();
        assert_eq!(c.limit, TailLimit::Infinity);
        assert!(!c.h1 && c.h2 && c.h3);
        let c = classify_boundary(&BoundaryFn::InverseLog).unwrap();
        assert_eq!(c.limit, TailLimit::Infinity);
        assert!(c.h3);
        assert_eq!(
            classify_boundary(&BoundaryFn::PowerLaw { p: 1.0 })
                .unwrap()
                .limit,
            TailLimit::One
        );
        assert!(classify_boundary(&BoundaryFn::Tabulated { values: vec![1.0] }).is_err());
    }

    #[test]
    fn c1_estimates() {
        let half = BoundaryFn::PowerLaw { p: 0.5 };
        assert!(close(estimate_c1(&half, 4, 1000).unwrap(), 0.25, 1e-15));
        assert_eq!(
            estimate_c1(&BoundaryFn::PowerLaw { p: 1.0 }, 7, 100).unwrap(),
            1.0
        );
        // finite-difference cross-check of the closed-form derivative
        let d = BoundaryFn::InverseLog;
        let h = 1e-6;
        let t = 10.0;
        let fd = -(d.value(t + h) - d.value(t - h)) / (2.0 * h);
        let ratio = fd / d.value(t).powi(2);
        let c1 = estimate_c1(&d, 10, 1000).unwrap();
        assert!(close(c1, ratio, 1e-6), "{c1} vs {ratio}");
        assert!(close(c1, 1.0 / 11.0, 1e-15));
        assert!(estimate_c1(&BoundaryFn::Tabulated { values: vec![1.0] }, 1, 2).is_err());
    }

    #[test]
    fn grow_exp_audit() {
        let s = make_schedule(ScheduleSpec::new(
            ScheduleFamily::GrowExp {
                eta0: 1.0,
                initial_period: 5,
            },
            100,
        ))
        .unwrap();
        let r = audit_band(&s, &BandSpec::inverse_time(1.0, 10.0), 100).unwrap();
        assert!(r.holds);
        assert!(close(r.m_hat, 1.0, 1e-15));
        assert_eq!(r.m_hat_at, 1);
        assert!(close(r.big_m_hat, 9.375, 1e-15));
        assert_eq!(r.big_m_hat_at, 75);
    }

    #[test]
    fn identity_band_audit() {
        let s = make_schedule(ScheduleSpec::new(
            ScheduleFamily::InverseTime {
                eta0: 2.5,
                shift: None,
            },
            500,
        ))
        .unwrap();
        let r = audit_band(&s, &BandSpec::inverse_time(2.5, 2.5), 500).unwrap();
        assert!(r.holds && r.violations.is_empty());
        assert!(close(r.m_hat, 2.5, 1e-14) && close(r.big_m_hat, 2.5, 1e-14));
    }

    #[test]
    fn failing_audit_lists_violations() {
        let s = make_schedule(ScheduleSpec::new(
            ScheduleFamily::FixExp {
                eta0: 1.0,
                period: 3,
                decay: 0.1,
            },
            100,
        ))
        .unwrap();
        let r = audit_band(&s, &BandSpec::inverse_time(1.0, 3.0), 100).unwrap();
        assert!(!r.holds);
        assert_eq!(r.violation_count as usize, r.violations.len());
        assert!(r.m_hat < 1.0);
    }

    #[test]
    fn fix_exp_lower_constant_shrinks() {
        let s = make_schedule(ScheduleSpec::new(
            ScheduleFamily::FixExp {
                eta0: 1.0,
                period: 3,
                decay: 0.1,
            },
            1000,
        ))
        .unwrap();
        let trend =
            lower_constant_trend(&s, &BoundaryFn::PowerLaw { p: 1.0 }, &[100, 1000]).unwrap();
        assert!(trend.shrinking);
        assert!(trend.ln_m_hat[1] < trend.ln_m_hat[0]);
    }

    #[test]
    fn a1_constant_examples() {
        let r = FnRule::new(100, |t| 2.0 / t as f64);
        let c = estimate_a1_constant(&r, 100).unwrap();
        assert!((2.0..2.05).contains(&c), "{c}");

        let c_const = 0.7;
        let r = FnRule::new(10, move |_| c_const);
        let brute = (1..=10)
            .map(|s| c_const * (11 - s) as f64 / (11.0 / s as f64).ln())
            .fold(f64::INFINITY, f64::min);
        assert!(close(estimate_a1_constant(&r, 10).unwrap(), brute, 1e-12));
        assert!(close(10.0 * c_const / 11f64.ln(), 4.17 * c_const, 1e-3));

        let r = FnRule::new(10, |_| 0.0);
        assert_eq!(estimate_a1_constant(&r, 10).unwrap(), 0.0);
        assert!(estimate_a1_constant(&r, 1).is_err());
    }
}

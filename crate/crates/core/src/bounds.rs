//! Error bounds for SGD with banded step sizes: the exact-sum decomposition, a tight
//! recursion, and closed-form bounds for each band shape.

use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::bands::{classify_boundary, estimate_c1, smallest_t_m, BoundaryFn, TailLimit};
use crate::error::{Error, Result};
use crate::schedules::StepRule;

/// Strong convexity `mu`, expected smoothness `l_f`, gradient noise at the optimum `sigma2`,
/// and the balance constant `tau` in `[1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub mu: f64,
    pub l_f: f64,
    pub sigma2: f64,
    pub tau: f64,
}

impl ProblemConstants {
    pub fn new(mu: f64, l_f: f64, sigma2: f64, tau: f64) -> Result<Self> {
        let c = Self {
            mu,
            l_f,
            sigma2,
            tau,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param(
                "mu",
                format!("must be positive, got {}", self.mu),
            ));
        }
        if !(self.l_f >= self.mu && self.l_f.is_finite()) {
            return Err(Error::param(
                "l_f",
                format!("must be finite and >= mu, got {}", self.l_f),
            ));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::param(
                "sigma2",
                format!("must be >= 0, got {}", self.sigma2),
            ));
        }
        if !(1.0..2.0).contains(&self.tau) {
            return Err(Error::param(
                "tau",
                format!("must lie in [1, 2), got {}", self.tau),
            ));
        }
        Ok(())
    }

    fn tau_mu(&self) -> f64 {
        self.tau * self.mu
    }
}

/// Which step-size threshold defines the warm-up length: `(2-tau)/(2 L_f)` for last-iterate
/// bounds, `(2-tau)/(4 L_f)` for the weighted-average bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    Two,
    Four,
}

impl Divisor {
    fn value(self) -> f64 {
        match self {
            Divisor::Two => 2.0,
            Divisor::Four => 4.0,
        }
    }
}

/// Run-dependent inputs: `|x_1 - x*|^2` and the largest `f(x_t) - f*` over the warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunPrefixStats {
    pub dist0: f64,
    pub f_prefix_max: f64,
}

/// Warm-up length and the initial-error term that every bound starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTerms {
    pub n0: u64,
    pub chi: f64,
    pub delta: f64,
    pub dist0: f64,
    pub f_prefix_max: f64,
    /// Threshold that produced `n0`, when known.
    pub divisor: Option<Divisor>,
}

/// Largest `t <= cap` with `eta(t) > (2 - tau) / (divisor * L_f)`, or 0 if there is none.
pub fn compute_n0<R: StepRule + ?Sized>(
    rule: &R,
    constants: &ProblemConstants,
    cap: u64,
    divisor: Divisor,
) -> Result<u64> {
    constants.validate()?;
    if cap < 1 || cap > rule.horizon() {
        return Err(Error::Range {
            what: "cap",
            value: cap as f64,
            range: format!("[1, {}]", rule.horizon()),
        });
    }
    let threshold = (2.0 - constants.tau) / (divisor.value() * constants.l_f);
    let at_cap = rule.eta(cap);
    if at_cap > threshold {
        return Err(Error::NExceedsCap {
            cap,
            eta: at_cap,
            threshold,
        });
    }
    Ok((1..cap)
        .rev()
        .find(|&t| rule.eta(t) > threshold)
        .unwrap_or(0))
}

/// `chi = max_{t <= n0} (4 L_f eta^2 - 2(2 - tau) eta)` and
/// `Delta = dist0 + n0 chi f exp(tau mu sum_{l <= n0} eta(l))`.
pub fn compute_delta0<R: StepRule + ?Sized>(
    rule: &R,
    n0: u64,
    prefix: &RunPrefixStats,
    constants: &ProblemConstants,
) -> Result<DeltaTerms> {
    constants.validate()?;
    check_prefix(prefix)?;
    if n0 > rule.horizon() {
        return Err(Error::Range {
            what: "n0",
            value: n0 as f64,
            range: format!("[0, {}]", rule.horizon()),
        });
    }
    let mut chi = 0.0f64;
    let mut sum = 0.0;
    for t in 1..=n0 {
        let eta = rule.eta(t);
        chi = chi.max(4.0 * constants.l_f * eta * eta - 2.0 * (2.0 - constants.tau) * eta);
        sum += eta;
    }
    let mut delta = prefix.dist0;
    if n0 > 0 && prefix.f_prefix_max > 0.0 && chi > 0.0 {
        delta += n0 as f64 * chi * prefix.f_prefix_max * (constants.tau_mu() * sum).exp();
    }
    if !delta.is_finite() {
        return Err(Error::NonFinite(format!("Delta overflowed (n0 = {n0})")));
    }
    Ok(DeltaTerms {
        n0,
        chi,
        delta,
        dist0: prefix.dist0,
        f_prefix_max: prefix.f_prefix_max,
        divisor: None,
    })
}

/// `compute_n0` followed by `compute_delta0`.
pub fn delta_terms<R: StepRule + ?Sized>(
    rule: &R,
    constants: &ProblemConstants,
    prefix: &RunPrefixStats,
    cap: u64,
    divisor: Divisor,
) -> Result<DeltaTerms> {
    let n0 = compute_n0(rule, constants, cap, divisor)?;
    let mut terms = compute_delta0(rule, n0, prefix, constants)?;
    terms.divisor = Some(divisor);
    Ok(terms)
}

fn check_prefix(prefix: &RunPrefixStats) -> Result<()> {
    if !(prefix.dist0 >= 0.0 && prefix.dist0.is_finite()) {
        return Err(Error::param("dist0", "must be finite and >= 0"));
    }
    if !(prefix.f_prefix_max >= 0.0 && prefix.f_prefix_max.is_finite()) {
        return Err(Error::param("f_prefix_max", "must be finite and >= 0"));
    }
    Ok(())
}

/// Bound values over a grid of horizons `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub points: Vec<(u64, f64)>,
}

impl BoundCurve {
    pub fn horizons(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn value_at(&self, t: u64) -> Option<f64> {
        self.points
            .binary_search_by_key(&t, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }
}

fn check_horizons(horizons: &[u64], limit: Option<u64>) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::param("horizons", "must not be empty"));
    }
    if horizons[0] < 1 || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "horizons",
            "must be strictly increasing and >= 1",
        ));
    }
    if let Some(limit) = limit {
        let last = *horizons.last().unwrap();
        if last > limit {
            return Err(Error::Range {
                what: "horizon",
                value: last as f64,
                range: format!("[1, {limit}]"),
            });
        }
    }
    Ok(())
}

/// `exp(-tau mu sum_{l<=T} eta) Delta + 2 sigma^2 sum_{l<=T} eta(l)^2 exp(-tau mu sum_{l<u<=T} eta(u))`.
///
/// Evaluated in one forward pass: the variance part obeys
/// `G_T = exp(-tau mu eta(T)) G_{T-1} + 2 sigma^2 eta(T)^2`, which sums positive terms only.
pub fn gamma_curve<R: StepRule + ?Sized>(
    rule: &R,
    constants: &ProblemConstants,
    delta: f64,
    horizons: &[u64],
) -> Result<BoundCurve> {
    constants.validate()?;
    check_horizons(horizons, Some(rule.horizon()))?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", "must be finite and >= 0"));
    }
    let tm = constants.tau_mu();
    let ln_delta = delta.ln();
    let mut cum = 0.0;
    let mut variance = 0.0;
    let mut points = Vec::with_capacity(horizons.len());
    let mut next = 0;
    for t in 1..=*horizons.last().unwrap() {
        let ln_eta = rule.ln_eta(t);
        let eta = ln_eta.exp();
        cum += eta;
        variance = (-tm * eta).exp() * variance + 2.0 * constants.sigma2 * (2.0 * ln_eta).exp();
        if t == horizons[next] {
            let bias = if delta == 0.0 {
                0.0
            } else {
                (ln_delta - tm * cum).exp()
            };
            points.push((t, bias + variance));
            next += 1;
        }
    }
    Ok(BoundCurve { points })
}

/// `R_{t+1} = max(0, 1 - tau mu eta) R_t + 2 sigma^2 eta^2 + [t <= n0] chi f`, `R_1 = dist0`;
/// the curve at `T` holds `R_{T+1}`.
pub fn recursion_curve<R: StepRule + ?Sized>(
    rule: &R,
    constants: &ProblemConstants,
    prefix: &RunPrefixStats,
    n0: u64,
    horizons: &[u64],
) -> Result<BoundCurve> {
    check_horizons(horizons, Some(rule.horizon()))?;
    let terms = compute_delta0(rule, n0, prefix, constants)?;
    let tm = constants.tau_mu();
    let mut r = prefix.dist0;
    let mut points = Vec::with_capacity(horizons.len());
    let mut next = 0;
    for t in 1..=*horizons.last().unwrap() {
        let eta = rule.eta(t);
        r = (1.0 - tm * eta).max(0.0) * r + 2.0 * constants.sigma2 * eta * eta;
        if t <= n0 {
            r += terms.chi * prefix.f_prefix_max;
        }
        if t == horizons[next] {
            points.push((t, r));
            next += 1;
        }
    }
    Ok(BoundCurve { points })
}

/// Band shape and coefficients selecting a closed-form bound.
///
/// `m`/`big_m` are the lower/upper coefficients; indices 1 and 2 refer to the part of the
/// horizon before and after the switch point `floor(c1 T^p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "snake_case")]
pub enum Theorem {
    /// `m/t <= eta <= M/t`, last iterate.
    InverseBand {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
    },
    /// Same band, simplified three-regime form.
    InverseBandSimplified {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
    },
    /// Same band, weighted average with weights `t + t0`.
    WeightedAverage {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        t0: u64,
    },
    /// Suffix sums at least `c ln((T+1)/t*)`, upper band `M/t`.
    SuffixSumLower {
        c: f64,
        #[serde(rename = "M")]
        big_m: f64,
    },
    /// Lower `m/t`; upper `M1/t^r` before the switch and `M2/t` after.
    PowerThenInverse {
        m: f64,
        #[serde(rename = "M1")]
        big_m1: f64,
        #[serde(rename = "M2")]
        big_m2: f64,
        r: f64,
        p: f64,
        c1: f64,
    },
    /// `[m1, M1]` before the switch and `[m2/t, M2/t]` after.
    ConstThenInverse {
        m1: f64,
        #[serde(rename = "M1")]
        big_m1: f64,
        m2: f64,
        #[serde(rename = "M2")]
        big_m2: f64,
        p: f64,
        c1: f64,
    },
    /// `m delta <= eta <= M delta` for a single boundary function.
    SameBoundary {
        boundary: BoundaryFn,
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_epsilon: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_m: Option<u64>,
    },
    /// `m/(t+1) <= eta <= M ln(t+1)/(t+1)`.
    LogUpper {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
    },
    /// `m/t <= eta <= M/t^alpha`.
    PowerUpper {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        alpha: f64,
    },
    /// `m/((t+1) ln(t+1)) <= eta <= M/t^alpha`.
    LogLower {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
}

const IDS: [(&str, &str); 10] = [
    ("thm1", "inverse_band"),
    ("cor1", "inverse_band_simplified"),
    ("thm2", "weighted_average"),
    ("thm3", "suffix_sum_lower"),
    ("thm4", "power_then_inverse"),
    ("thm5", "const_then_inverse"),
    ("thm6", "same_boundary"),
    ("thm7", "log_upper"),
    ("thm8", "power_upper"),
    ("thm9", "log_lower"),
];

impl Theorem {
    /// Threshold divisor for the warm-up length this theorem needs.
    pub fn warmup_divisor(&self) -> Divisor {
        match self {
            Theorem::WeightedAverage { .. } => Divisor::Four,
            _ => Divisor::Two,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Theorem::InverseBand { .. } => "thm1",
            Theorem::InverseBandSimplified { .. } => "cor1",
            Theorem::WeightedAverage { .. } => "thm2",
            Theorem::SuffixSumLower { .. } => "thm3",
            Theorem::PowerThenInverse { .. } => "thm4",
            Theorem::ConstThenInverse { .. } => "thm5",
            Theorem::SameBoundary { .. } => "thm6",
            Theorem::LogUpper { .. } => "thm7",
            Theorem::PowerUpper { .. } => "thm8",
            Theorem::LogLower { .. } => "thm9",
        }
    }

    /// Build from a short id (`thm1`, `1`, `cor1`, or the snake-case tag) and a JSON
    /// object of parameters.
    pub fn from_id(id: &str, params: serde_json::Value) -> Result<Theorem> {
        let key = id.trim().to_ascii_lowercase();
        let key = if key.chars().all(|c| c.is_ascii_digit()) {
            format!("thm{key}")
        } else {
            key
        };
        let tag = IDS
            .iter()
            .find(|(short, tag)| *short == key || *tag == key)
            .map(|(_, tag)| *tag)
            .ok_or_else(|| Error::param("theorem", format!("unknown theorem id `{id}`")))?;
        let mut obj = match params {
            serde_json::Value::Object(map) => map,
            serde_json::Value::Null => serde_json::Map::new(),
            _ => return Err(Error::param("params", "must be a JSON object")),
        };
        obj.insert("theorem".into(), serde_json::Value::String(tag.into()));
        Ok(serde_json::from_value(serde_json::Value::Object(obj))?)
    }
}

/// A closed-form bound with every constant that went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBoundReport {
    pub theorem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routed_to: Option<String>,
    /// Warm-up length (`n1` for the weighted-average bound).
    pub n0: u64,
    pub chi: f64,
    pub delta: f64,
    pub constants: BTreeMap<String, f64>,
    pub curve: BoundCurve,
}

struct Ctx<'a> {
    c: &'a ProblemConstants,
    terms: &'a DeltaTerms,
    consts: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn put(&mut self, k: &str, v: f64) {
        self.consts.insert(k.to_string(), v);
    }
}

fn require(theorem: &'static str, ok: bool, hypothesis: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::hypothesis(theorem, hypothesis()))
    }
}

fn require_band(theorem: &'static str, m: f64, big_m: f64) -> Result<()> {
    require(theorem, m > 0.0 && m.is_finite(), || {
        format!("m > 0 (got {m})")
    })?;
    require(theorem, big_m >= m && big_m.is_finite(), || {
        format!("m <= M (got m = {m}, M = {big_m})")
    })
}

fn is_one(a: f64) -> bool {
    (a - 1.0).abs() <= 1e-12
}

/// `((T+1)^(a-1) - 1)/(a-1)`, continuous through `a = 1`.
fn growth_ratio(a: f64, ln_t1: f64) -> f64 {
    let b = a - 1.0;
    if b == 0.0 {
        ln_t1
    } else {
        (b * ln_t1).exp_m1() / b
    }
}

/// Evaluate the closed-form bound of `theorem` at each horizon.
pub fn closed_form_bound(
    theorem: &Theorem,
    constants: &ProblemConstants,
    terms: &DeltaTerms,
    horizons: &[u64],
) -> Result<TheoremBoundReport> {
    constants.validate()?;
    check_horizons(horizons, None)?;
    let mut ctx = Ctx {
        c: constants,
        terms,
        consts: BTreeMap::new(),
    };
    let mut routed_to = None;
    let values = match theorem {
        Theorem::InverseBand { m, big_m } => inverse_band(&mut ctx, *m, *big_m, horizons)?,
        Theorem::InverseBandSimplified { m, big_m } => {
            inverse_band_simplified(&mut ctx, *m, *big_m, horizons)?
        }
        Theorem::WeightedAverage { m, big_m, t0 } => {
            weighted_average(&mut ctx, *m, *big_m, *t0, horizons)?
        }
        Theorem::SuffixSumLower { c, big_m } => suffix_sum_lower(&mut ctx, *c, *big_m, horizons)?,
        Theorem::PowerThenInverse {
            m,
            big_m1,
            big_m2,
            r,
            p,
            c1,
        } => power_then_inverse(&mut ctx, *m, *big_m1, *big_m2, *r, *p, *c1, horizons)?,
        Theorem::ConstThenInverse {
            m1,
            big_m1,
            m2,
            big_m2,
            p,
            c1,
        } => const_then_inverse(&mut ctx, [*m1, *big_m1, *m2, *big_m2], *p, *c1, horizons)?,
        Theorem::SameBoundary {
            boundary,
            m,
            big_m,
            epsilon,
            t_epsilon,
            t_m,
        } => {
            let (vals, routed) = same_boundary(
                &mut ctx, boundary, *m, *big_m, *epsilon, *t_epsilon, *t_m, horizons,
            )?;
            routed_to = routed;
            vals
        }
        Theorem::LogUpper { m, big_m } => log_upper(&mut ctx, *m, *big_m, horizons)?,
        Theorem::PowerUpper { m, big_m, alpha } => {
            power_upper(&mut ctx, *m, *big_m, *alpha, horizons)?
        }
        Theorem::LogLower {
            m,
            big_m,
            alpha,
            beta,
        } => log_lower(&mut ctx, *m, *big_m, *alpha, *beta, horizons)?,
    };
    for (k, v) in &ctx.consts {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("constant {k} = {v}")));
        }
    }
    let mut points = Vec::with_capacity(values.len());
    for (&t, v) in horizons.iter().zip(values) {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::NonFinite(format!("bound at T = {t} is {v}")));
        }
        points.push((t, v));
    }
    let n0 = ctx.consts.get("n1").map(|&n| n as u64).unwrap_or(terms.n0);
    Ok(TheoremBoundReport {
        theorem: theorem.id().to_string(),
        routed_to,
        n0,
        chi: terms.chi,
        delta: terms.delta,
        constants: ctx.consts,
        curve: BoundCurve { points },
    })
}

fn inverse_band(ctx: &mut Ctx, m: f64, big_m: f64, horizons: &[u64]) -> Result<Vec<f64>> {
    require_band("thm1", m, big_m)?;
    let a = ctx.c.tau_mu() * m;
    let s2 = ctx.c.sigma2;
    let eps1 = 2.0 * s2 * a.exp();
    ctx.put("tau_mu_m", a);
    ctx.put("epsilon1", eps1);
    let delta = ctx.terms.delta;
    Ok(horizons
        .iter()
        .map(|&t| {
            let t = t as f64;
            let l = (t + 1.0).ln();
            let bias = delta * (-a * l).exp();
            if is_one(a) {
                bias + 2.0 * s2 * E * big_m * big_m * (t.ln() + 1.0) / (t + 1.0)
            } else {
                // eps1 M^2/(a-1) ((T+1)^(a-1) + a - 2) / (T+1)^a
                bias + eps1 * big_m * big_m * (growth_ratio(a, l) + 1.0) * (-a * l).exp()
            }
        })
        .collect())
}

fn inverse_band_simplified(
    ctx: &mut Ctx,
    m: f64,
    big_m: f64,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    require_band("cor1", m, big_m)?;
    let a = ctx.c.tau_mu() * m;
    let s2 = ctx.c.sigma2;
    let eps1 = 2.0 * s2 * a.exp();
    ctx.put("tau_mu_m", a);
    ctx.put("epsilon1", eps1);
    let (delta, mm) = (ctx.terms.delta, big_m * big_m);
    Ok(horizons
        .iter()
        .map(|&t| {
            let t = t as f64;
            let scale = (-a * (t + 1.0).ln()).exp();
            if is_one(a) {
                let k = 2.0 * s2 * mm * E;
                (delta + k) / (t + 1.0) + k * t.ln() / (t + 1.0)
            } else if a < 1.0 {
                (delta + (2.0 - a) / (1.0 - a) * eps1 * mm) * scale
            } else {
                (delta + eps1 * mm) * scale + eps1 * mm / ((a - 1.0) * (t + 1.0))
            }
        })
        .collect())
}

fn weighted_average(
    ctx: &mut Ctx,
    m: f64,
    big_m: f64,
    t0: u64,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    require_band("thm2", m, big_m)?;
    require("thm2", ctx.terms.divisor != Some(Divisor::Two), || {
        "warm-up length must use the (2 - tau)/(4 L_f) threshold".into()
    })?;
    let c = ctx.c;
    let a = c.tau_mu() * m;
    require("thm2", a >= 1.0 - 1e-12, || {
        format!("tau mu m >= 1 (got {a})")
    })?;
    let n1 = ctx.terms.n0;
    require("thm2", horizons[0] > n1, || {
        format!(
            "T > n1 for every horizon (n1 = {n1}, smallest T = {})",
            horizons[0]
        )
    })?;
    let (n1f, t0f) = (n1 as f64, t0 as f64);
    let mm = big_m * big_m;
    let s2 = c.sigma2;
    let f = ctx.terms.f_prefix_max;
    let delta_n1 = ctx.terms.dist0 / (n1f + 1.0).powf(a) + 4.0 * s2 * mm + n1f * ctx.terms.chi * f;
    let ups1_raw = (n1f + t0f + 1.0) * (n1f + 1.0 - a);
    let ups1 = ups1_raw.max(0.0);
    let ups2 = (1.0 + t0f) * (n1f + t0f);
    let t_max = *horizons.last().unwrap() as f64;
    ctx.put("n1", n1f);
    ctx.put("tau_mu_m", a);
    ctx.put("delta_n1", delta_n1);
    ctx.put("upsilon1", ups1_raw);
    ctx.put("upsilon2", ups2);
    ctx.put(
        "s1_stated_at_max_horizon",
        t_max * (t_max + t0f) * (t0f + 1.0) / 2.0,
    );
    ctx.put("s1_weight_sum_at_max_horizon", weight_sum(t_max, t0f));
    let log_base = n1f.max(1.0);
    Ok(horizons
        .iter()
        .map(|&t| {
            let t = t as f64;
            let numer = ups1 * delta_n1
                + ups2 * (1.0 - c.tau / 2.0) * m * f
                + 2.0 * s2 * mm * (t - n1f + t0f * (t / log_base).ln());
            numer / ((2.0 - c.tau) * m * weight_sum(t, t0f))
        })
        .collect())
}

/// `sum_{t=1}^T (t + t0)`.
fn weight_sum(t: f64, t0: f64) -> f64 {
    t * (t + 1.0) / 2.0 + t0 * t
}

fn suffix_sum_lower(ctx: &mut Ctx, c: f64, big_m: f64, horizons: &[u64]) -> Result<Vec<f64>> {
    let tm = ctx.c.tau_mu();
    require("thm3", c * tm > 1.0, || {
        format!("C > 1/(tau mu) (got C = {c}, 1/(tau mu) = {})", 1.0 / tm)
    })?;
    require("thm3", big_m > 0.0 && big_m.is_finite(), || {
        format!("M > 0 (got {big_m})")
    })?;
    let a = tm * c;
    let k = 8.0 * ctx.c.sigma2 * big_m * big_m;
    ctx.put("tau_mu_c", a);
    let delta = ctx.terms.delta;
    Ok(horizons
        .iter()
        .map(|&t| {
            let t1 = t as f64 + 1.0;
            (delta + k) * (-a * t1.ln()).exp() + k * E / ((a - 1.0) * t1)
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn power_then_inverse(
    ctx: &mut Ctx,
    m: f64,
    big_m1: f64,
    big_m2: f64,
    r: f64,
    p: f64,
    c1: f64,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    let tm = ctx.c.tau_mu();
    let a = tm * m;
    require("thm4", a > 1.0, || {
        format!("m > 1/(tau mu) (got tau mu m = {a})")
    })?;
    require("thm4", r > 0.5 && r < 1.0, || {
        format!("r in (1/2, 1) (got {r})")
    })?;
    require("thm4", p > 0.0 && p < 1.0, || {
        format!("p in (0, 1) (got {p})")
    })?;
    require("thm4", c1 > 0.0, || format!("C1 > 0 (got {c1})"))?;
    require("thm4", big_m1 > 0.0 && big_m2 > 0.0, || "M1, M2 > 0".into())?;
    let eps1 = 2.0 * ctx.c.sigma2 * a.exp();
    let vs1 = (1.0 - p) * a + p * (2.0 * r - 1.0);
    let vs2 = 1.0 - 2.0 * r + a;
    ctx.put("tau_mu_m", a);
    ctx.put("epsilon1", eps1);
    ctx.put("varsigma1", vs1);
    ctx.put("varsigma2", vs2);
    let (m1s, m2s) = (big_m1 * big_m1, big_m2 * big_m2);
    let delta = ctx.terms.delta;
    let head = eps1 * m1s * (c1 + 1.0).powf(vs2) / vs2;
    Ok(horizons
        .iter()
        .map(|&t| {
            let t = t as f64;
            (delta + eps1 * (m1s + m2s)) * (-a * (t + 1.0).ln()).exp()
                + head * (-vs1 * t.ln()).exp()
                + eps1 * m2s / ((a - 1.0) * (t + 1.0))
        })
        .collect())
}

fn const_then_inverse(
    ctx: &mut Ctx,
    [m1, big_m1, m2, big_m2]: [f64; 4],
    p: f64,
    c1: f64,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    require_band("thm5", m1, big_m1)?;
    require_band("thm5", m2, big_m2)?;
    require("thm5", p > 0.0 && p < 1.0, || {
        format!("p in (0, 1) (got {p})")
    })?;
    require("thm5", c1 > 0.0, || format!("C1 > 0 (got {c1})"))?;
    let tm = ctx.c.tau_mu();
    let (a1, a2) = (tm * m1, tm * m2);
    let kappa = a2 * (1.0 - p);
    require("thm5", kappa >= 1.0, || {
        format!("kappa = tau mu m2 (1 - p) >= 1 (got {kappa})")
    })?;
    ctx.put("tau_mu_m1", a1);
    ctx.put("tau_mu_m2", a2);
    ctx.put("kappa", kappa);
    let s2 = ctx.c.sigma2;
    let e2 = a2.exp();
    let delta = ctx.terms.delta;
    Ok(horizons
        .iter()
        .map(|&t| {
            let tf = t as f64;
            let lt = tf.ln();
            e2 / (a1 * c1) * delta * (-(kappa + p) * lt).exp()
                + 2.0
                    * s2
                    * e2
                    * (big_m1 * big_m1 * c1.powf(a2) / a1 * (-kappa * lt).exp()
                        + big_m2 * big_m2 / ((a2 - 1.0) * (tf + 1.0)))
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn same_boundary(
    ctx: &mut Ctx,
    boundary: &BoundaryFn,
    m: f64,
    big_m: f64,
    epsilon: Option<f64>,
    t_epsilon: Option<u64>,
    t_m: Option<u64>,
    horizons: &[u64],
) -> Result<(Vec<f64>, Option<String>)> {
    require_band("thm6", m, big_m)?;
    boundary.validate()?;
    let class = classify_boundary(boundary)?;
    require("thm6", class.h3, || "boundary must satisfy H3".into())?;
    let tm = ctx.c.tau_mu();
    let a = tm * m;
    let d1 = boundary.value(1.0);
    let eps2 = 2.0 * ctx.c.sigma2 * big_m * big_m * (a * d1).exp();
    let h = *horizons.last().unwrap();
    let delta = ctx.terms.delta;
    match class.limit {
        TailLimit::One => {
            let (routed, vals) = match boundary {
                BoundaryFn::PowerLaw { .. } => ("thm1", inverse_band(ctx, m, big_m, horizons)?),
                BoundaryFn::PiecewisePowerThenInverse { r, p, c1, .. } => (
                    "thm4",
                    power_then_inverse(ctx, m, big_m, big_m, *r, *p, *c1, horizons)?,
                ),
                BoundaryFn::PiecewiseConstThenInverse { p, c1, .. } => (
                    "thm5",
                    const_then_inverse(ctx, [m, big_m, m, big_m], *p, *c1, horizons)?,
                ),
                _ => unreachable!("only these families have t delta(t) -> 1"),
            };
            Ok((vals, Some(routed.to_string())))
        }
        TailLimit::Zero => {
            let eps =
                epsilon.ok_or_else(|| Error::param("epsilon", "required when t delta(t) -> 0"))?;
            let t_eps = t_epsilon
                .ok_or_else(|| Error::param("t_epsilon", "required when t delta(t) -> 0"))?;
            require("thm6", eps > 0.0 && t_eps >= 1, || {
                format!("epsilon > 0 and t_epsilon >= 1 (got {eps}, {t_eps})")
            })?;
            if let Some(t) =
                (t_eps..=h.max(t_eps)).find(|&t| t as f64 * boundary.value(t as f64) >= eps)
            {
                return Err(Error::hypothesis(
                    "thm6",
                    format!(
                        "t delta(t) < epsilon on [t_epsilon, {h}] fails at t = {t} (t delta(t) = {})",
                        t as f64 * boundary.value(t as f64)
                    ),
                ));
            }
            ctx.put("tau_mu_m", a);
            ctx.put("epsilon2", eps2);
            ctx.put("epsilon", eps);
            ctx.put("t_epsilon", t_eps as f64);
            let i_eps = boundary.integral(1.0, t_eps as f64)?;
            let k = eps2 * (d1 * d1 * (t_eps as f64 - 1.0) + 2.0 * eps * eps);
            let mut out = Vec::with_capacity(horizons.len());
            for &t in horizons {
                let i_t = boundary.integral(1.0, t as f64 + 1.0)?;
                out.push(delta * (-a * i_t).exp() + k * (a * (i_eps - i_t)).exp());
            }
            Ok((out, None))
        }
        TailLimit::Infinity => {
            let limit = a / 2.0;
            let (t_m, c1) = match t_m {
                Some(t_m) => {
                    let c1 = estimate_c1(boundary, t_m, h.max(t_m))?;
                    require("thm6", c1 <= limit, || {
                        format!("c1 <= tau mu m / 2 on [T_M, {h}] (c1 = {c1}, limit = {limit})")
                    })?;
                    (t_m, c1)
                }
                None => smallest_t_m(boundary, limit, h)?.ok_or_else(|| {
                    Error::hypothesis(
                        "thm6",
                        format!("no T_M <= {h} with c1 <= tau mu m / 2 = {limit}"),
                    )
                })?,
            };
            ctx.put("tau_mu_m", a);
            ctx.put("epsilon2", eps2);
            ctx.put("c1", c1);
            ctx.put("t_m", t_m as f64);
            let i_m = boundary.integral(1.0, t_m as f64)?;
            let k = eps2 * d1 * d1 * t_m as f64;
            let mut out = Vec::with_capacity(horizons.len());
            for &t in horizons {
                let t1 = t as f64 + 1.0;
                let i_t = boundary.integral(1.0, t1)?;
                out.push(
                    eps2 / (a - c1) * boundary.value(t1)
                        + delta * (-a * i_t).exp()
                        + k * (a * (i_m - i_t)).exp(),
                );
            }
            Ok((out, None))
        }
    }
}

fn log_upper(ctx: &mut Ctx, m: f64, big_m: f64, horizons: &[u64]) -> Result<Vec<f64>> {
    require_band("thm7", m, big_m)?;
    let a = ctx.c.tau_mu() * m;
    let s2 = ctx.c.sigma2;
    let eps1 = 2.0 * s2 * a.exp();
    let mm = big_m * big_m;
    let lead = 2f64.powf(a) * ctx.terms.delta;
    ctx.put("tau_mu_m", a);
    ctx.put("epsilon1", eps1);
    let nu1 = LN_2 / 2.0 + (2.0 + 2.0 * LN_2 + LN_2 * LN_2) / (1.0 - a).powi(3);
    let nu2 = LN_2 / 2.0 + 2f64.powf(a) * LN_2 / (a - 1.0).powi(2);
    if a < 1.0 && !is_one(a) {
        ctx.put("nu1", nu1);
    } else if a > 1.0 && !is_one(a) {
        ctx.put("nu2", nu2);
    }
    Ok(horizons
        .iter()
        .map(|&t| {
            let t2 = t as f64 + 2.0;
            let l = t2.ln();
            if is_one(a) {
                (lead + s2 * mm * E * LN_2) / t2 + eps1 * mm * l.powi(3) / (3.0 * t2)
            } else if a < 1.0 {
                (lead + 2.0 * eps1 * nu1 * mm) * (-a * l).exp()
            } else {
                (lead + eps1 * nu2 * mm) * (-a * l).exp()
                    + (l * l / (a - 1.0) + 2.0 / (a - 1.0).powi(3)) * eps1 * mm / t2
            }
        })
        .collect())
}

fn power_upper(
    ctx: &mut Ctx,
    m: f64,
    big_m: f64,
    alpha: f64,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    require_band("thm8", m, big_m)?;
    require("thm8", alpha > 0.5 && alpha <= 1.0, || {
        format!("alpha in (1/2, 1] (got {alpha})")
    })?;
    let a = ctx.c.tau_mu() * m;
    let s2 = ctx.c.sigma2;
    let eps1 = 2.0 * s2 * a.exp();
    let mm = big_m * big_m;
    let rate = 2.0 * alpha - 1.0;
    let delta = ctx.terms.delta;
    ctx.put("tau_mu_m", a);
    ctx.put("epsilon1", eps1);
    Ok(horizons
        .iter()
        .map(|&t| {
            let l = (t as f64 + 1.0).ln();
            if (a - rate).abs() <= 1e-12 {
                (delta + 2.0 * s2 * mm * rate.exp() * (1.0 + l)) * (-rate * l).exp()
            } else {
                let g = a - 2.0 * alpha + 1.0;
                (delta + eps1 * mm * (a - 2.0 * alpha) / g) * (-a * l).exp()
                    + eps1 * mm / g * (-rate * l).exp()
            }
        })
        .collect())
}

/// Smallest integer `t >= 1` with `ln x <= x^beta` for every `x >= t + 1`, returned as
/// `ln(t + 1)` so that huge values stay finite.
fn ln_t_beta_plus_one(beta: f64) -> f64 {
    if beta >= 1.0 / E {
        return 2f64.ln();
    }
    // with y = ln x the condition reads beta y >= ln y; take the larger root
    let g = |y: f64| beta * y - y.ln();
    let mut lo = 1.0 / beta;
    let mut hi = 2.0 * lo;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y2 = hi;
    if y2 < 700.0 {
        let t = (y2.exp() - 1.0).ceil().max(1.0);
        (t + 1.0).ln()
    } else {
        y2
    }
}

fn log_lower(
    ctx: &mut Ctx,
    m: f64,
    big_m: f64,
    alpha: f64,
    beta: Option<f64>,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    require_band("thm9", m, big_m)?;
    require("thm9", alpha > 0.5 && alpha <= 1.0, || {
        format!("alpha in (1/2, 1] (got {alpha})")
    })?;
    let a = ctx.c.tau_mu() * m;
    let rate = 2.0 * alpha - 1.0;
    let beta = beta.unwrap_or(0.5 * rate / a);
    require("thm9", beta > 0.0 && beta < rate / a, || {
        format!(
            "beta in (0, (2 alpha - 1)/(tau mu m)) = (0, {}) (got {beta})",
            rate / a
        )
    })?;
    let ln_tb1 = ln_t_beta_plus_one(beta);
    let k = LN_2.powf(a);
    let gap = rate - beta * a;
    let bracket = k / 2f64.powf(2.0 * alpha)
        + 2f64.powf(1.0 - 2.0 * alpha) / rate
        + (-gap * ln_tb1).exp() / gap;
    let s2 = ctx.c.sigma2;
    let mm = big_m * big_m;
    let delta = ctx.terms.delta;
    ctx.put("tau_mu_m", a);
    ctx.put("beta", beta);
    ctx.put("ln_t_beta_plus_1", ln_tb1);
    if ln_tb1 < 700.0 {
        ctx.put("t_beta", (ln_tb1.exp() - 1.0).round());
    }
    Ok(horizons
        .iter()
        .map(|&t| {
            let scale = k * (-a * (t as f64 + 2.0).ln().ln()).exp();
            scale * delta + 2.0 * s2 * mm * scale * bracket
        })
        .collect())
}

//! Step-size schedules: classic decays, cyclic policies and band schedules built from
//! hyperbolic segments.

mod segment;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bands::{BandSpec, BoundaryFn};
use crate::error::{Error, Result};

pub use segment::{build_hyperbolic_segment, HyperbolicSegment, NodeSequence};

/// Anything that yields a positive step size at 1-based iteration indices.
///
/// `eta` and `ln_eta` assume `1 <= t <= horizon()`; use [`Schedule::eval_step`] for a
/// checked lookup.
pub trait StepRule {
    fn horizon(&self) -> u64;

    fn eta(&self, t: u64) -> f64;

    /// Natural log of the step size. Exponential decays override this so that values far
    /// below `f64::MIN_POSITIVE` stay representable.
    fn ln_eta(&self, t: u64) -> f64 {
        self.eta(t).ln()
    }
}

/// A step rule backed by a closure, handy for ad-hoc schedules such as `eta = 0`.
pub struct FnRule<F> {
    f: F,
    horizon: u64,
}

impl<F: Fn(u64) -> f64> FnRule<F> {
    pub fn new(horizon: u64, f: F) -> Self {
        Self { f, horizon }
    }
}

impl<F: Fn(u64) -> f64> StepRule for FnRule<F> {
    fn horizon(&self) -> u64 {
        self.horizon
    }

    fn eta(&self, t: u64) -> f64 {
        (self.f)(t)
    }
}

fn default_growth() -> f64 {
    2.0
}

fn default_decay() -> f64 {
    0.1
}

fn default_spread() -> f64 {
    2.0
}

/// Family tag plus its parameters. Serialized as `{"family": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ScheduleFamily {
    /// `eta0 / t`, or `eta0 / (1 + t / shift)` when a shift is given.
    InverseTime {
        eta0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
    },
    /// `eta0 / t` before `first_node`, then hyperbolic segments from `bandwidth * eta0 / t_i`
    /// down to `eta0 / t_{i+1}` with evenly spaced nodes.
    FixPeriodBand {
        eta0: f64,
        bandwidth: f64,
        first_node: u64,
        period: u64,
    },
    /// Same as `FixPeriodBand` but each node is `growth` times the previous one.
    GrowPeriodBand {
        eta0: f64,
        bandwidth: f64,
        first_node: u64,
        #[serde(default = "default_growth")]
        growth: f64,
    },
    /// Level `eta0 / 2^i` on cycles whose length doubles, starting at `initial_period`.
    GrowExp { eta0: f64, initial_period: u64 },
    /// `GrowExp` cycles where each cycle restarts `ratio` times above the previous floor and
    /// decays hyperbolically to its own floor.
    UpDownGrowExp {
        eta0: f64,
        initial_period: u64,
        ratio: f64,
    },
    /// `eta0 * decay^floor((t - 1) / period)`.
    FixExp {
        eta0: f64,
        period: u64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    /// `FixExp` cycles with the up-down restart.
    UpDownFixExp {
        eta0: f64,
        period: u64,
        ratio: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    /// Symmetric triangle per cycle between the `FixExp` level and `rise` times it.
    Triangular {
        eta0: f64,
        period: u64,
        #[serde(default = "default_spread")]
        rise: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    /// Cosine from the `FixExp` level down to `level / spread` within each cycle.
    CosineAnnealing {
        eta0: f64,
        period: u64,
        #[serde(default = "default_spread")]
        spread: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    /// Explicit values for `t = 1, 2, ...`.
    Tabulated { values: Vec<f64> },
    /// `eta0 * delta(t)` for a boundary function `delta`.
    Boundary { eta0: f64, boundary: BoundaryFn },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    #[serde(flatten)]
    pub family: ScheduleFamily,
    pub horizon: u64,
}

impl ScheduleSpec {
    pub fn new(family: ScheduleFamily, horizon: u64) -> Self {
        Self { family, horizon }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            ScheduleFamily::InverseTime { .. } => "inverse_time",
            ScheduleFamily::FixPeriodBand { .. } => "fix_period_band",
            ScheduleFamily::GrowPeriodBand { .. } => "grow_period_band",
            ScheduleFamily::GrowExp { .. } => "grow_exp",
            ScheduleFamily::UpDownGrowExp { .. } => "up_down_grow_exp",
            ScheduleFamily::FixExp { .. } => "fix_exp",
            ScheduleFamily::UpDownFixExp { .. } => "up_down_fix_exp",
            ScheduleFamily::Triangular { .. } => "triangular",
            ScheduleFamily::CosineAnnealing { .. } => "cosine_annealing",
            ScheduleFamily::Tabulated { .. } => "tabulated",
            ScheduleFamily::Boundary { .. } => "boundary",
        }
    }
}

#[derive(Debug, Clone)]
enum Rule {
    InverseTime {
        eta0: f64,
        shift: Option<f64>,
    },
    /// `nodes` always contains one node past the horizon so every segment has an end.
    Band {
        eta0: f64,
        bandwidth: f64,
        nodes: Vec<u64>,
    },
    /// Cycle `i` covers `[starts[i], starts[i + 1])`.
    GrowExp {
        ln_eta0: f64,
        starts: Vec<u64>,
        ratio: Option<f64>,
    },
    FixExp {
        ln_eta0: f64,
        period: u64,
        ln_decay: f64,
        ratio: Option<f64>,
    },
    Triangular {
        ln_eta0: f64,
        period: u64,
        rise: f64,
        ln_decay: f64,
    },
    Cosine {
        ln_eta0: f64,
        period: u64,
        spread: f64,
        ln_decay: f64,
    },
    Tabulated(Vec<f64>),
    Boundary {
        eta0: f64,
        boundary: BoundaryFn,
    },
}

/// A validated, evaluable schedule.
#[derive(Debug, Clone)]
pub struct Schedule {
    spec: ScheduleSpec,
    rule: Rule,
    nodes: NodeSequence,
    band: Option<BandSpec>,
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn at_least_one(field: &'static str, v: u64) -> Result<u64> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::param(field, "must be >= 1"))
    }
}

fn check_ratio(theta: f64) -> Result<f64> {
    if theta > 1.0 && theta <= 1.5 {
        Ok(theta)
    } else {
        Err(Error::param(
            "ratio",
            format!("must lie in (1, 1.5], got {theta}"),
        ))
    }
}

fn check_decay(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::param(
            "decay",
            format!("must lie in (0, 1), got {alpha}"),
        ))
    }
}

fn inverse_band(m: f64, big_m: f64) -> BandSpec {
    BandSpec {
        lower: BoundaryFn::PowerLaw { p: 1.0 },
        upper: BoundaryFn::PowerLaw { p: 1.0 },
        m,
        big_m,
    }
}

/// One representative of every family with explicit parameters (all but `Tabulated`):
/// `eta0 = 1`, bandwidth 3 with first node 30, cycle lengths 2 (grow) or 3 (fixed),
/// ratio 1.2, period 10 for the triangular and cosine policies.
pub fn default_families() -> Vec<ScheduleFamily> {
    vec![
        ScheduleFamily::InverseTime {
            eta0: 1.0,
            shift: None,
        },
        ScheduleFamily::FixPeriodBand {
            eta0: 1.0,
            bandwidth: 3.0,
            first_node: 30,
            period: 30,
        },
        ScheduleFamily::GrowPeriodBand {
            eta0: 1.0,
            bandwidth: 3.0,
            first_node: 30,
            growth: 2.0,
        },
        ScheduleFamily::GrowExp {
            eta0: 1.0,
            initial_period: 2,
        },
        ScheduleFamily::UpDownGrowExp {
            eta0: 1.0,
            initial_period: 2,
            ratio: 1.2,
        },
        ScheduleFamily::FixExp {
            eta0: 1.0,
            period: 3,
            decay: 0.1,
        },
        ScheduleFamily::UpDownFixExp {
            eta0: 1.0,
            period: 3,
            ratio: 1.2,
            decay: 0.1,
        },
        ScheduleFamily::Triangular {
            eta0: 1.0,
            period: 10,
            rise: 2.0,
            decay: 0.1,
        },
        ScheduleFamily::CosineAnnealing {
            eta0: 1.0,
            period: 10,
            spread: 2.0,
            decay: 0.1,
        },
        ScheduleFamily::Boundary {
            eta0: 1.0,
            boundary: BoundaryFn::PowerLaw { p: 1.0 },
        },
    ]
}

/// Validate a spec and build its evaluable rule.
pub fn make_schedule(spec: ScheduleSpec) -> Result<Schedule> {
    let horizon = spec.horizon;
    if horizon == 0 {
        return Err(Error::param("horizon", "must be >= 1"));
    }
    let mut nodes = Vec::new();
    let mut band = None;
    let rule = match &spec.family {
        ScheduleFamily::InverseTime { eta0, shift } => {
            let eta0 = positive("eta0", *eta0)?;
            match shift {
                None => band = Some(inverse_band(eta0, eta0)),
                Some(a) => {
                    let a = positive("shift", *a)?;
                    // t * eta0 a / (a + t) increases from eta0 a / (a + 1) towards eta0 a
                    band = Some(inverse_band(eta0 * a / (a + 1.0), eta0 * a));
                }
            }
            Rule::InverseTime {
                eta0,
                shift: *shift,
            }
        }
        ScheduleFamily::FixPeriodBand {
            eta0,
            bandwidth,
            first_node,
            period,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let s = check_bandwidth(*bandwidth)?;
            let first = at_least_one("first_node", *first_node)?;
            let period = at_least_one("period", *period)?;
            let mut all = vec![first];
            while *all.last().unwrap() <= horizon {
                let next = all.last().unwrap() + period;
                all.push(next);
            }
            band = Some(inverse_band(eta0, s * eta0));
            nodes = all.clone();
            Rule::Band {
                eta0,
                bandwidth: s,
                nodes: all,
            }
        }
        ScheduleFamily::GrowPeriodBand {
            eta0,
            bandwidth,
            first_node,
            growth,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let s = check_bandwidth(*bandwidth)?;
            let first = at_least_one("first_node", *first_node)?;
            if !(growth.is_finite() && *growth > 1.0) {
                return Err(Error::param(
                    "growth",
                    format!("must exceed 1, got {growth}"),
                ));
            }
            let mut all = vec![first];
            while *all.last().unwrap() <= horizon {
                let last = *all.last().unwrap();
                let next = ((last as f64) * growth).round() as u64;
                all.push(next.max(last + 1));
            }
            band = Some(inverse_band(eta0, s * eta0));
            nodes = all.clone();
            Rule::Band {
                eta0,
                bandwidth: s,
                nodes: all,
            }
        }
        ScheduleFamily::GrowExp {
            eta0,
            initial_period,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let t0 = at_least_one("initial_period", *initial_period)?;
            let starts = grow_exp_starts(t0, horizon);
            nodes = starts[1..].to_vec();
            // t * eta stays within [eta0, 2 T0 eta0) on every cycle
            band = Some(inverse_band(eta0, 2.0 * t0 as f64 * eta0));
            Rule::GrowExp {
                ln_eta0: eta0.ln(),
                starts,
                ratio: None,
            }
        }
        ScheduleFamily::UpDownGrowExp {
            eta0,
            initial_period,
            ratio,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let t0 = at_least_one("initial_period", *initial_period)?;
            let theta = check_ratio(*ratio)?;
            let starts = grow_exp_starts(t0, horizon);
            nodes = starts[1..].to_vec();
            band = Some(inverse_band(0.5 * eta0, 2.0 * theta * t0 as f64 * eta0));
            Rule::GrowExp {
                ln_eta0: eta0.ln(),
                starts,
                ratio: Some(theta),
            }
        }
        ScheduleFamily::FixExp {
            eta0,
            period,
            decay,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let period = at_least_one("period", *period)?;
            let alpha = check_decay(*decay)?;
            nodes = fixed_nodes(period, horizon);
            Rule::FixExp {
                ln_eta0: eta0.ln(),
                period,
                ln_decay: alpha.ln(),
                ratio: None,
            }
        }
        ScheduleFamily::UpDownFixExp {
            eta0,
            period,
            ratio,
            decay,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let period = at_least_one("period", *period)?;
            let theta = check_ratio(*ratio)?;
            let alpha = check_decay(*decay)?;
            nodes = fixed_nodes(period, horizon);
            Rule::FixExp {
                ln_eta0: eta0.ln(),
                period,
                ln_decay: alpha.ln(),
                ratio: Some(theta),
            }
        }
        ScheduleFamily::Triangular {
            eta0,
            period,
            rise,
            decay,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let period = at_least_one("period", *period)?;
            if !(rise.is_finite() && *rise >= 1.0) {
                return Err(Error::param("rise", format!("must be >= 1, got {rise}")));
            }
            let alpha = check_decay(*decay)?;
            nodes = fixed_nodes(period, horizon);
            Rule::Triangular {
                ln_eta0: eta0.ln(),
                period,
                rise: *rise,
                ln_decay: alpha.ln(),
            }
        }
        ScheduleFamily::CosineAnnealing {
            eta0,
            period,
            spread,
            decay,
        } => {
            let eta0 = positive("eta0", *eta0)?;
            let period = at_least_one("period", *period)?;
            if !(spread.is_finite() && *spread >= 1.0) {
                return Err(Error::param(
                    "spread",
                    format!("must be >= 1, got {spread}"),
                ));
            }
            let alpha = check_decay(*decay)?;
            nodes = fixed_nodes(period, horizon);
            Rule::Cosine {
                ln_eta0: eta0.ln(),
                period,
                spread: *spread,
                ln_decay: alpha.ln(),
            }
        }
        ScheduleFamily::Tabulated { values } => {
            if (values.len() as u64) < horizon {
                return Err(Error::param(
                    "values",
                    format!("{} values do not cover horizon {horizon}", values.len()),
                ));
            }
            if let Some((i, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v > 0.0))
            {
                return Err(Error::param(
                    "values",
                    format!(
                        "value at t = {} must be positive and finite, got {v}",
                        i + 1
                    ),
                ));
            }
            Rule::Tabulated(values.clone())
        }
        ScheduleFamily::Boundary { eta0, boundary } => {
            let eta0 = positive("eta0", *eta0)?;
            boundary.validate()?;
            band = Some(BandSpec {
                lower: boundary.clone(),
                upper: boundary.clone(),
                m: eta0,
                big_m: eta0,
            });
            Rule::Boundary {
                eta0,
                boundary: boundary.clone(),
            }
        }
    };
    let nodes = NodeSequence::new(nodes)?;
    Ok(Schedule {
        spec,
        rule,
        nodes,
        band,
    })
}

fn check_bandwidth(s: f64) -> Result<f64> {
    if s.is_finite() && s > 1.0 {
        Ok(s)
    } else {
        Err(Error::param("bandwidth", format!("must exceed 1, got {s}")))
    }
}

/// `t_0 = 1`, `t_{i+1} = t_i + T0 * 2^i`, continued until one start lies past the horizon.
fn grow_exp_starts(t0: u64, horizon: u64) -> Vec<u64> {
    let mut starts = vec![1u64];
    let mut len = t0;
    while *starts.last().unwrap() <= horizon {
        let next = starts.last().unwrap().saturating_add(len);
        starts.push(next);
        len = len.saturating_mul(2);
    }
    starts
}

fn fixed_nodes(period: u64, horizon: u64) -> Vec<u64> {
    (1..)
        .map(|c| 1 + c * period)
        .take_while(|&t| t <= horizon)
        .collect()
}

impl Schedule {
    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &NodeSequence {
        &self.nodes
    }

    /// The band this family is constructed to satisfy, if it has one.
    pub fn declared_band(&self) -> Option<&BandSpec> {
        self.band.as_ref()
    }

    /// Checked evaluation at `1 <= t <= horizon`.
    pub fn eval_step(&self, t: u64) -> Result<f64> {
        if t < 1 || t > self.spec.horizon {
            return Err(Error::Range {
                what: "t",
                value: t as f64,
                range: format!("[1, {}]", self.spec.horizon),
            });
        }
        Ok(self.eta(t))
    }

    /// Hyperbolic segment containing `t`, in actual step-size units.
    pub fn segment_at(&self, t: u64) -> Option<HyperbolicSegment> {
        match &self.rule {
            Rule::Band {
                eta0,
                bandwidth,
                nodes,
            } => {
                let i = nodes.partition_point(|&n| n <= t);
                if i == 0 {
                    return None;
                }
                let (ti, tj) = (nodes[i - 1], nodes[i]);
                build_hyperbolic_segment(ti, tj, bandwidth * eta0 / ti as f64, eta0 / tj as f64)
                    .ok()
            }
            Rule::GrowExp {
                starts,
                ratio: Some(_),
                ..
            } => {
                let i = starts.partition_point(|&n| n <= t) - 1;
                let (lo, hi) = self.cycle_bounds(t)?;
                build_hyperbolic_segment(starts[i], starts[i + 1], hi, lo).ok()
            }
            Rule::FixExp {
                period,
                ratio: Some(_),
                ..
            } => {
                let c = (t - 1) / period;
                let (lo, hi) = self.cycle_bounds(t)?;
                build_hyperbolic_segment(1 + c * period, 1 + (c + 1) * period, hi, lo).ok()
            }
            _ => None,
        }
    }

    /// `(floor, ceiling)` of the up-down cycle containing `t`.
    pub fn cycle_bounds(&self, t: u64) -> Option<(f64, f64)> {
        let (ln_floor, ln_ceil) = self.ln_cycle_bounds(t)?;
        Some((ln_floor.exp(), ln_ceil.exp()))
    }

    fn ln_cycle_bounds(&self, t: u64) -> Option<(f64, f64)> {
        match &self.rule {
            Rule::GrowExp {
                ln_eta0,
                starts,
                ratio: Some(theta),
            } => {
                let i = (starts.partition_point(|&n| n <= t) - 1) as f64;
                let ln2 = std::f64::consts::LN_2;
                let floor = ln_eta0 - (i + 1.0) * ln2;
                let ceil = if i == 0.0 {
                    *ln_eta0
                } else {
                    // theta times the previous cycle's floor
                    theta.ln() + ln_eta0 - i * ln2
                };
                Some((floor, ceil))
            }
            Rule::FixExp {
                ln_eta0,
                period,
                ln_decay,
                ratio: Some(theta),
            } => {
                let c = ((t - 1) / period) as f64;
                let floor = ln_eta0 + (c + 1.0) * ln_decay;
                let ceil = if c == 0.0 {
                    *ln_eta0
                } else {
                    theta.ln() + ln_eta0 + c * ln_decay
                };
                Some((floor, ceil))
            }
            _ => None,
        }
    }

    /// Lower-to-upper position inside an up-down cycle, mapped to a log step size.
    fn ln_up_down(&self, t: u64, start: u64, end: u64) -> f64 {
        let (ln_floor, ln_ceil) = self.ln_cycle_bounds(t).expect("up-down rule");
        // normalized segment from ceil/floor down to 1, then rescaled by the floor
        let top = (ln_ceil - ln_floor).exp();
        let seg = build_hyperbolic_segment(start, end, top, 1.0).expect("valid up-down cycle");
        ln_floor + seg.eval(t as f64).ln()
    }
}

impl StepRule for Schedule {
    fn horizon(&self) -> u64 {
        self.spec.horizon
    }

    fn eta(&self, t: u64) -> f64 {
        match &self.rule {
            Rule::InverseTime { eta0, shift } => match shift {
                None => eta0 / t as f64,
                Some(a) => eta0 / (1.0 + t as f64 / a),
            },
            Rule::Band {
                eta0,
                bandwidth,
                nodes,
            } => {
                let i = nodes.partition_point(|&n| n <= t);
                if i == 0 {
                    return eta0 / t as f64;
                }
                let (ti, tj) = (nodes[i - 1], nodes[i]);
                if t == ti {
                    return bandwidth * eta0 / ti as f64;
                }
                let seg = build_hyperbolic_segment(
                    ti,
                    tj,
                    bandwidth * eta0 / ti as f64,
                    eta0 / tj as f64,
                )
                .expect("band segment endpoints are ordered");
                seg.eval(t as f64)
            }
            Rule::Tabulated(values) => values[(t - 1) as usize],
            Rule::Boundary { eta0, boundary } => eta0 * boundary.value(t as f64),
            _ => self.ln_eta(t).exp(),
        }
    }

    fn ln_eta(&self, t: u64) -> f64 {
        match &self.rule {
            Rule::GrowExp {
                ln_eta0,
                starts,
                ratio,
            } => {
                let i = starts.partition_point(|&n| n <= t) - 1;
                match ratio {
                    None => ln_eta0 - i as f64 * std::f64::consts::LN_2,
                    Some(_) => self.ln_up_down(t, starts[i], starts[i + 1]),
                }
            }
            Rule::FixExp {
                ln_eta0,
                period,
                ln_decay,
                ratio,
            } => {
                let c = (t - 1) / period;
                match ratio {
                    None => ln_eta0 + c as f64 * ln_decay,
                    Some(_) => self.ln_up_down(t, 1 + c * period, 1 + (c + 1) * period),
                }
            }
            Rule::Triangular {
                ln_eta0,
                period,
                rise,
                ln_decay,
            } => {
                let c = (t - 1) / period;
                let pos = ((t - 1) % period) as f64;
                let tri = 1.0 - (2.0 * pos / *period as f64 - 1.0).abs();
                ln_eta0 + c as f64 * ln_decay + (1.0 + (rise - 1.0) * tri).ln()
            }
            Rule::Cosine {
                ln_eta0,
                period,
                spread,
                ln_decay,
            } => {
                let c = (t - 1) / period;
                let pos = ((t - 1) % period) as f64;
                let low = 1.0 / spread;
                let shape = low + 0.5 * (1.0 - low) * (1.0 + (PI * pos / *period as f64).cos());
                ln_eta0 + c as f64 * ln_decay + shape.ln()
            }
            _ => self.eta(t).ln(),
        }
    }
}

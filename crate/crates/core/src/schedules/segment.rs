use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A decreasing piece `eta(t) = a_hat / (b_hat * t + 1)` pinned to its two endpoint values.
///
/// The reciprocal of such a curve is affine in `t`, so the segment is evaluated by
/// interpolating `1 / eta` linearly between the endpoints. This reproduces both endpoint
/// values to rounding error and keeps the pole (where `1 / eta = 0`) outside the segment
/// whenever both endpoint values are positive. `a_hat` and `b_hat` are reported for
/// inspection; they can be negative (and are infinite for an exact `c / t` curve).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSegment {
    pub a_hat: f64,
    pub b_hat: f64,
    pub t_start: u64,
    pub t_end: u64,
    inv_start: f64,
    inv_end: f64,
}

impl HyperbolicSegment {
    pub fn eval(&self, t: f64) -> f64 {
        1.0 / self.reciprocal(t)
    }

    fn reciprocal(&self, t: f64) -> f64 {
        if self.inv_start == self.inv_end {
            return self.inv_start;
        }
        let span = (self.t_end - self.t_start) as f64;
        let frac = (t - self.t_start as f64) / span;
        self.inv_start + (self.inv_end - self.inv_start) * frac
    }

    pub fn start_value(&self) -> f64 {
        1.0 / self.inv_start
    }

    pub fn end_value(&self) -> f64 {
        1.0 / self.inv_end
    }

    /// Location of the pole `t = -1 / b_hat`, if the curve has one.
    pub fn pole(&self) -> Option<f64> {
        if self.inv_start == self.inv_end {
            return None;
        }
        let span = (self.t_end - self.t_start) as f64;
        let slope = (self.inv_end - self.inv_start) / span;
        Some(self.t_start as f64 - self.inv_start / slope)
    }
}

/// Solve `a/(b t_i + 1) = eta_start`, `a/(b t_next + 1) = eta_end` for a decreasing segment.
pub fn build_hyperbolic_segment(
    t_i: u64,
    t_next: u64,
    eta_start: f64,
    eta_end: f64,
) -> Result<HyperbolicSegment> {
    let fail = |reason: String| Error::Segment {
        t_start: t_i,
        t_end: t_next,
        reason,
    };
    if t_i == 0 || t_i >= t_next {
        return Err(fail("nodes must satisfy 1 <= t_i < t_next".into()));
    }
    if !(eta_end.is_finite() && eta_start.is_finite() && eta_end > 0.0) {
        return Err(fail(format!(
            "endpoint values must be positive and finite (got {eta_start}, {eta_end})"
        )));
    }
    if eta_start < eta_end {
        return Err(fail(format!(
            "segment must be non-increasing (start {eta_start} < end {eta_end})"
        )));
    }
    if eta_start == eta_end {
        return Ok(HyperbolicSegment {
            a_hat: eta_start,
            b_hat: 0.0,
            t_start: t_i,
            t_end: t_next,
            inv_start: 1.0 / eta_start,
            inv_end: 1.0 / eta_start,
        });
    }
    let inv_start = 1.0 / eta_start;
    let inv_end = 1.0 / eta_end;
    // 1/eta = (b/a) t + 1/a
    let slope = (inv_end - inv_start) / (t_next - t_i) as f64;
    let intercept = inv_start - slope * t_i as f64;
    let a_hat = 1.0 / intercept;
    let b_hat = slope * a_hat;
    let seg = HyperbolicSegment {
        a_hat,
        b_hat,
        t_start: t_i,
        t_end: t_next,
        inv_start,
        inv_end,
    };
    if let Some(pole) = seg.pole() {
        if pole >= t_i as f64 && pole <= t_next as f64 {
            return Err(fail(format!("pole at t = {pole} lies inside the segment")));
        }
    }
    Ok(seg)
}

/// Strictly increasing iteration indices where a schedule may jump.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSequence {
    nodes: Vec<u64>,
}

impl NodeSequence {
    pub fn new(nodes: Vec<u64>) -> Result<Self> {
        if let Some(&first) = nodes.first() {
            if first < 1 {
                return Err(Error::param("nodes", "first node must be >= 1"));
            }
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "nodes",
                format!("nodes must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        Ok(Self { nodes })
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

//! Run summaries: cumulative cost, settling, overshoot, final error, and
//! paired comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::sim::log::SimLog;
use crate::vehicle::{StateVec, ELEVATOR_RANGE, THROTTLE_RANGE};

/// Settling threshold as a fraction of the initial weighted error.
pub const SETTLE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Trapezoidal integral of `j_u`.
    pub cost_u: f64,
    /// Trapezoidal integral of `j_a`.
    pub cost_a: f64,
    pub initial_error: f64,
    pub final_error: f64,
    pub threshold: f64,
    /// First time after which the weighted error stays below `threshold`.
    pub settling_time: Option<f64>,
    /// Largest excursion past zero per state channel, opposite to the
    /// initial error sign; for channels starting at zero, the largest
    /// absolute error.
    pub overshoot: [f64; 5],
    pub final_state_error: [f64; 5],
    pub inputs_admissible: bool,
    pub duration: f64,
}

/// `√(xᵀQx)`.
pub fn weighted_norm(x: &StateVec, q: &Matrix) -> f64 {
    let v = Vector::from_column_slice(x.as_slice());
    v.dot(&(q * &v)).max(0.0).sqrt()
}

/// Trapezoidal rule on a possibly non-uniform grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoidal integral, starting at zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(t.len());
    for k in 0..t.len().min(y.len()) {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
        }
        out.push(acc);
    }
    out
}

pub fn metrics(log: &SimLog, q_u: &Matrix, x_e: &StateVec) -> MetricsReport {
    let t = log.times();
    let ju: Vec<f64> = log.samples.iter().map(|s| s.j_u).collect();
    let ja: Vec<f64> = log.samples.iter().map(|s| s.j_a).collect();
    let errs: Vec<StateVec> = log.samples.iter().map(|s| s.x - x_e).collect();
    let norms: Vec<f64> = errs.iter().map(|e| weighted_norm(e, q_u)).collect();
    let initial_error = norms.first().copied().unwrap_or(0.0);
    let threshold = SETTLE_FRACTION * initial_error;
    let settling_time = match norms.iter().rposition(|n| *n >= threshold) {
        None => t.first().copied(),
        Some(i) if i + 1 < t.len() => Some(t[i + 1]),
        Some(_) => None,
    };
    let e0 = errs.first().copied().unwrap_or_else(StateVec::zeros);
    let overshoot = std::array::from_fn(|c| {
        errs.iter()
            .map(|e| {
                if e0[c] == 0.0 {
                    e[c].abs()
                } else {
                    (-e0[c].signum() * e[c]).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    });
    let last = errs.last().copied().unwrap_or_else(StateVec::zeros);
    let inputs_admissible = log.samples.iter().all(|s| {
        (ELEVATOR_RANGE.0..=ELEVATOR_RANGE.1).contains(&s.u[0])
            && (THROTTLE_RANGE.0..=THROTTLE_RANGE.1).contains(&s.u[1])
    });
    MetricsReport {
        cost_u: trapezoid(&t, &ju),
        cost_a: trapezoid(&t, &ja),
        initial_error,
        final_error: norms.last().copied().unwrap_or(0.0),
        threshold,
        settling_time,
        overshoot,
        final_state_error: std::array::from_fn(|c| last[c]),
        inputs_admissible,
        duration: t.last().copied().unwrap_or(0.0) - t.first().copied().unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: MetricsReport,
    pub b: MetricsReport,
    /// `100 · (J_b − J_a) / J_b`: positive when run `a` is cheaper.
    pub cost_reduction_percent: f64,
}

/// Compares two runs on the same time grid.
pub fn compare(a: &SimLog, b: &SimLog, q_u: &Matrix, x_e: &StateVec) -> Result<Comparison> {
    let (ta, tb) = (a.times(), b.times());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-9 * (1.0 + x.abs())) {
        return Err(Error::MismatchedGrids);
    }
    let ma = metrics(a, q_u, x_e);
    let mb = metrics(b, q_u, x_e);
    let cost_reduction_percent = if ma.cost_u == mb.cost_u {
        0.0
    } else {
        100.0 * (mb.cost_u - ma.cost_u) / mb.cost_u
    };
    Ok(Comparison {
        a: ma,
        b: mb,
        cost_reduction_percent,
    })
}

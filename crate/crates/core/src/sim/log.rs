//! Per-period simulation records and their delimited-text form.
//!
//! Column order: `t, V, alpha, theta, q, h, delta_e, delta_t, xi_cmd,
//! xi_plant, j_u, j_a, iterations, residual_u, residual_a, wall_time_s,
//! warm_started, converged, held`, then `a_1 … a_h` for game runs. States
//! and inputs are physical; inputs are the applied, saturated values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::StepTelemetry;
use crate::linalg::Vector;
use crate::vehicle::{InputVec, StateVec};

pub const FIXED_COLUMNS: [&str; 19] = [
    "t",
    "V",
    "alpha",
    "theta",
    "q",
    "h",
    "delta_e",
    "delta_t",
    "xi_cmd",
    "xi_plant",
    "j_u",
    "j_a",
    "iterations",
    "residual_u",
    "residual_a",
    "wall_time_s",
    "warm_started",
    "converged",
    "held",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub t: f64,
    pub x: StateVec,
    pub u: InputVec,
    /// Morphing coefficient, empty for LQR runs.
    pub a: Vector,
    pub xi_cmd: f64,
    pub xi_plant: f64,
    pub j_u: f64,
    pub j_a: f64,
    pub telemetry: StepTelemetry,
}

impl SimSample {
    /// Equality ignoring measured wall time.
    pub fn same_trajectory(&self, other: &SimSample) -> bool {
        let strip = |s: &SimSample| {
            let mut s = s.clone();
            s.telemetry.wall_time_s = 0.0;
            s
        };
        strip(self) == strip(other)
    }
}

/// Uniformly sampled closed-loop record.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub period: f64,
    pub coeff_dim: usize,
    pub samples: Vec<SimSample>,
}

impl SimLog {
    pub fn new(period: f64, coeff_dim: usize) -> Self {
        Self {
            period,
            coeff_dim,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, s: SimSample) {
        debug_assert_eq!(s.a.len(), self.coeff_dim);
        self.samples.push(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&SimSample> {
        self.samples.last()
    }

    /// Equality of every logged quantity except wall-clock telemetry.
    pub fn same_trajectory(&self, other: &SimLog) -> bool {
        self.period == other.period
            && self.coeff_dim == other.coeff_dim
            && self.len() == other.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| a.same_trajectory(b))
    }

    pub fn header(&self) -> Vec<String> {
        FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain((1..=self.coeff_dim).map(|i| format!("a_{i}")))
            .collect()
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for s in &self.samples {
            let tel = &s.telemetry;
            let mut row: Vec<String> = Vec::with_capacity(FIXED_COLUMNS.len() + self.coeff_dim);
            row.push(s.t.to_string());
            row.extend(s.x.iter().map(f64::to_string));
            row.extend(s.u.iter().map(f64::to_string));
            for v in [s.xi_cmd, s.xi_plant, s.j_u, s.j_a] {
                row.push(v.to_string());
            }
            row.push(tel.iterations.to_string());
            for v in [tel.residual_u, tel.residual_a, tel.wall_time_s] {
                row.push(v.to_string());
            }
            for b in [tel.warm_started, tel.converged, tel.held] {
                row.push(u8::from(b).to_string());
            }
            row.extend(s.a.iter().map(f64::to_string));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn read_csv_from<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let n_fixed = FIXED_COLUMNS.len();
        if headers.len() < n_fixed || headers.iter().zip(FIXED_COLUMNS).any(|(h, e)| h != e) {
            return Err(Error::Format("log header does not match the expected columns".into()));
        }
        let coeff_dim = headers.len() - n_fixed;
        let mut samples = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Format("short log row".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {}: {e}", headers.get(i).unwrap_or("?"))))
            };
            let b = |i: usize| -> Result<bool> { Ok(f(i)? != 0.0) };
            samples.push(SimSample {
                t: f(0)?,
                x: StateVec::new(f(1)?, f(2)?, f(3)?, f(4)?, f(5)?),
                u: InputVec::new(f(6)?, f(7)?),
                xi_cmd: f(8)?,
                xi_plant: f(9)?,
                j_u: f(10)?,
                j_a: f(11)?,
                telemetry: StepTelemetry {
                    iterations: f(12)? as usize,
                    residual_u: f(13)?,
                    residual_a: f(14)?,
                    wall_time_s: f(15)?,
                    warm_started: b(16)?,
                    converged: b(17)?,
                    held: b(18)?,
                },
                a: Vector::from_iterator(
                    coeff_dim,
                    (n_fixed..n_fixed + coeff_dim).map(|i| f(i).unwrap_or(f64::NAN)),
                ),
            });
            if samples.last().is_some_and(|s| s.a.iter().any(|v| v.is_nan())) {
                return Err(Error::Format("malformed morphing coefficient column".into()));
            }
        }
        let period = match samples.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 0.0,
        };
        Ok(Self {
            period,
            coeff_dim,
            samples,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::read_csv_from(std::fs::File::open(path)?)
    }
}

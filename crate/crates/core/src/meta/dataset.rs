//! Labelled flight records and their delimited-text form.
//!
//! Columns, in order: `t, x_V, x_alpha, x_theta, x_q, x_h, u_delta_e,
//! u_delta_t, y_V, y_alpha, y_theta, y_q, y_h, xi_true, condition_index`.
//! States are error coordinates about the trim point, inputs are physical,
//! and `condition_index` is 1-based in the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::vehicle::{InputVec, StateVec, MORPH_GRID, NUM_CONDITIONS};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub t: f64,
    /// Error state `x_n − x_e`.
    pub x: StateVec,
    /// Applied physical input.
    pub u: InputVec,
    /// Noisy label of the shifted drift `f(x, ξ)`.
    pub y: StateVec,
    pub xi_true: f64,
    /// Zero-based index into [`MORPH_GRID`].
    pub condition: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    x_v: f64,
    x_alpha: f64,
    x_theta: f64,
    x_q: f64,
    x_h: f64,
    u_delta_e: f64,
    u_delta_t: f64,
    y_v: f64,
    y_alpha: f64,
    y_theta: f64,
    y_q: f64,
    y_h: f64,
    xi_true: f64,
    condition_index: usize,
}

impl From<&DatasetRecord> for Row {
    fn from(r: &DatasetRecord) -> Self {
        Row {
            t: r.t,
            x_v: r.x[0],
            x_alpha: r.x[1],
            x_theta: r.x[2],
            x_q: r.x[3],
            x_h: r.x[4],
            u_delta_e: r.u[0],
            u_delta_t: r.u[1],
            y_v: r.y[0],
            y_alpha: r.y[1],
            y_theta: r.y[2],
            y_q: r.y[3],
            y_h: r.y[4],
            xi_true: r.xi_true,
            condition_index: r.condition + 1,
        }
    }
}

impl TryFrom<Row> for DatasetRecord {
    type Error = Error;
    fn try_from(r: Row) -> Result<Self> {
        if !(1..=NUM_CONDITIONS).contains(&r.condition_index) {
            return Err(Error::Format(format!(
                "condition_index {} outside 1..={NUM_CONDITIONS}",
                r.condition_index
            )));
        }
        Ok(DatasetRecord {
            t: r.t,
            x: StateVec::new(r.x_v, r.x_alpha, r.x_theta, r.x_q, r.x_h),
            u: InputVec::new(r.u_delta_e, r.u_delta_t),
            y: StateVec::new(r.y_v, r.y_alpha, r.y_theta, r.y_q, r.y_h),
            xi_true: r.xi_true,
            condition: r.condition_index - 1,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn new(records: Vec<DatasetRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record indices grouped by condition, in file order.
    pub fn by_condition(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); NUM_CONDITIONS];
        for (i, r) in self.records.iter().enumerate() {
            out[r.condition].push(i);
        }
        out
    }

    /// Checks that every condition label agrees with its morph ratio.
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.condition >= NUM_CONDITIONS || (MORPH_GRID[r.condition] - r.xi_true).abs() > 1e-9 {
                return Err(Error::Format(format!(
                    "record at t = {} has condition {} but xi = {}",
                    r.t,
                    r.condition + 1,
                    r.xi_true
                )));
            }
            if !(r.x.iter().chain(r.u.iter()).chain(r.y.iter()).all(|v| v.is_finite())) {
                return Err(Error::Format(format!("non-finite value at t = {}", r.t)));
            }
        }
        Ok(())
    }

    /// Fails with [`Error::InsufficientData`] if any condition has fewer
    /// than `need` records.
    pub fn require_per_condition(&self, need: usize) -> Result<()> {
        for (k, idx) in self.by_condition().iter().enumerate() {
            if idx.len() < need {
                return Err(Error::InsufficientData {
                    condition: k + 1,
                    have: idx.len(),
                    need,
                });
            }
        }
        Ok(())
    }

    /// Splits each condition's trajectory in time: the last `fraction` of
    /// its records (by `t`) are held out.
    pub fn split_holdout(&self, fraction: f64) -> (Dataset, Dataset) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for mut idx in self.by_condition() {
            idx.sort_by(|&a, &b| self.records[a].t.total_cmp(&self.records[b].t));
            let n_held = ((idx.len() as f64) * fraction).round() as usize;
            let cut = idx.len() - n_held.min(idx.len());
            train.extend(idx[..cut].iter().map(|&i| self.records[i].clone()));
            held.extend(idx[cut..].iter().map(|&i| self.records[i].clone()));
        }
        (Dataset::new(train), Dataset::new(held))
    }

    /// Error states as columns (`5 × N`).
    pub fn states(&self) -> Matrix {
        Matrix::from_fn(5, self.len(), |i, j| self.records[j].x[i])
    }

    /// Labels as columns (`5 × N`).
    pub fn labels(&self) -> Matrix {
        Matrix::from_fn(5, self.len(), |i, j| self.records[j].y[i])
    }

    pub fn conditions(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.condition).collect()
    }

    /// Records of one condition.
    pub fn condition(&self, k: usize) -> Dataset {
        Dataset::new(self.records.iter().filter(|r| r.condition == k).cloned().collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(Row::from(r))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let records = rdr
            .deserialize::<Row>()
            .map(|row| DatasetRecord::try_from(row?))
            .collect::<Result<Vec<_>>>()?;
        let ds = Dataset::new(records);
        ds.validate()?;
        Ok(ds)
    }
}

//! Linear-quadratic regulator about the trim point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::vehicle::{self, InputVec, StateVec, TrimPoint, VehicleParams};

/// Optimal state-feedback gain `K = R⁻¹BᵀP`.
pub fn lqr_gain(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let p = linalg::solve_are(a, b, q, r)?;
    linalg::solve_spd(r, &(b.transpose() * p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrWeights {
    pub q: [f64; 5],
    pub r: [f64; 2],
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: [200.0, 8000.0, 8000.0, 30000.0, 200.0],
            r: [3000.0, 0.5],
        }
    }
}

/// Baseline regulator designed on the Jacobian linearization at fixed
/// morph ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrBaseline {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub p: Matrix,
    /// `2 × 5` gain.
    pub k: Matrix,
    pub trim: TrimPoint,
}

impl LqrBaseline {
    pub fn design(params: &VehicleParams, trim: &TrimPoint, weights: &LqrWeights) -> Result<Self> {
        let (a, b) = vehicle::linearize(params, trim)?;
        let a = Matrix::from_column_slice(5, 5, a.as_slice());
        let b = Matrix::from_column_slice(5, 2, b.as_slice());
        Self::from_model(a, b, weights, *trim)
    }

    pub fn from_model(a: Matrix, b: Matrix, weights: &LqrWeights, trim: TrimPoint) -> Result<Self> {
        let q = Matrix::from_diagonal(&Vector::from_column_slice(&weights.q));
        let r = Matrix::from_diagonal(&Vector::from_column_slice(&weights.r));
        let p = linalg::solve_are(&a, &b, &q, &r)?;
        let k = linalg::solve_spd(&r, &(b.transpose() * &p))?;
        if !linalg::is_hurwitz(&(&a - &b * &k)) {
            return Err(Error::NotStabilizable);
        }
        Ok(Self { a, b, q, r, p, k, trim })
    }

    /// Physical command `u_e − K(x_n − x_e)` before noise and saturation.
    pub fn control(&self, x_n: &StateVec) -> InputVec {
        self.control_error(&(x_n - self.trim.state())) + self.trim.input()
    }

    /// `−K·x` in error coordinates.
    pub fn control_error(&self, x_err: &StateVec) -> InputVec {
        let xe = Vector::from_column_slice(x_err.as_slice());
        let u = -(&self.k * xe);
        InputVec::new(u[0], u[1])
    }

    /// `xᵀPx` for an error state.
    pub fn lyapunov_value(&self, x_err: &StateVec) -> f64 {
        let xe = Vector::from_column_slice(x_err.as_slice());
        xe.dot(&(&self.p * &xe))
    }

    /// Closed-loop matrix `A − BK`.
    pub fn closed_loop(&self) -> Matrix {
        &self.a - &self.b * &self.k
    }
}

//! Fixed-step classical Runge–Kutta.

use nalgebra::SVector;

use crate::error::{Error, Result};

/// One RK4 step of `ẋ = f(x)` with step `dt`.
pub fn rk4_step<const N: usize, F>(mut f: F, x: &SVector<f64, N>, dt: f64) -> Result<SVector<f64, N>>
where
    F: FnMut(&SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let k1 = f(x)?;
    let k2 = f(&(x + k1 * (0.5 * dt)))?;
    let k3 = f(&(x + k2 * (0.5 * dt)))?;
    let k4 = f(&(x + k3 * dt))?;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFiniteState)
    }
}

//! Independent reference solutions and instance generators for the
//! integration tests.

#![allow(dead_code)]

use morphnash::game::{GameWeights, SdModel};
use morphnash::linalg::{self, Matrix};
use nalgebra::{DMatrix, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_hurwitz(r: &mut impl Rng, n: usize) -> Matrix {
    let m = random_matrix(r, n, n);
    let shift = linalg::spectral_abscissa(&m) + r.random_range(0.1..1.0);
    m - DMatrix::identity(n, n) * shift
}

/// `MMᵀ + floor·I`.
pub fn random_psd(r: &mut impl Rng, n: usize, floor: f64) -> Matrix {
    let m = random_matrix(r, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Lyapunov solution `AᵀP + PA + Q = 0` by Cayley transform to the
/// discrete equation `P = A_dᵀPA_d + Q_d`, then Smith doubling.
pub fn lyapunov_smith(a: &Matrix, q: &Matrix) -> Matrix {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let s = a.norm().max(1e-3) / (n as f64).sqrt();
    let u = (&eye * s - a).try_inverse().expect("sI - A invertible for Hurwitz A");
    let mut m = (&eye * s + a) * &u;
    let mut x = u.transpose() * q * &u * (2.0 * s);
    for _ in 0..80 {
        x = &x + m.transpose() * &x * &m;
        m = &m * &m;
        if m.norm() < 1e-18 {
            break;
        }
    }
    x
}

type M5 = SMatrix<f64, 5, 5>;

/// Stabilizing ARE solution as the steady state of the Riccati ODE
/// `Ṗ = AᵀP + PA − PSP + Q`, `P(0) = 0`, integrated with classical RK4.
/// Returns `None` if no steady state is reached within the horizon.
pub fn are_by_riccati_ode(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Option<Matrix> {
    assert_eq!(a.nrows(), 5);
    let s_dyn = b * r.clone().try_inverse()? * b.transpose();
    let a = M5::from_iterator(a.iter().copied());
    let s = M5::from_iterator(s_dyn.iter().copied());
    let q = M5::from_iterator(q.iter().copied());
    let rhs = |p: &M5| a.transpose() * p + p * a - p * s * p + q;
    let scale = a.norm() + s.norm() + q.norm().sqrt();
    let dt = 0.05 / scale.max(1.0);
    let mut p = M5::zeros();
    let mut t = 0.0;
    while t < 5.0e3 {
        let k1 = rhs(&p);
        let k2 = rhs(&(p + k1 * (0.5 * dt)));
        let k3 = rhs(&(p + k2 * (0.5 * dt)));
        let k4 = rhs(&(p + k3 * dt));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        t += dt;
        if !p.iter().all(|v| v.is_finite()) {
            return None;
        }
        if k1.norm() <= 1e-12 * (1.0 + p.norm()) {
            return Some(DMatrix::from_iterator(5, 5, p.iter().copied()));
        }
    }
    None
}

/// Scalar two-player game with zero drift.
pub fn scalar_game(b_u: f64, b_a: f64, q_u: f64, q_a: f64, r_u: f64, r_a: f64) -> (SdModel, GameWeights) {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    (
        SdModel::new(m(b_u), m(b_a)).unwrap(),
        GameWeights::new(m(q_u), m(q_a), m(r_u), m(r_a)).unwrap(),
    )
}

/// Positive Nash pair of the scalar zero-drift game by bisection.
///
/// With `s = b²/r`, the first equation gives `p_a = (q_u − s_u p_u²)/(2 s_a p_u)`;
/// substituting into the second leaves a function of `p_u` that increases
/// strictly on `(0, √(q_u/s_u))` and changes sign there.
pub fn scalar_nash_bisection(s_u: f64, s_a: f64, q_u: f64, q_a: f64) -> (f64, f64) {
    let p_a_of = |p_u: f64| (q_u - s_u * p_u * p_u) / (2.0 * s_a * p_u);
    let g = |p_u: f64| {
        let p_a = p_a_of(p_u);
        -2.0 * s_u * p_u * p_a - s_a * p_a * p_a + q_a
    };
    let (mut lo, mut hi) = (0.0, (q_u / s_u).sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_u = 0.5 * (lo + hi);
    (p_u, p_a_of(p_u))
}

/// Coupled residuals written out term by term, without the library's
/// coupling helpers.
pub fn csdre_residuals_direct(model: &SdModel, w: &GameWeights, p_u: &Matrix, p_a: &Matrix) -> (Matrix, Matrix) {
    let s_u = &model.b_u * w.r_u.clone().try_inverse().unwrap() * model.b_u.transpose();
    let s_a = &model.b_a * w.r_a.clone().try_inverse().unwrap() * model.b_a.transpose();
    let a_for_u = &model.a - &s_a * p_a;
    let a_for_a = &model.a - &s_u * p_u;
    let res_u = a_for_u.transpose() * p_u + p_u * &a_for_u - p_u * &s_u * p_u + &w.q_u;
    let res_a = a_for_a.transpose() * p_a + p_a * &a_for_a - p_a * &s_a * p_a + &w.q_a;
    (res_u, res_a)
}

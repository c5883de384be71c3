//! Dense small-matrix solvers: continuous Lyapunov and algebraic Riccati
//! equations, eigenvalue-based stability tests, and spectral normalization.
//!
//! Everything here is a pure function of its arguments. Matrices are
//! `nalgebra::DMatrix<f64>` with the dimension carried at runtime; the game
//! controller works with n = 5 and coefficient widths up to a few dozen.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues with real part at or above this are treated as unstable.
pub const HURWITZ_MARGIN: f64 = -1e-12;

const SCHUR_MAX_ITER: usize = 10_000;
const NK_MAX_ITER: usize = 100;
const SIGN_MAX_ITER: usize = 100;

/// Eigenvalues of a general real square matrix, or `None` if the Schur
/// decomposition fails to converge.
pub fn eigenvalues(a: &Matrix) -> Option<Vec<Complex<f64>>> {
    if a.nrows() == 1 {
        return Some(vec![Complex::new(a[(0, 0)], 0.0)]);
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum of `a`; `+inf` when the eigenvalue
/// computation fails or the matrix has non-finite entries.
pub fn spectral_abscissa(a: &Matrix) -> f64 {
    if !is_finite(a) {
        return f64::INFINITY;
    }
    eigenvalues(a)
        .map(|ev| ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
        .unwrap_or(f64::INFINITY)
}

pub fn is_hurwitz(a: &Matrix) -> bool {
    a.is_square() && spectral_abscissa(a) < HURWITZ_MARGIN
}

pub fn is_finite(a: &Matrix) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &Matrix) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

fn check_square(a: &Matrix, name: &str) -> Result<()> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Solves `AᵀP + PA + Q = 0` for symmetric `P`.
///
/// The equation is vectorized as `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q)` and
/// solved densely; at n ≤ 25 the system is at most 625×625.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    if q.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, A is {}x{}",
            q.nrows(),
            q.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let max_real = spectral_abscissa(a);
    if max_real >= HURWITZ_MARGIN {
        return Err(Error::NotHurwitz { max_real });
    }

    let n = a.nrows();
    let at = a.transpose();
    let eye = Matrix::identity(n, n);
    let kron = eye.kronecker(&at) + at.kronecker(&eye);
    // column-major storage already is vec(Q)
    let rhs = -Vector::from_column_slice(q.as_slice());
    let lu = kron.lu();
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let p = Matrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&p))
}

/// Residual `AᵀP + PA − PBR⁻¹BᵀP + Q` of the continuous algebraic Riccati
/// equation.
pub fn are_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let g = control_gramian_term(b, r)?;
    Ok(a.transpose() * p + p * a - p * &g * p + q)
}

/// `B R⁻¹ Bᵀ`, with `R` checked for positive definiteness.
pub fn control_gramian_term(b: &Matrix, r: &Matrix) -> Result<Matrix> {
    let r_inv_bt = solve_spd(r, &b.transpose())?;
    Ok(b * r_inv_bt)
}

/// Solves `M X = rhs` for symmetric positive definite `M`.
pub fn solve_spd(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("weighting matrix"))?;
    Ok(chol.solve(rhs))
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
///
/// Newton–Kleinman iteration, each step one Lyapunov solve. The initial
/// stabilizing gain is `K₀ = 0` when `A` is already Hurwitz, otherwise
/// `K₀ = c·Bᵀ` for the first `c ∈ {1, 10, …, 10⁶}` that stabilizes, and
/// finally the Hamiltonian matrix-sign method.
pub fn solve_are(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    let n = a.nrows();
    if b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "A {n}x{n}, B {}x{}, Q {}x{}, R {}x{}",
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let r_inv_bt = solve_spd(r, &b.transpose())?;
    let g = b * &r_inv_bt;
    let q = symmetrize(q);

    let k0 = initial_gain(a, b, &g, &q)?;
    let p = newton_kleinman(a, b, r, &r_inv_bt, &q, k0)?;

    let residual = (a.transpose() * &p + &p * a - &p * &g * &p + &q).norm();
    if residual > 1e-8 * (1.0 + q.norm()) {
        return Err(Error::NoConvergence {
            iterations: NK_MAX_ITER,
            last_change: residual,
        });
    }
    if !is_hurwitz(&(a - &g * &p)) {
        return Err(Error::NotStabilizable);
    }
    Ok(p)
}

fn initial_gain(a: &Matrix, b: &Matrix, g: &Matrix, q: &Matrix) -> Result<Matrix> {
    let m = b.ncols();
    let n = a.nrows();
    if is_hurwitz(a) {
        return Ok(Matrix::zeros(m, n));
    }
    let bt = b.transpose();
    let mut c = 1.0;
    while c <= 1e6 {
        let k = &bt * c;
        if is_hurwitz(&(a - b * &k)) {
            return Ok(k);
        }
        c *= 10.0;
    }
    let p = hamiltonian_sign_solution(a, g, q)?;
    if !is_hurwitz(&(a - g * &p)) {
        return Err(Error::NotStabilizable);
    }
    // K = R⁻¹BᵀP is recovered by the caller's first Newton step; here we
    // only need some stabilizing K, and G·P = B·(R⁻¹BᵀP).
    let r_inv_bt_p = least_squares(b, &(g * &p))?;
    if !is_hurwitz(&(a - b * &r_inv_bt_p)) {
        return Err(Error::NotStabilizable);
    }
    Ok(r_inv_bt_p)
}

fn newton_kleinman(a: &Matrix, b: &Matrix, r: &Matrix, r_inv_bt: &Matrix, q: &Matrix, k0: Matrix) -> Result<Matrix> {
    let mut k = k0;
    let mut prev: Option<Matrix> = None;
    let mut last_change = f64::INFINITY;
    for _ in 0..NK_MAX_ITER {
        let closed = a - b * &k;
        let rhs = q + k.transpose() * r * &k;
        let p = match solve_lyapunov(&closed, &rhs) {
            Ok(p) => p,
            Err(Error::NotHurwitz { .. }) => return Err(Error::NotStabilizable),
            Err(e) => return Err(e),
        };
        k = r_inv_bt * &p;
        if let Some(prev) = prev.as_ref() {
            let change = (&p - prev).norm();
            let scale = 1.0 + p.norm();
            // quadratic convergence stalls at rounding level; stop once the
            // change stops shrinking there
            if change <= 1e-14 * scale || (change <= 1e-10 * scale && change >= last_change) {
                return Ok(p);
            }
            last_change = change;
        }
        prev = Some(p);
    }
    Err(Error::NoConvergence {
        iterations: NK_MAX_ITER,
        last_change,
    })
}

/// Stabilizing Riccati solution from the matrix sign function of the
/// Hamiltonian `[[A, −G], [−Q, −Aᵀ]]`.
pub fn hamiltonian_sign_solution(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let mut z = Matrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-g));
    z.view_mut((n, 0), (n, n)).copy_from(&(-q));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut converged = false;
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return Err(Error::NotStabilizable);
        }
        let inv = lu.try_inverse().ok_or(Error::NotStabilizable)?;
        // determinant scaling speeds up the early iterations
        let c = det.abs().powf(-1.0 / (2.0 * n as f64));
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if !is_finite(&z) {
            return Err(Error::NotStabilizable);
        }
        if change <= 1e-12 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotStabilizable);
    }

    let eye = Matrix::identity(n, n);
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(z.view((n, n), (n, n)) + &eye));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z.view((n, 0), (n, n))));
    let p = least_squares(&lhs, &rhs)?;
    if !is_finite(&p) {
        return Err(Error::NotStabilizable);
    }
    Ok(symmetrize(&p))
}

/// Minimum-norm least-squares solution of `M X = rhs` via SVD.
pub fn least_squares(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let svd = m.clone().svd(true, true);
    let tol = f64::EPSILON * m.nrows().max(m.ncols()) as f64 * svd.singular_values.max();
    svd.solve(rhs, tol)
        .map_err(|_| Error::DimensionMismatch("least-squares solve failed".into()))
}

/// Rescales `w` so that its largest singular value does not exceed `bound`.
///
/// # Panics
/// If `bound` is not positive.
pub fn spectral_normalize(w: &Matrix, bound: f64) -> Matrix {
    assert!(bound > 0.0, "spectral bound must be positive");
    let sigma = spectral_norm(w);
    if sigma <= bound {
        w.clone()
    } else {
        w * (bound / sigma)
    }
}

/// In-place variant used by the training loop.
pub fn spectral_normalize_in_place(w: &mut Matrix, bound: f64) {
    let sigma = spectral_norm(w);
    if sigma > bound {
        *w *= bound / sigma;
    }
}

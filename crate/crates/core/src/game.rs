//! Two-player nonzero-sum game between the flight input `u` and the
//! morphing coefficient `a`.
//!
//! At each frozen error state the plant is written as
//! `ẋ = A x + B_u u + B_a a` with `A = 0`, `B_u = g(x)` and `B_a = Φ(x)`.
//! The coupled Riccati pair is initialized from two auxiliary AREs and
//! refined by Lyapunov iterations; [`online_step`] wraps this in the
//! warm-started, time-budgeted real-time loop.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierParams};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::meta::{CoeffVector, PhiNetwork};
use crate::vehicle::{InputVec, StateVec, TrimPoint, VehicleParams, MORPH_GRID, STATE_DIM};

/// Frozen-state coefficient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SdModel {
    pub a: Matrix,
    pub b_u: Matrix,
    pub b_a: Matrix,
}

impl SdModel {
    /// Model with `A = 0`.
    pub fn new(b_u: Matrix, b_a: Matrix) -> Result<Self> {
        let n = b_u.nrows();
        Self::with_drift(Matrix::zeros(n, n), b_u, b_a)
    }

    /// Model with an explicit `A`, used for oracle instances.
    pub fn with_drift(a: Matrix, b_u: Matrix, b_a: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b_u.nrows() != n || b_a.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B_u {}x{}, B_a {}x{}",
                a.nrows(),
                a.ncols(),
                b_u.nrows(),
                b_u.ncols(),
                b_a.nrows(),
                b_a.ncols()
            )));
        }
        Ok(Self { a, b_u, b_a })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
}

/// `A = 0`, `B_u = g(x)`, `B_a = Φ(x)` at error state `x`.
pub fn assemble_sd_model(x: &StateVec, params: &VehicleParams, trim: &TrimPoint, phi: &PhiNetwork) -> Result<SdModel> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let g = params.shifted_input_matrix(x, trim)?;
    let b_u = Matrix::from_column_slice(STATE_DIM, 2, g.as_slice());
    SdModel::new(b_u, phi.feature_map(x).matrix())
}

/// Tunable controller settings as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub q_u: Vec<f64>,
    pub q_a: Vec<f64>,
    pub r_u: Vec<f64>,
    /// Diagonal of `R_a`; empty selects [`default_r_a`] for `coeff_dim`.
    pub r_a: Vec<f64>,
    /// Width `h` of the morphing coefficient.
    pub coeff_dim: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Sampling period `T`, s.
    pub period: f64,
    /// Stop iterating once a step has used `period` of wall-clock time.
    pub enforce_budget: bool,
    /// Consecutive failed periods tolerated before aborting.
    pub hold_limit: u32,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            q_u: vec![20.0, 2000.0, 700.0, 200.0, 2.0],
            q_a: vec![20.0, 2000.0, 700.0, 200.0, 2.0],
            r_u: vec![1500.0, 0.25],
            r_a: Vec::new(),
            coeff_dim: 25,
            epsilon: 1e-6,
            max_iter: 50,
            period: 0.01,
            enforce_budget: true,
            hold_limit: 5,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("game.epsilon must be positive".into()));
        }
        if !(self.period > 0.0) {
            return Err(Error::Config("game.period must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("game.max_iter must be at least 1".into()));
        }
        if self.coeff_dim < 5 {
            return Err(Error::Config("game.coeff_dim must be at least 5".into()));
        }
        self.weights().map(|_| ())
    }

    pub fn r_a_diagonal(&self) -> Vec<f64> {
        if self.r_a.is_empty() {
            default_r_a(self.coeff_dim)
        } else {
            self.r_a.clone()
        }
    }

    pub fn weights(&self) -> Result<GameWeights> {
        let diag = |v: &[f64]| Matrix::from_diagonal(&Vector::from_column_slice(v));
        if self.q_u.len() != STATE_DIM || self.q_a.len() != STATE_DIM || self.r_u.len() != 2 {
            return Err(Error::Config("game.q_u and q_a need 5 entries, r_u needs 2".into()));
        }
        let r_a = self.r_a_diagonal();
        if r_a.len() != self.coeff_dim {
            return Err(Error::Config(format!(
                "game.r_a has {} entries but coeff_dim is {}",
                r_a.len(),
                self.coeff_dim
            )));
        }
        GameWeights::new(diag(&self.q_u), diag(&self.q_a), diag(&self.r_u), diag(&r_a))
            .map_err(|e| Error::Config(format!("game weights: {e}")))
    }

    pub fn iteration_options(&self) -> IterationOptions {
        IterationOptions {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            budget: self.enforce_budget.then(|| Duration::from_secs_f64(self.period)),
        }
    }
}

/// Default `R_a` diagonal of width `h`: `h − 5` entries of 100 followed by
/// `[200, 200, 100, 1, 3]`.
pub fn default_r_a(h: usize) -> Vec<f64> {
    const TAIL: [f64; 5] = [200.0, 200.0, 100.0, 1.0, 3.0];
    let mut v = vec![100.0; h.saturating_sub(TAIL.len())];
    v.extend(&TAIL[TAIL.len().saturating_sub(h)..]);
    v
}

/// Quadratic weights of both players with cached `R⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameWeights {
    pub q_u: Matrix,
    pub q_a: Matrix,
    pub r_u: Matrix,
    pub r_a: Matrix,
    r_u_inv: Matrix,
    r_a_inv: Matrix,
}

impl GameWeights {
    /// Checks symmetry, `Q ⪰ 0` and `R ≻ 0`.
    pub fn new(q_u: Matrix, q_a: Matrix, r_u: Matrix, r_a: Matrix) -> Result<Self> {
        for (name, q) in [("Q_u", &q_u), ("Q_a", &q_a)] {
            let asymmetric = !q.is_square() || (q - q.transpose()).norm() > 1e-12 * (1.0 + q.norm());
            if asymmetric || linalg::min_sym_eigenvalue(q) < -1e-12 * (1.0 + q.norm()) {
                return Err(Error::NotPositiveDefinite(name));
            }
        }
        if q_u.shape() != q_a.shape() {
            return Err(Error::DimensionMismatch("Q_u and Q_a differ in size".into()));
        }
        let r_u_inv = linalg::solve_spd(&r_u, &Matrix::identity(r_u.nrows(), r_u.nrows()))
            .map_err(|_| Error::NotPositiveDefinite("R_u"))?;
        let r_a_inv = linalg::solve_spd(&r_a, &Matrix::identity(r_a.nrows(), r_a.nrows()))
            .map_err(|_| Error::NotPositiveDefinite("R_a"))?;
        Ok(Self {
            q_u,
            q_a,
            r_u,
            r_a,
            r_u_inv,
            r_a_inv,
        })
    }

    pub fn r_u_inv(&self) -> &Matrix {
        &self.r_u_inv
    }

    pub fn r_a_inv(&self) -> &Matrix {
        &self.r_a_inv
    }

    /// `S_u = B_u R_u⁻¹ B_uᵀ` and `S_a = B_a R_a⁻¹ B_aᵀ`.
    pub fn coupling(&self, model: &SdModel) -> Result<(Matrix, Matrix)> {
        if model.b_u.ncols() != self.r_u.nrows()
            || model.b_a.ncols() != self.r_a.nrows()
            || model.state_dim() != self.q_u.nrows()
        {
            return Err(Error::DimensionMismatch(format!(
                "model (n={}, u={}, a={}) vs weights (n={}, u={}, a={})",
                model.state_dim(),
                model.b_u.ncols(),
                model.b_a.ncols(),
                self.q_u.nrows(),
                self.r_u.nrows(),
                self.r_a.nrows()
            )));
        }
        let s_u = &model.b_u * &self.r_u_inv * model.b_u.transpose();
        let s_a = &model.b_a * &self.r_a_inv * model.b_a.transpose();
        Ok((linalg::symmetrize(&s_u), linalg::symmetrize(&s_a)))
    }
}

/// Candidate solution `(P_u, P_a)` of the coupled Riccati equations.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPair {
    pub p_u: Matrix,
    pub p_a: Matrix,
}

/// `A_c = A − S_u P_u − S_a P_a`.
pub fn closed_loop_matrix(pair: &RiccatiPair, model: &SdModel, s_u: &Matrix, s_a: &Matrix) -> Matrix {
    &model.a - s_u * &pair.p_u - s_a * &pair.p_a
}

/// `(u, a) = (−R_u⁻¹B_uᵀP_u x, −R_a⁻¹B_aᵀP_a x)`.
pub fn nash_feedback(pair: &RiccatiPair, model: &SdModel, weights: &GameWeights, x: &Vector) -> (Vector, Vector) {
    let u = -(weights.r_u_inv() * model.b_u.transpose() * (&pair.p_u * x));
    let a = -(weights.r_a_inv() * model.b_a.transpose() * (&pair.p_a * x));
    (u, a)
}

/// Residual matrices of both coupled equations,
/// `sym(P_u A_a) − P_u S_u P_u + Q_u` with `A_a = A − S_a P_a`, and the
/// mirrored expression for `P_a`.
pub fn csdre_residual_matrices(pair: &RiccatiPair, model: &SdModel, weights: &GameWeights) -> Result<(Matrix, Matrix)> {
    let (s_u, s_a) = weights.coupling(model)?;
    let a_a = &model.a - &s_a * &pair.p_a;
    let a_u = &model.a - &s_u * &pair.p_u;
    let pa_u = &pair.p_u * &a_a;
    let pa_a = &pair.p_a * &a_u;
    let res_u = &pa_u + pa_u.transpose() - &pair.p_u * &s_u * &pair.p_u + &weights.q_u;
    let res_a = &pa_a + pa_a.transpose() - &pair.p_a * &s_a * &pair.p_a + &weights.q_a;
    Ok((res_u, res_a))
}

/// Frobenius norms of the two coupled-equation residuals.
pub fn csdre_residuals(pair: &RiccatiPair, model: &SdModel, weights: &GameWeights) -> Result<(f64, f64)> {
    let (ru, ra) = csdre_residual_matrices(pair, model, weights)?;
    Ok((ru.norm(), ra.norm()))
}

/// Which player's auxiliary Riccati equation was solved first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitOrder {
    FlightFirst,
    MorphFirst,
}

/// Stabilizing starting pair from two sequential AREs.
///
/// Solves for `P_u⁰` on `(A, B_u)` and then `P_a⁰` on `(A − S_u P_u⁰, B_a)`.
/// When `(A, B_u)` alone is not stabilizable the roles are swapped.
pub fn init_riccati(model: &SdModel, weights: &GameWeights) -> Result<(RiccatiPair, InitOrder)> {
    let (s_u, s_a) = weights.coupling(model)?;
    let flight_first = || -> Result<RiccatiPair> {
        let p_u = linalg::solve_are(&model.a, &model.b_u, &weights.q_u, &weights.r_u)?;
        let a_u = &model.a - &s_u * &p_u;
        let p_a = linalg::solve_are(&a_u, &model.b_a, &weights.q_a, &weights.r_a)?;
        Ok(RiccatiPair { p_u, p_a })
    };
    let (pair, order) = match flight_first() {
        Ok(p) => (p, InitOrder::FlightFirst),
        Err(e) if e.is_solver_failure() => {
            let p_a = linalg::solve_are(&model.a, &model.b_a, &weights.q_a, &weights.r_a)?;
            let a_a = &model.a - &s_a * &p_a;
            let p_u = linalg::solve_are(&a_a, &model.b_u, &weights.q_u, &weights.r_u)?;
            (RiccatiPair { p_u, p_a }, InitOrder::MorphFirst)
        }
        Err(e) => return Err(e),
    };
    if !linalg::is_hurwitz(&closed_loop_matrix(&pair, model, &s_u, &s_a)) {
        return Err(Error::NotStabilizable);
    }
    Ok((pair, order))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Cooperative wall-clock budget, checked between iterations.
    pub budget: Option<Duration>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iter: 50,
            budget: None,
        }
    }
}

/// Diagnostics of one Lyapunov-iteration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// `max(‖ΔP_u‖, ‖ΔP_a‖)` in the Frobenius norm.
    pub change: f64,
    pub residual_u: f64,
    pub residual_a: f64,
    /// Smallest eigenvalue of `P_u⁽ⁱ⁾ − P_u⁽ⁱ⁺¹⁾`.
    pub decrease_u: f64,
    /// Smallest eigenvalue of `P_a⁽ⁱ⁾ − P_a⁽ⁱ⁺¹⁾`.
    pub decrease_a: f64,
    /// Spectral abscissa of `A_c` at the new pair.
    pub abscissa: f64,
}

impl IterationRecord {
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.decrease_u >= -tol && self.decrease_a >= -tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub pair: RiccatiPair,
    pub iterations: usize,
    /// True when the change criterion was met, false when the wall-clock
    /// budget ran out first.
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub residual_u: f64,
    pub residual_a: f64,
}

/// Lyapunov iterations
/// `sym(P_l⁽ⁱ⁺¹⁾ A_c(P⁽ⁱ⁾)) + P_l⁽ⁱ⁾ S_l P_l⁽ⁱ⁾ + Q_l = 0`, `l ∈ {u, a}`.
pub fn lyapunov_iterations(
    init: &RiccatiPair,
    model: &SdModel,
    weights: &GameWeights,
    opts: &IterationOptions,
) -> Result<IterationOutcome> {
    let start = Instant::now();
    let (s_u, s_a) = weights.coupling(model)?;
    let mut a_c = closed_loop_matrix(init, model, &s_u, &s_a);
    if !linalg::is_hurwitz(&a_c) {
        return Err(Error::LostStability { iteration: 0 });
    }
    let mut pair = init.clone();
    let mut history = Vec::new();
    let mut last_change = f64::INFINITY;
    for i in 0..opts.max_iter {
        let y_u = &pair.p_u * &s_u * &pair.p_u + &weights.q_u;
        let y_a = &pair.p_a * &s_a * &pair.p_a + &weights.q_a;
        let lyap = |y: &Matrix| match linalg::solve_lyapunov(&a_c, y) {
            Err(Error::NotHurwitz { .. }) => Err(Error::LostStability { iteration: i }),
            other => other,
        };
        let next = RiccatiPair {
            p_u: lyap(&y_u)?,
            p_a: lyap(&y_a)?,
        };
        let d_u = &pair.p_u - &next.p_u;
        let d_a = &pair.p_a - &next.p_a;
        last_change = d_u.norm().max(d_a.norm());
        a_c = closed_loop_matrix(&next, model, &s_u, &s_a);
        let abscissa = linalg::spectral_abscissa(&a_c);
        let (residual_u, residual_a) = csdre_residuals(&next, model, weights)?;
        history.push(IterationRecord {
            change: last_change,
            residual_u,
            residual_a,
            decrease_u: linalg::min_sym_eigenvalue(&d_u),
            decrease_a: linalg::min_sym_eigenvalue(&d_a),
            abscissa,
        });
        pair = next;
        if !(abscissa < linalg::HURWITZ_MARGIN) {
            return Err(Error::LostStability { iteration: i + 1 });
        }
        let converged = last_change <= opts.epsilon;
        let out_of_time = opts.budget.is_some_and(|b| start.elapsed() >= b);
        if converged || out_of_time {
            return Ok(IterationOutcome {
                pair,
                iterations: i + 1,
                converged,
                history,
                residual_u,
                residual_a,
            });
        }
    }
    Err(Error::MaxIterations {
        iterations: opts.max_iter,
        last_change,
    })
}

/// `(½(‖x‖²_{Q_u} + ‖u‖²_{R_u}), ½(‖x‖²_{Q_a} + ‖a‖²_{R_a}))`.
pub fn stage_costs(x: &Vector, u: &Vector, a: &Vector, weights: &GameWeights) -> (f64, f64) {
    let xq_u = x.dot(&(&weights.q_u * x));
    let xq_a = x.dot(&(&weights.q_a * x));
    (
        0.5 * (xq_u + u.dot(&(&weights.r_u * u))),
        0.5 * (xq_a + a.dot(&(&weights.r_a * a))),
    )
}

/// Everything the online loop reads but does not modify.
#[derive(Debug, Clone)]
pub struct GameController {
    pub params: VehicleParams,
    pub trim: TrimPoint,
    pub phi: PhiNetwork,
    pub classifier: ClassifierParams,
    pub weights: GameWeights,
    pub options: IterationOptions,
    pub hold_limit: u32,
}

impl GameController {
    pub fn new(
        params: VehicleParams,
        trim: TrimPoint,
        phi: PhiNetwork,
        classifier: ClassifierParams,
        config: &GameConfig,
    ) -> Result<Self> {
        config.validate()?;
        if phi.coeff_dim() != config.coeff_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature network gives h = {} but game.coeff_dim = {}",
                phi.coeff_dim(),
                config.coeff_dim
            )));
        }
        Ok(Self {
            params,
            trim,
            phi,
            classifier,
            weights: config.weights()?,
            options: config.iteration_options(),
            hold_limit: config.hold_limit,
        })
    }
}

/// Per-period solver state carried between calls of [`online_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineCache {
    pub pair: Option<RiccatiPair>,
    /// State at which `pair` was obtained with the iteration converged.
    pub converged_at: Option<(StateVec, f64, f64)>,
    pub last_t: Option<f64>,
    /// Last emitted `(u, a)` in error coordinates.
    pub last_command: Option<(InputVec, Vector)>,
    pub last_xi_hat: f64,
    pub consecutive_failures: u32,
    pub hold_limit: u32,
}

impl OnlineCache {
    /// Empty cache; `xi_hat` is reported if the very first period fails.
    pub fn new(hold_limit: u32, xi_hat: f64) -> Self {
        Self {
            pair: None,
            converged_at: None,
            last_t: None,
            last_command: None,
            last_xi_hat: xi_hat,
            consecutive_failures: 0,
            hold_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepTelemetry {
    pub iterations: usize,
    pub residual_u: f64,
    pub residual_a: f64,
    pub wall_time_s: f64,
    pub warm_started: bool,
    pub converged: bool,
    /// The previous command was re-issued after a solver failure.
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOutput {
    /// Flight input in error coordinates.
    pub u: InputVec,
    pub a: CoeffVector,
    /// Predicted drift `Φ(x)a`.
    pub f: StateVec,
    pub rho: Vector,
    pub xi_hat: f64,
    pub telemetry: StepTelemetry,
}

/// One sampling period: warm start or re-initialize, iterate, emit the Nash
/// pair and the morph-ratio estimate.
///
/// A period at exactly the state of the previous converged period reuses
/// its pair without iterating.
///
/// Solver failures re-issue the previous command for up to
/// `cache.hold_limit` consecutive periods before returning
/// [`Error::SolverFailure`]; other errors propagate immediately.
pub fn online_step(cache: &mut OnlineCache, x: &StateVec, t: f64, ctrl: &GameController) -> Result<OnlineOutput> {
    let start = Instant::now();
    let model = assemble_sd_model(x, &ctrl.params, &ctrl.trim, &ctrl.phi)?;
    match solve_period(cache, x, &model, ctrl, start) {
        Ok((pair, mut telemetry)) => {
            let xv = Vector::from_column_slice(x.as_slice());
            let (u, a) = nash_feedback(&pair, &model, &ctrl.weights, &xv);
            let u = InputVec::new(u[0], u[1]);
            let a = CoeffVector(a);
            let f = ctrl.phi.feature_map(x).predict(&a);
            let rho = classifier::classify(&ctrl.classifier, &classifier::chi(&f, x));
            let xi_hat = classifier::estimate_xi(&rho, &MORPH_GRID)?.value();
            cache.pair = Some(pair);
            cache.converged_at = telemetry
                .converged
                .then_some((*x, telemetry.residual_u, telemetry.residual_a));
            cache.last_t = Some(t);
            cache.last_command = Some((u, a.0.clone()));
            cache.last_xi_hat = xi_hat;
            cache.consecutive_failures = 0;
            telemetry.wall_time_s = start.elapsed().as_secs_f64();
            Ok(OnlineOutput {
                u,
                a,
                f,
                rho,
                xi_hat,
                telemetry,
            })
        }
        Err(e) if e.is_solver_failure() => {
            cache.consecutive_failures += 1;
            cache.pair = None;
            cache.converged_at = None;
            if cache.consecutive_failures > cache.hold_limit {
                return Err(Error::SolverFailure {
                    t,
                    periods: cache.consecutive_failures,
                    reason: e.to_string(),
                });
            }
            let (u, a) = cache
                .last_command
                .clone()
                .unwrap_or_else(|| (InputVec::zeros(), Vector::zeros(ctrl.weights.r_a.nrows())));
            let a = CoeffVector(a);
            let f = ctrl.phi.feature_map(x).predict(&a);
            let rho = classifier::classify(&ctrl.classifier, &classifier::chi(&f, x));
            cache.last_t = Some(t);
            Ok(OnlineOutput {
                u,
                a,
                f,
                rho,
                xi_hat: cache.last_xi_hat,
                telemetry: StepTelemetry {
                    held: true,
                    wall_time_s: start.elapsed().as_secs_f64(),
                    ..StepTelemetry::default()
                },
            })
        }
        Err(e) => Err(e),
    }
}

fn solve_period(
    cache: &OnlineCache,
    x: &StateVec,
    model: &SdModel,
    ctrl: &GameController,
    start: Instant,
) -> Result<(RiccatiPair, StepTelemetry)> {
    // same frozen model as a converged previous period: nothing to do
    if let (Some(pair), Some((x_prev, residual_u, residual_a))) = (&cache.pair, cache.converged_at) {
        if x_prev == *x {
            return Ok((
                pair.clone(),
                StepTelemetry {
                    residual_u,
                    residual_a,
                    warm_started: true,
                    converged: true,
                    ..StepTelemetry::default()
                },
            ));
        }
    }
    let (s_u, s_a) = ctrl.weights.coupling(model)?;
    let warm = cache
        .pair
        .as_ref()
        .filter(|p| linalg::is_hurwitz(&closed_loop_matrix(p, model, &s_u, &s_a)));
    let (init, warm_started) = match warm {
        Some(p) => (p.clone(), true),
        None => (init_riccati(model, &ctrl.weights)?.0, false),
    };
    let opts = IterationOptions {
        budget: ctrl.options.budget.map(|b| b.saturating_sub(start.elapsed())),
        ..ctrl.options
    };
    let out = lyapunov_iterations(&init, model, &ctrl.weights, &opts)?;
    Ok((
        out.pair,
        StepTelemetry {
            iterations: out.iterations,
            residual_u: out.residual_u,
            residual_a: out.residual_a,
            warm_started,
            converged: out.converged,
            ..StepTelemetry::default()
        },
    ))
}

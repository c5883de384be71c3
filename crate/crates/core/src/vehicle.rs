//! Longitudinal model of the variable-span aircraft.
//!
//! The plant is control-affine, `ẋ = f_n(x, ξ) + g_n(x)·u`, with state
//! `[V, α, θ, q, h]` (m/s, rad, rad, rad/s, m) and input `[δe, δt]`
//! (rad, % throttle). Aerodynamic coefficients are linear fits in altitude,
//! Mach number and morphing ratio. All fitted formulas take altitude in
//! kilometres; [`FlightState`] carries metres.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateVec = SVector<f64, 5>;
pub type InputVec = SVector<f64, 2>;
pub type StateMatrix = SMatrix<f64, 5, 5>;
pub type InputMatrix = SMatrix<f64, 5, 2>;

pub const STATE_DIM: usize = 5;
pub const INPUT_DIM: usize = 2;
pub const STATE_NAMES: [&str; 5] = ["V", "alpha", "theta", "q", "h"];
pub const INPUT_NAMES: [&str; 2] = ["delta_e", "delta_t"];

/// Altitude range over which the fits are used.
pub const ALTITUDE_RANGE: (f64, f64) = (0.0, 10_000.0);

/// Elevator limits in rad.
pub const ELEVATOR_RANGE: (f64, f64) = (-0.7, 0.7);
/// Throttle limits in percent.
pub const THROTTLE_RANGE: (f64, f64) = (0.0, 100.0);

/// Morphing ratios of the six canonical wingspan conditions, in class order.
pub const MORPH_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const NUM_CONDITIONS: usize = MORPH_GRID.len();

/// Airframe constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass, kg.
    pub mass: f64,
    pub gravity: f64,
    /// Wingspan at ξ = 0, m.
    pub span_min: f64,
    /// Wingspan at ξ = 1, m.
    pub span_max: f64,
    /// Wing reference area, m².
    pub wing_area: f64,
    /// Mean aerodynamic chord, m.
    pub chord: f64,
    /// Pitch inertia, kg·m².
    pub inertia_y: f64,
    /// Thrust per percent throttle, N/%.
    pub thrust_per_throttle: f64,
    // Roll/yaw inertias are carried for completeness; the longitudinal
    // model never reads them.
    pub inertia_x: f64,
    pub inertia_z: f64,
    pub inertia_xz: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1247.0,
            gravity: 9.8,
            span_min: 10.18,
            span_max: 20.36,
            wing_area: 17.09,
            chord: 1.74,
            inertia_y: 4067.5,
            thrust_per_throttle: 21.3,
            inertia_x: 1420.9,
            inertia_z: 4786.0,
            inertia_xz: 0.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("span_min", self.span_min),
            ("span_max", self.span_max),
            ("wing_area", self.wing_area),
            ("chord", self.chord),
            ("inertia_y", self.inertia_y),
            ("thrust_per_throttle", self.thrust_per_throttle),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("vehicle.{name} must be positive, got {v}")));
            }
        }
        if self.span_max <= self.span_min {
            return Err(Error::Config("vehicle.span_max must exceed span_min".into()));
        }
        Ok(())
    }
}

/// Physical longitudinal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightState {
    pub v: f64,
    pub alpha: f64,
    pub theta: f64,
    pub q: f64,
    pub h: f64,
}

impl FlightState {
    pub fn to_vector(&self) -> StateVec {
        StateVec::new(self.v, self.alpha, self.theta, self.q, self.h)
    }

    pub fn from_vector(x: &StateVec) -> Self {
        Self {
            v: x[0],
            alpha: x[1],
            theta: x[2],
            q: x[3],
            h: x[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    pub delta_e: f64,
    pub delta_t: f64,
}

impl ControlInput {
    pub fn to_vector(&self) -> InputVec {
        InputVec::new(self.delta_e, self.delta_t)
    }

    pub fn from_vector(u: &InputVec) -> Self {
        Self {
            delta_e: u[0],
            delta_t: u[1],
        }
    }

    pub fn is_admissible(&self) -> bool {
        (ELEVATOR_RANGE.0..=ELEVATOR_RANGE.1).contains(&self.delta_e)
            && (THROTTLE_RANGE.0..=THROTTLE_RANGE.1).contains(&self.delta_t)
    }
}

/// Normalized wingspan in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MorphRatio(f64);

impl MorphRatio {
    pub fn new(xi: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&xi) {
            Ok(Self(xi))
        } else {
            Err(Error::OutOfRange {
                quantity: "morph ratio",
                value: xi,
                min: 0.0,
                max: 1.0,
            })
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(xi: f64) -> Self {
        Self(if xi.is_nan() { 0.0 } else { xi.clamp(0.0, 1.0) })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn from_span(params: &VehicleParams, span: f64) -> Result<Self> {
        if !(params.span_min..=params.span_max).contains(&span) {
            return Err(Error::OutOfRange {
                quantity: "wingspan",
                value: span,
                min: params.span_min,
                max: params.span_max,
            });
        }
        Ok(Self(
            ((span - params.span_min) / (params.span_max - params.span_min)).clamp(0.0, 1.0),
        ))
    }

    pub fn span(self, params: &VehicleParams) -> f64 {
        params.span_min + self.0 * (params.span_max - params.span_min)
    }
}

impl TryFrom<f64> for MorphRatio {
    type Error = Error;
    fn try_from(xi: f64) -> Result<Self> {
        Self::new(xi)
    }
}

impl From<MorphRatio> for f64 {
    fn from(xi: MorphRatio) -> f64 {
        xi.0
    }
}

/// Index of the grid condition nearest to `xi`.
pub fn nearest_condition(xi: f64) -> usize {
    MORPH_GRID
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - xi).abs().total_cmp(&(b.1 - xi).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

fn check_altitude(h: f64) -> Result<()> {
    if !(ALTITUDE_RANGE.0..=ALTITUDE_RANGE.1).contains(&h) {
        return Err(Error::OutOfEnvelope {
            quantity: "altitude",
            value: h,
        });
    }
    Ok(())
}

/// Air density in kg/m³ at altitude `h` metres.
pub fn air_density(h: f64) -> Result<f64> {
    check_altitude(h)?;
    let h_km = h / 1000.0;
    Ok(1.2250 * (1.0 - h_km / 44.3308).powf(4.2559))
}

/// Speed of sound in m/s at altitude `h` metres.
pub fn speed_of_sound(h: f64) -> Result<f64> {
    check_altitude(h)?;
    let h_km = h / 1000.0;
    Ok(20.0468 * (288.15 - 6.5 * h_km).sqrt())
}

pub fn mach(v: f64, h: f64) -> Result<f64> {
    Ok(v / speed_of_sound(h)?)
}

/// The eleven fitted aerodynamic derivatives at one flight condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroDerivatives {
    pub cl0: f64,
    pub cl_alpha: f64,
    pub cl_de: f64,
    pub cl_q: f64,
    pub cd0: f64,
    pub cd_alpha: f64,
    pub cd_alpha2: f64,
    pub cm0: f64,
    pub cm_alpha: f64,
    pub cm_de: f64,
    pub cm_q: f64,
}

impl AeroDerivatives {
    /// Evaluates the fits at altitude `h` (m), Mach `ma` and morph ratio `xi`.
    pub fn evaluate(h: f64, ma: f64, xi: f64) -> Self {
        let hk = h / 1000.0;
        Self {
            cl0: 0.0098 * ma + 0.4890 * xi + 0.3340,
            cl_alpha: -0.0001 * hk - 1.0597 * ma + 6.0872 * xi + 5.9792,
            cl_de: -0.0013 * hk + 0.0316 * ma + 0.4099,
            cl_q: 0.8710 * ma + 5.1386 * xi + 9.6995,
            cd0: 0.0005 * hk - 0.0277 * ma + 0.0142 * xi + 0.0288,
            cd_alpha: 0.0001 * hk + 0.0325 * ma + 0.0906 * xi + 0.1883,
            cd_alpha2: -0.0011 * hk - 1.2434 * ma + 0.1408 * xi + 2.1775,
            cm0: -0.0001 * hk + 0.0031 * ma - 0.2436 * xi + 0.0121,
            cm_alpha: -0.0001 * hk - 0.0922 * ma - 1.4954 * xi - 1.6444,
            cm_de: 0.0030 * hk - 0.1256 * ma - 0.9766,
            cm_q: -0.6857 * ma - 1.0762 * xi - 18.1012,
        }
    }
}

/// Total lift, drag and pitching-moment coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroCoeffs {
    pub c_l: f64,
    pub c_d: f64,
    pub c_m: f64,
}

pub fn check_state(x: &StateVec) -> Result<()> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    if x[0] <= 0.0 {
        return Err(Error::DegenerateState(x[0]));
    }
    if x[1].abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::OutOfEnvelope {
            quantity: "attack angle",
            value: x[1],
        });
    }
    check_altitude(x[4])
}

/// Lift, drag and moment coefficients including the elevator and
/// pitch-rate contributions.
pub fn aero_coefficients(params: &VehicleParams, x: &FlightState, xi: MorphRatio, delta_e: f64) -> Result<AeroCoeffs> {
    let xv = x.to_vector();
    check_state(&xv)?;
    let d = AeroDerivatives::evaluate(x.h, mach(x.v, x.h)?, xi.value());
    let rate = params.chord / (2.0 * x.v) * x.q;
    Ok(AeroCoeffs {
        c_l: d.cl0 + d.cl_alpha * x.alpha + d.cl_de * delta_e + d.cl_q * rate,
        c_d: d.cd0 + d.cd_alpha * x.alpha + d.cd_alpha2 * x.alpha * x.alpha,
        c_m: d.cm0 + d.cm_alpha * x.alpha + d.cm_de * delta_e + d.cm_q * rate,
    })
}

impl VehicleParams {
    /// Drift term `f_n(x, ξ)`.
    pub fn drift(&self, x: &StateVec, xi: f64) -> Result<StateVec> {
        check_state(x)?;
        let (v, alpha, theta, q, h) = (x[0], x[1], x[2], x[3], x[4]);
        let rho = air_density(h)?;
        let d = AeroDerivatives::evaluate(h, mach(v, h)?, xi);
        let rate = self.chord / (2.0 * v) * q;
        let gamma = theta - alpha;
        let qbar_s = 0.5 * rho * v * v * self.wing_area;

        let drag = d.cd0 + d.cd_alpha * alpha + d.cd_alpha2 * alpha * alpha;
        let lift = d.cl0 + d.cl_alpha * alpha + d.cl_q * rate;
        let moment = d.cm0 + d.cm_alpha * alpha + d.cm_q * rate;

        Ok(StateVec::new(
            -qbar_s / self.mass * drag - self.gravity * gamma.sin(),
            -qbar_s / (self.mass * v) * lift + q + self.gravity * gamma.cos() / v,
            q,
            qbar_s * self.chord / self.inertia_y * moment,
            v * gamma.sin(),
        ))
    }

    /// Input matrix `g_n(x)`; rows for θ and h are structurally zero.
    pub fn input_matrix(&self, x: &StateVec) -> Result<InputMatrix> {
        check_state(x)?;
        let (v, alpha, h) = (x[0], x[1], x[4]);
        let rho = air_density(h)?;
        // the control derivatives do not depend on ξ
        let d = AeroDerivatives::evaluate(h, mach(v, h)?, 0.0);
        let qbar_s = 0.5 * rho * v * v * self.wing_area;
        let thrust = self.thrust_per_throttle;
        let mut g = InputMatrix::zeros();
        g[(0, 1)] = thrust * alpha.cos() / self.mass;
        g[(1, 0)] = -qbar_s * d.cl_de / (self.mass * v);
        g[(1, 1)] = -thrust * alpha.sin() / (self.mass * v);
        g[(3, 0)] = qbar_s * self.chord * d.cm_de / self.inertia_y;
        Ok(g)
    }

    /// `ẋ = f_n(x, ξ) + g_n(x)·u`.
    pub fn dynamics(&self, x: &StateVec, u: &InputVec, xi: f64) -> Result<StateVec> {
        Ok(self.drift(x, xi)? + self.input_matrix(x)? * u)
    }

    /// Dynamics in error coordinates about `trim`.
    pub fn shifted_dynamics(
        &self,
        x_err: &StateVec,
        u_err: &InputVec,
        xi_err: f64,
        trim: &TrimPoint,
    ) -> Result<StateVec> {
        let x = x_err + trim.state();
        let u = u_err + trim.input();
        self.dynamics(&x, &u, xi_err + trim.xi_e.value())
    }

    /// Shifted drift `f(x, ξ) = f_n(x + x_e, ξ + ξ_e) + g_n(x + x_e)·u_e`.
    pub fn shifted_drift(&self, x_err: &StateVec, xi_err: f64, trim: &TrimPoint) -> Result<StateVec> {
        self.shifted_dynamics(x_err, &InputVec::zeros(), xi_err, trim)
    }

    /// Shifted input matrix `g(x) = g_n(x + x_e)`.
    pub fn shifted_input_matrix(&self, x_err: &StateVec, trim: &TrimPoint) -> Result<InputMatrix> {
        self.input_matrix(&(x_err + trim.state()))
    }
}

/// Equilibrium triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimPoint {
    pub x_e: FlightState,
    pub u_e: ControlInput,
    pub xi_e: MorphRatio,
}

impl Default for TrimPoint {
    /// The published level-flight operating point at 5000 m, 40 m/s.
    fn default() -> Self {
        Self {
            x_e: FlightState {
                v: 40.0,
                alpha: 0.1268,
                theta: 0.1259,
                q: 0.0,
                h: 5000.0,
            },
            u_e: ControlInput {
                delta_e: -0.2890,
                delta_t: 42.8188,
            },
            xi_e: MorphRatio(0.2),
        }
    }
}

/// Default acceptance threshold on `‖ẋ‖` at trim.
pub const TRIM_TOL: f64 = 1e-2;

impl TrimPoint {
    pub fn state(&self) -> StateVec {
        self.x_e.to_vector()
    }

    pub fn input(&self) -> InputVec {
        self.u_e.to_vector()
    }

    /// `‖f_n(x_e, ξ_e) + g_n(x_e)·u_e‖₂`.
    pub fn residual(&self, params: &VehicleParams) -> Result<f64> {
        Ok(params.dynamics(&self.state(), &self.input(), self.xi_e.value())?.norm())
    }

    pub fn check(&self, params: &VehicleParams, tol: f64) -> Result<()> {
        let residual = self.residual(params)?;
        if residual > tol {
            return Err(Error::TrimResidual {
                residual,
                tolerance: tol,
            });
        }
        Ok(())
    }

    /// Re-solves for `(α, θ, δe, δt)` by Newton iteration with `V`, `h`,
    /// `q = 0` and `ξ` held at their current values.
    pub fn refine(&self, params: &VehicleParams) -> Result<TrimPoint> {
        let mut z = nalgebra::Vector4::new(self.x_e.alpha, self.x_e.theta, self.u_e.delta_e, self.u_e.delta_t);
        let (v, h, xi) = (self.x_e.v, self.x_e.h, self.xi_e.value());
        let eval = |z: &nalgebra::Vector4<f64>| -> Result<nalgebra::Vector4<f64>> {
            let x = StateVec::new(v, z[0], z[1], 0.0, h);
            let u = InputVec::new(z[2], z[3]);
            let xd = params.dynamics(&x, &u, xi)?;
            Ok(nalgebra::Vector4::new(xd[0], xd[1], xd[3], xd[4]))
        };
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let r = eval(&z)?;
            last = r.norm();
            if last < 1e-13 {
                break;
            }
            let mut jac = nalgebra::Matrix4::zeros();
            for j in 0..4 {
                let step = 1e-6 * z[j].abs().max(1.0);
                let mut zp = z;
                let mut zm = z;
                zp[j] += step;
                zm[j] -= step;
                jac.set_column(j, &((eval(&zp)? - eval(&zm)?) / (2.0 * step)));
            }
            let dz = jac.lu().solve(&(-r)).ok_or(Error::SingularSystem)?;
            z += dz;
            if dz.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        if !(last.is_finite() && last < 1e-9) {
            return Err(Error::NoConvergence {
                iterations: 50,
                last_change: last,
            });
        }
        Ok(TrimPoint {
            x_e: FlightState {
                v,
                alpha: z[0],
                theta: z[1],
                q: 0.0,
                h,
            },
            u_e: ControlInput {
                delta_e: z[2],
                delta_t: z[3],
            },
            xi_e: self.xi_e,
        })
    }
}

fn fd_step(x: f64) -> f64 {
    1e-3 * x.abs().max(1.0)
}

/// Jacobian linearization about `trim` at fixed `ξ = ξ_e`.
///
/// `A = ∂f_n/∂x` with the input matrix frozen at `g_n(x_e)`, which is the
/// convention of the published reference matrices; `B = g_n(x_e)`.
/// [`linearize_full`] also differentiates `g_n(x)·u_e`.
pub fn linearize(params: &VehicleParams, trim: &TrimPoint) -> Result<(StateMatrix, InputMatrix)> {
    let xe = trim.state();
    let xi = trim.xi_e.value();
    let a = central_jacobian(&xe, &xe, |x| params.drift(x, xi))?;
    Ok((a, params.input_matrix(&xe)?))
}

/// Full Jacobian of the shifted dynamics at the origin.
pub fn linearize_full(params: &VehicleParams, trim: &TrimPoint) -> Result<(StateMatrix, InputMatrix)> {
    let xe = trim.state();
    let a = central_jacobian(&StateVec::zeros(), &xe, |dx| params.shifted_drift(dx, 0.0, trim))?;
    Ok((a, params.input_matrix(&xe)?))
}

/// Central differences about `x0`, with step sizes scaled by `scale`.
fn central_jacobian<F>(x0: &StateVec, scale: &StateVec, f: F) -> Result<StateMatrix>
where
    F: Fn(&StateVec) -> Result<StateVec>,
{
    let mut jac = StateMatrix::zeros();
    for j in 0..STATE_DIM {
        let step = fd_step(scale[j]);
        let mut p = *x0;
        let mut m = *x0;
        p[j] += step;
        m[j] -= step;
        jac.set_column(j, &((f(&p)? - f(&m)?) / (2.0 * step)));
    }
    Ok(jac)
}

/// The reference linear model printed for the trim point, used as the
/// comparison baseline by `linearize` reports.
pub fn reference_linear_model() -> (StateMatrix, InputMatrix) {
    #[rustfmt::skip]
    let a = StateMatrix::from_row_slice(&[
        -0.0353,  3.91,  -9.8,     0.0,   7.54e-5,
        -0.0127, -1.43,   2.14e-4, 0.95,  2.9e-5,
         0.0,     0.0,    0.0,     1.0,   0.0,
        -0.0614, -8.42,   0.0,    -1.72,  1.32e-4,
        -8.73e-4, -40.0, 40.0,     0.0,   0.0,
    ]);
    #[rustfmt::skip]
    let b = InputMatrix::from_row_slice(&[
         0.0,     0.0169,
        -0.0822, -5.4e-5,
         0.0,     0.0,
        -4.2074,  0.0,
         0.0,     0.0,
    ]);
    (a, b)
}

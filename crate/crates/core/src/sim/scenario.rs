//! Scenario definition and the closed-loop driver.

use nalgebra::SVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{self, GameController, GameWeights, OnlineCache, StepTelemetry};
use crate::linalg::Vector;
use crate::sim::log::{SimLog, SimSample};
use crate::sim::{rk4_step, ActuatorNoise, LqrBaseline};
use crate::vehicle::{self, InputMatrix, InputVec, StateMatrix, StateVec, TrimPoint, VehicleParams};

/// How the plant's morph ratio follows the commanded one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphMode {
    /// First-order lag with a rate cap.
    Lagged,
    Instantaneous,
}

/// Plant used for integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantModel {
    Nonlinear,
    /// Jacobian model about trim at fixed morph ratio.
    Linearized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub x0: [f64; 5],
    pub duration: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Control update period, s; a multiple of `dt`.
    pub period: f64,
    /// Actuator noise std as a fraction of `|u_e|`; ignored when
    /// `noise_std` is set.
    pub noise_fraction: f64,
    pub noise_std: Option<[f64; 2]>,
    pub seed: u64,
    pub morph_mode: MorphMode,
    /// Time constant of the morph lag, s.
    pub morph_tau: f64,
    /// Maximum `|dξ/dt|`, 1/s.
    pub morph_rate_limit: f64,
    /// Initial plant morph ratio; defaults to the trim value.
    pub xi0: Option<f64>,
    pub plant: PlantModel,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            x0: [35.0, 0.1968, 0.1729, 0.0, 4990.0],
            duration: 60.0,
            dt: 0.01,
            period: 0.01,
            noise_fraction: 0.3,
            noise_std: None,
            seed: 0,
            morph_mode: MorphMode::Lagged,
            morph_tau: 0.5,
            morph_rate_limit: 0.2,
            xi0: None,
            plant: PlantModel::Nonlinear,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration >= self.dt) {
            return Err(Error::Config("scenario needs dt > 0 and duration >= dt".into()));
        }
        if !(self.period >= self.dt) || ((self.period / self.dt).round() * self.dt - self.period).abs() > 1e-9 {
            return Err(Error::Config(
                "scenario.period must be a positive multiple of dt".into(),
            ));
        }
        if !(self.morph_tau > 0.0) || !(self.morph_rate_limit > 0.0) {
            return Err(Error::Config(
                "scenario.morph_tau and morph_rate_limit must be positive".into(),
            ));
        }
        if !(self.noise_fraction >= 0.0) || self.noise_std.is_some_and(|s| s.iter().any(|v| !(*v >= 0.0))) {
            return Err(Error::Config("scenario noise levels must be non-negative".into()));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("scenario.x0 must be finite".into()));
        }
        if let Some(xi) = self.xi0 {
            vehicle::MorphRatio::new(xi).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn noise(&self, trim: &TrimPoint) -> ActuatorNoise {
        match self.noise_std {
            Some(std) => ActuatorNoise { std },
            None => ActuatorNoise::from_trim(trim, self.noise_fraction),
        }
    }

    /// Control periods in the horizon.
    pub fn periods(&self) -> usize {
        (self.duration / self.period).round() as usize
    }

    pub fn substeps(&self) -> usize {
        (self.period / self.dt).round() as usize
    }

    pub fn initial_state(&self) -> StateVec {
        StateVec::from_column_slice(&self.x0)
    }

    /// Noise-free start at trim.
    pub fn at_trim(&self, trim: &TrimPoint) -> Self {
        let x = trim.state();
        Self {
            x0: [x[0], x[1], x[2], x[3], x[4]],
            noise_fraction: 0.0,
            noise_std: None,
            ..self.clone()
        }
    }
}

/// Controller driving a closed-loop run.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // built once per run
pub enum Controller {
    Game(Box<GameController>),
    Lqr(LqrBaseline),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Game(_) => "game",
            Controller::Lqr(_) => "lqr",
        }
    }
}

struct Plant<'a> {
    params: &'a VehicleParams,
    trim: &'a TrimPoint,
    linear: Option<(StateMatrix, InputMatrix)>,
    mode: MorphMode,
    tau: f64,
    rate: f64,
}

impl Plant<'_> {
    /// Derivative of `[x_n; ξ]` under held input `u` and morph command.
    fn derivative(&self, s: &SVector<f64, 6>, u: &InputVec, xi_cmd: f64) -> Result<SVector<f64, 6>> {
        let x = s.fixed_rows::<5>(0).into_owned();
        let xi = s[5];
        let xdot = match &self.linear {
            Some((a, b)) => a * (x - self.trim.state()) + b * (u - self.trim.input()),
            None => self.params.dynamics(&x, u, xi.clamp(0.0, 1.0))?,
        };
        let xidot = match self.mode {
            MorphMode::Lagged => ((xi_cmd - xi) / self.tau).clamp(-self.rate, self.rate),
            MorphMode::Instantaneous => 0.0,
        };
        let mut out = SVector::<f64, 6>::zeros();
        out.fixed_rows_mut::<5>(0).copy_from(&xdot);
        out[5] = xidot;
        Ok(out)
    }
}

/// Runs `scenario` under `controller` and logs every control period.
///
/// Stage costs are scored with `costs` in error coordinates for either
/// controller; LQR runs carry `a = 0`.
///
/// The control is recomputed every `period` and held over the integrator
/// substeps. Non-finite or out-of-envelope states end the run with
/// [`Error::DivergedTrajectory`]; game solver failures follow the
/// controller's hold policy and otherwise surface as
/// [`Error::SolverFailure`].
pub fn run_closed_loop(
    scenario: &Scenario,
    params: &VehicleParams,
    trim: &TrimPoint,
    controller: &Controller,
    costs: &GameWeights,
) -> Result<SimLog> {
    scenario.validate()?;
    let noise = scenario.noise(trim);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let plant = Plant {
        params,
        trim,
        linear: match scenario.plant {
            PlantModel::Linearized => Some(vehicle::linearize(params, trim)?),
            PlantModel::Nonlinear => None,
        },
        mode: scenario.morph_mode,
        tau: scenario.morph_tau,
        rate: scenario.morph_rate_limit,
    };
    let x_e = trim.state();
    let u_e = trim.input();
    let xi_e = trim.xi_e.value();
    let coeff_dim = match controller {
        Controller::Game(g) => g.weights.r_a.nrows(),
        Controller::Lqr(_) => 0,
    };
    let mut cache = match controller {
        Controller::Game(g) => Some(OnlineCache::new(g.hold_limit, trim.xi_e.value())),
        Controller::Lqr(_) => None,
    };

    let mut x = scenario.initial_state();
    let mut xi_plant = scenario.xi0.unwrap_or(xi_e);
    let mut log = SimLog::new(scenario.period, coeff_dim);
    let diverged = |t: f64, e: Error| match e {
        Error::NonFiniteState | Error::OutOfEnvelope { .. } | Error::DegenerateState(_) => Error::DivergedTrajectory {
            t,
            reason: e.to_string(),
        },
        other => other,
    };

    let n = scenario.periods();
    for k in 0..=n {
        let t = k as f64 * scenario.period;
        let x_err = x - x_e;
        let (u_err_cmd, a, xi_cmd, telemetry) = match (controller, cache.as_mut()) {
            (Controller::Game(g), Some(cache)) => {
                let out = game::online_step(cache, &x_err, t, g).map_err(|e| diverged(t, e))?;
                (out.u, out.a.0, out.xi_hat, out.telemetry)
            }
            (Controller::Lqr(l), _) => (
                l.control_error(&x_err),
                Vector::zeros(0),
                xi_e,
                StepTelemetry::default(),
            ),
            (Controller::Game(_), None) => unreachable!("game runs always carry a cache"),
        };
        let u = noise.apply(&(u_err_cmd + u_e), &mut rng);
        if scenario.morph_mode == MorphMode::Instantaneous {
            xi_plant = xi_cmd;
        }
        let xv = Vector::from_column_slice(x_err.as_slice());
        let uv = Vector::from_column_slice((u - u_e).as_slice());
        let a_cost = if a.is_empty() {
            Vector::zeros(costs.r_a.nrows())
        } else {
            a.clone()
        };
        let (j_u, j_a) = game::stage_costs(&xv, &uv, &a_cost, costs);
        log.push(SimSample {
            t,
            x,
            u,
            a,
            xi_cmd,
            xi_plant,
            j_u,
            j_a,
            telemetry,
        });
        if k == n {
            break;
        }
        let mut s = SVector::<f64, 6>::zeros();
        s.fixed_rows_mut::<5>(0).copy_from(&x);
        s[5] = xi_plant;
        for j in 0..scenario.substeps() {
            let ts = t + j as f64 * scenario.dt;
            s = rk4_step(|z| plant.derivative(z, &u, xi_cmd), &s, scenario.dt).map_err(|e| diverged(ts, e))?;
        }
        x = s.fixed_rows::<5>(0).into_owned();
        xi_plant = s[5].clamp(0.0, 1.0);
        if plant.linear.is_none() {
            vehicle::check_state(&x).map_err(|e| diverged(t + scenario.period, e))?;
        }
    }
    Ok(log)
}

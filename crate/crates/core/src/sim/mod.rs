//! Closed-loop simulation: integration, actuators, the LQR baseline,
//! scenarios, logs and run metrics.

pub mod actuator;
pub mod integrate;
pub mod log;
pub mod lqr;
pub mod metrics;
pub mod scenario;

pub use actuator::{saturate, ActuatorNoise};
pub use integrate::rk4_step;
pub use log::{SimLog, SimSample};
pub use lqr::{lqr_gain, LqrBaseline, LqrWeights};
pub use metrics::{compare, metrics, Comparison, MetricsReport};
pub use scenario::{run_closed_loop, Controller, MorphMode, PlantModel, Scenario};

//! Morphing-aircraft flight control as a two-player game.
//!
//! The crate covers the longitudinal plant model and trim, dense linear
//! algebra for Lyapunov and Riccati equations, adversarially regularized
//! meta-learning of a drift representation, a morph-condition classifier,
//! the coupled-Riccati game controller, and a closed-loop simulation
//! harness with an LQR baseline.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod config;
pub mod error;
pub mod game;
pub mod linalg;
pub mod meta;
pub mod nn;
pub mod sim;
pub mod vehicle;
pub mod weights;

pub use error::{Error, Result};

//! Offline learning of the shared dynamics representation.

pub mod collect;
pub mod daiml;
pub mod dataset;
pub mod network;

pub use daiml::{train_daiml, DaimlConfig, TrainedDaiml};
pub use dataset::{Dataset, DatasetRecord};
pub use network::{CoeffVector, Discriminator, FeatureMap, PhiNetwork};

//! JSON weight files for the trained networks.
//!
//! A file holds one or more named networks. Each network lists its layer
//! sizes, activations, optional input standardization, and per-layer
//! weights as flat row-major arrays. The SHA-256 of the training
//! configuration is stored alongside.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::ClassifierParams;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::meta::{Discriminator, PhiNetwork};
use crate::nn::{Dense, Mlp, Standardizer};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    /// `[out, in]`.
    pub shape: [usize; 2],
    /// Row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub name: String,
    pub sizes: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    pub standardizer: Option<Standardizer>,
    pub layers: Vec<LayerRecord>,
}

impl NetworkRecord {
    pub fn from_mlp(name: &str, mlp: &Mlp, standardizer: Option<&Standardizer>, output_activation: &str) -> Self {
        let layers = mlp
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| LayerRecord {
                name: format!("{name}.{i}"),
                shape: [l.output_dim(), l.input_dim()],
                weight: l.weight.transpose().as_slice().to_vec(),
                bias: l.bias.as_slice().to_vec(),
            })
            .collect();
        Self {
            name: name.to_string(),
            sizes: mlp.sizes(),
            hidden_activation: "tanh".into(),
            output_activation: output_activation.into(),
            standardizer: standardizer.cloned(),
            layers,
        }
    }

    /// Rebuilds the network, checking every shape against `sizes`.
    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.sizes.len() != self.layers.len() + 1 {
            return Err(Error::Format(format!(
                "network {} lists {} sizes for {} layers",
                self.name,
                self.sizes.len(),
                self.layers.len()
            )));
        }
        if self.hidden_activation != "tanh" {
            return Err(Error::Format(format!(
                "unsupported activation {}",
                self.hidden_activation
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let [out, inp] = l.shape;
            if out != self.sizes[i + 1] || inp != self.sizes[i] || l.weight.len() != out * inp || l.bias.len() != out {
                return Err(Error::Format(format!("layer {} has inconsistent shape", l.name)));
            }
            if !l.weight.iter().chain(&l.bias).all(|v| v.is_finite()) {
                return Err(Error::Format(format!("layer {} has non-finite values", l.name)));
            }
            layers.push(Dense {
                weight: Matrix::from_row_slice(out, inp, &l.weight),
                bias: Vector::from_column_slice(&l.bias),
            });
        }
        if let Some(s) = &self.standardizer {
            if s.dim() != self.sizes[0] || s.scale.len() != s.dim() || s.scale.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Format(format!(
                    "network {} has an invalid standardizer",
                    self.name
                )));
            }
        }
        Ok(Mlp { layers })
    }

    fn standardizer_or_identity(&self) -> Standardizer {
        self.standardizer
            .clone()
            .unwrap_or_else(|| Standardizer::identity(self.sizes[0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format_version: u32,
    pub config_hash: String,
    pub networks: Vec<NetworkRecord>,
}

/// Hex SHA-256 of the JSON serialization of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl WeightFile {
    pub fn new(config_hash: String, networks: Vec<NetworkRecord>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config_hash,
            networks,
        }
    }

    pub fn network(&self, name: &str) -> Result<&NetworkRecord> {
        self.networks
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::Format(format!("no network named {name}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn from_daiml(phi: &PhiNetwork, disc: &Discriminator, config_hash: String) -> Self {
        Self::new(
            config_hash,
            vec![
                NetworkRecord::from_mlp("phi", &phi.mlp, Some(&phi.input), "linear"),
                NetworkRecord::from_mlp("discriminator", &disc.mlp, None, "softmax"),
            ],
        )
    }

    pub fn from_classifier(params: &ClassifierParams, config_hash: String) -> Self {
        Self::new(
            config_hash,
            vec![NetworkRecord::from_mlp(
                "classifier",
                &params.mlp,
                Some(&params.input),
                "softmax",
            )],
        )
    }

    pub fn phi(&self) -> Result<PhiNetwork> {
        let rec = self.network("phi")?;
        Ok(PhiNetwork {
            mlp: rec.to_mlp()?,
            input: rec.standardizer_or_identity(),
        })
    }

    pub fn discriminator(&self) -> Result<Discriminator> {
        Ok(Discriminator {
            mlp: self.network("discriminator")?.to_mlp()?,
        })
    }

    pub fn classifier(&self) -> Result<ClassifierParams> {
        let rec = self.network("classifier")?;
        Ok(ClassifierParams {
            mlp: rec.to_mlp()?,
            input: rec.standardizer_or_identity(),
        })
    }
}

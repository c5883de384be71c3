//! TOML configuration covering every tunable of the pipeline.
//!
//! All sections and keys are optional; missing values take the built-in
//! defaults and unknown keys are rejected.
//!
//! ```toml
//! [trim]
//! refine = true
//!
//! [game]
//! epsilon = 1e-6
//!
//! [scenario]
//! seed = 3
//! morph_mode = "instantaneous"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::game::GameConfig;
use crate::meta::collect::CollectConfig;
use crate::meta::DaimlConfig;
use crate::sim::{LqrWeights, Scenario};
use crate::vehicle::{self, ControlInput, FlightState, InputMatrix, MorphRatio, StateMatrix, TrimPoint, VehicleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimConfig {
    pub x_e: FlightState,
    pub u_e: ControlInput,
    pub xi_e: MorphRatio,
    /// Re-solve `(α, θ, δe, δt)` so the plant is at rest to rounding.
    pub refine: bool,
    /// Largest accepted `‖ẋ‖` at the resulting trim.
    pub tol: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        let t = TrimPoint::default();
        Self {
            x_e: t.x_e,
            u_e: t.u_e,
            xi_e: t.xi_e,
            refine: true,
            tol: vehicle::TRIM_TOL,
        }
    }
}

impl TrimConfig {
    /// The configured point as given.
    pub fn point(&self) -> TrimPoint {
        TrimPoint {
            x_e: self.x_e,
            u_e: self.u_e,
            xi_e: self.xi_e,
        }
    }

    /// The operating point used by controllers: refined if requested, and
    /// checked against `tol`.
    pub fn resolve(&self, params: &VehicleParams) -> Result<TrimPoint> {
        let trim = if self.refine {
            self.point().refine(params)?
        } else {
            self.point()
        };
        trim.check(params, self.tol)?;
        Ok(trim)
    }
}

/// Linear model that `linearize` reports are compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceModel {
    /// Row-major `5 × 5`.
    pub a: Vec<Vec<f64>>,
    /// Row-major `5 × 2`.
    pub b: Vec<Vec<f64>>,
}

impl Default for ReferenceModel {
    fn default() -> Self {
        let (a, b) = vehicle::reference_linear_model();
        Self {
            a: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: b.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl ReferenceModel {
    pub fn matrices(&self) -> Result<(StateMatrix, InputMatrix)> {
        let shape_ok = |m: &Vec<Vec<f64>>, c: usize| m.len() == 5 && m.iter().all(|r| r.len() == c);
        if !shape_ok(&self.a, 5) || !shape_ok(&self.b, 2) {
            return Err(Error::Config("reference.a must be 5x5 and reference.b 5x2".into()));
        }
        Ok((
            StateMatrix::from_fn(|i, j| self.a[i][j]),
            InputMatrix::from_fn(|i, j| self.b[i][j]),
        ))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub trim: TrimConfig,
    pub game: GameConfig,
    pub daiml: DaimlConfig,
    pub classifier: ClassifierConfig,
    pub scenario: Scenario,
    pub collect: CollectConfig,
    pub lqr: LqrWeights,
    pub reference: ReferenceModel,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Defaults when `path` is `None`.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Config(format!("[{section}] {other}")),
            })
        };
        wrap("vehicle", self.vehicle.validate())?;
        if !(self.trim.tol > 0.0) {
            return Err(Error::Config("trim.tol must be positive".into()));
        }
        wrap("game", self.game.validate())?;
        wrap("daiml", self.daiml.validate())?;
        if self.daiml.coeff_dim() != self.game.coeff_dim {
            return Err(Error::Config(format!(
                "daiml.feature_dim gives h = {} but game.coeff_dim = {}",
                self.daiml.coeff_dim(),
                self.game.coeff_dim
            )));
        }
        wrap("classifier", self.classifier.validate())?;
        wrap("scenario", self.scenario.validate())?;
        wrap("collect", self.collect.validate())?;
        if self.lqr.q.iter().any(|v| !(*v >= 0.0)) || self.lqr.r.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("lqr.q must be non-negative and lqr.r positive".into()));
        }
        self.reference.matrices().map(|_| ())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MorphMode;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn partial_override() {
        let cfg = Config::from_toml_str(
            "[scenario]\nseed = 7\nmorph_mode = \"instantaneous\"\n[game]\nepsilon = 1e-7\n[trim]\nrefine = false\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.seed, 7);
        assert_eq!(cfg.scenario.morph_mode, MorphMode::Instantaneous);
        assert_eq!(cfg.game.epsilon, 1e-7);
        assert!(!cfg.trim.refine);
        assert_eq!(cfg.game.max_iter, 50);
    }

    #[test]
    fn defaults_roundtrip_through_toml() {
        let text = Config::default().to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), Config::default());
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            "[scenario]\ndt = -1.0\n",
            "[game]\nr_a = [1.0, 2.0]\n",
            "[vehicle]\nbogus = 1\n",
            "[trim]\nxi_e = 1.5\n",
            "[daiml]\nfeature_dim = 4\n",
        ] {
            assert!(matches!(Config::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn resolved_trim_is_at_rest() {
        let cfg = Config::default();
        let trim = cfg.trim.resolve(&cfg.vehicle).unwrap();
        assert!(trim.residual(&cfg.vehicle).unwrap() < 1e-9);
    }
}

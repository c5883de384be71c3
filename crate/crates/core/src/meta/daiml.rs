//! Domain-adversarial meta-learning of `φ`.
//!
//! Each step draws one condition, fits the output-layer coefficients by
//! ridge least squares on a small adaptation batch, then takes an SGD step
//! on `φ` against the regression error on a disjoint training batch minus
//! `α` times the discriminator's cross-entropy. The coefficient solution is
//! differentiated through, so `φ` sees how its features change the fit.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::meta::dataset::Dataset;
use crate::meta::network::{CoeffVector, Discriminator, PhiNetwork};
use crate::nn::{self, Mlp, Standardizer};
use crate::vehicle::{NUM_CONDITIONS, STATE_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaimlConfig {
    /// Weight of the adversarial term.
    pub alpha: f64,
    /// Probability of a discriminator update per step.
    pub eta: f64,
    /// Cap on `‖a*‖`.
    pub gamma: f64,
    /// Adaptation batch size.
    pub k: usize,
    /// Training batch size.
    pub b: usize,
    pub lr_phi: f64,
    pub lr_disc: f64,
    /// Ridge is `ridge_scale · tr(ΦᵀΦ) / h`; zero gives plain least squares.
    pub ridge_scale: f64,
    /// Per-layer spectral-norm bound on `φ` weights.
    pub spectral_bound: f64,
    /// Feature width `m`; the coefficient vector has `5m` entries.
    pub feature_dim: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Fraction of each condition's trajectory held out for validation.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for DaimlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eta: 0.5,
            gamma: 10.0,
            k: 32,
            b: 224,
            lr_phi: 1e-3,
            lr_disc: 1e-2,
            ridge_scale: 1e-6,
            spectral_bound: 2.0,
            feature_dim: 5,
            epochs: 60,
            steps_per_epoch: 100,
            holdout: 0.2,
            seed: 0,
        }
    }
}

impl DaimlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("daiml.{msg}")));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.k == 0 || self.b == 0 {
            return bad("k and b must be positive");
        }
        if !(self.lr_phi > 0.0 && self.lr_disc > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.ridge_scale >= 0.0) {
            return bad("ridge_scale must be non-negative");
        }
        if !(self.spectral_bound > 0.0) {
            return bad("spectral_bound must be positive");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return bad("holdout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn coeff_dim(&self) -> usize {
        STATE_DIM * self.feature_dim
    }
}

/// Ridge least squares `a* = (ΦᵀΦ + λI)⁻¹Φᵀy`, then rescaled onto the ball
/// `‖a‖ ≤ γ`.
pub fn ls_adapt(phi_stack: &Matrix, y_stack: &Vector, lambda: f64, gamma: f64) -> Result<CoeffVector> {
    if phi_stack.nrows() != y_stack.len() || phi_stack.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "Φ stack is {}x{}, y stack has {} rows",
            phi_stack.nrows(),
            phi_stack.ncols(),
            y_stack.len()
        )));
    }
    let h = phi_stack.ncols();
    let gram = phi_stack.transpose() * phi_stack + Matrix::identity(h, h) * lambda;
    let chol = factor_gram(gram, lambda)?;
    let mut a = chol.solve(&(phi_stack.transpose() * y_stack));
    let n = a.norm();
    if n > gamma {
        a *= gamma / n;
    }
    Ok(CoeffVector(a))
}

fn factor_gram(gram: Matrix, lambda: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if lambda == 0.0 {
        let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
        if gram.clone().symmetric_eigenvalues().min() <= 1e-12 * scale {
            return Err(Error::SingularGram);
        }
    }
    gram.cholesky().ok_or(Error::SingularGram)
}

/// Ridge parameter used for a feature batch `F` (`m × K`).
pub fn ridge_lambda(features: &Matrix, ridge_scale: f64) -> f64 {
    ridge_scale * features.norm_squared() / features.nrows() as f64
}

/// Coefficient fit exploiting the block structure of `Φ`.
///
/// With features `F` (`m × K`) and labels `Y` (`5 × K`) the stacked normal
/// equations decouple into `(FFᵀ + λI) Z = FYᵀ`, `W = Zᵀ`. Returns the
/// capped `5 × m` weight matrix together with the pieces needed to
/// differentiate it.
pub fn adapt_weights(features: &Matrix, labels: &Matrix, ridge_scale: f64, gamma: f64) -> Result<Adaptation> {
    let m = features.nrows();
    let lambda = ridge_lambda(features, ridge_scale);
    let gram = features * features.transpose() + Matrix::identity(m, m) * lambda;
    let chol = factor_gram(gram, lambda)?;
    let z = chol.solve(&(features * labels.transpose()));
    let w_ls = z.transpose();
    let norm = w_ls.norm();
    let weight = if norm > gamma {
        &w_ls * (gamma / norm)
    } else {
        w_ls.clone()
    };
    Ok(Adaptation {
        weight,
        z,
        norm,
        lambda,
        chol,
    })
}

pub struct Adaptation {
    /// Capped `5 × m` weights.
    pub weight: Matrix,
    /// Uncapped solution transposed (`m × 5`).
    z: Matrix,
    norm: f64,
    pub lambda: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Adaptation {
    pub fn coeffs(&self) -> CoeffVector {
        CoeffVector::from_weight(&self.weight)
    }
}

/// Loss values of one step, before the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaimlLosses {
    /// Mean over the training batch of `‖y − Φa*‖²`.
    pub regression: f64,
    /// Mean discriminator cross-entropy on the training batch.
    pub adversarial: f64,
    /// `regression − α·adversarial`.
    pub total: f64,
    /// Discriminator top-1 accuracy on the training batch.
    pub disc_accuracy: f64,
}

/// A labelled batch: states and labels as columns.
pub struct Batch {
    pub x: Matrix,
    pub y: Matrix,
}

/// Objective of the `φ` update and its gradient with respect to the `φ`
/// parameters, with the discriminator held fixed.
pub fn phi_objective(
    phi: &PhiNetwork,
    disc: &Discriminator,
    batch_a: &Batch,
    batch_b: &Batch,
    condition: usize,
    cfg: &DaimlConfig,
) -> Result<(DaimlLosses, Mlp)> {
    let trace_a = phi.mlp.forward_trace(&phi.input.apply(&batch_a.x));
    let trace_b = phi.mlp.forward_trace(&phi.input.apply(&batch_b.x));
    let f_a = trace_a.output();
    let f_b = trace_b.output();
    let nb = batch_b.x.ncols() as f64;
    let m = f_a.nrows();

    let ad = adapt_weights(f_a, &batch_a.y, cfg.ridge_scale, cfg.gamma)?;
    let w = &ad.weight;

    let resid = &batch_b.y - w * f_b;
    let regression = resid.norm_squared() / nb;
    let mut g_fb = -(w.transpose() * &resid) * (2.0 / nb);
    let g_w = -(&resid * f_b.transpose()) * (2.0 / nb);

    let labels = vec![condition; batch_b.x.ncols()];
    let disc_trace = disc.mlp.forward_trace(f_b);
    let probs = nn::softmax(disc_trace.output());
    let adversarial = nn::cross_entropy(&probs, &labels);
    let disc_accuracy = nn::accuracy(&probs, &labels);
    if cfg.alpha != 0.0 {
        let (_, g_ce) = disc
            .mlp
            .backward(&disc_trace, &nn::cross_entropy_logit_grad(&probs, &labels));
        g_fb -= g_ce * cfg.alpha;
    }

    // back through the norm cap
    let g_ls = if ad.norm > cfg.gamma {
        let w_hat = &ad.z.transpose() / ad.norm;
        (&g_w - &w_hat * g_w.dot(&w_hat)) * (cfg.gamma / ad.norm)
    } else {
        g_w
    };
    // back through the ridge solve Z = M⁻¹FYᵀ, M = FFᵀ + λI, λ = s·‖F‖²/m
    let h = g_ls.transpose();
    let v = ad.chol.solve(&h);
    let vz = &v * ad.z.transpose();
    let mut g_fa = &v * &batch_a.y - (&vz + vz.transpose()) * f_a;
    if cfg.ridge_scale != 0.0 {
        g_fa -= f_a * (2.0 * cfg.ridge_scale / m as f64 * vz.trace());
    }

    let (mut grads, _) = phi.mlp.backward(&trace_b, &g_fb);
    let (grads_a, _) = phi.mlp.backward(&trace_a, &g_fa);
    grads.add_scaled(&grads_a, 1.0);

    Ok((
        DaimlLosses {
            regression,
            adversarial,
            total: regression - cfg.alpha * adversarial,
            disc_accuracy,
        },
        grads,
    ))
}

/// Discriminator cross-entropy on the features of `x` and its gradient
/// with respect to the discriminator parameters.
pub fn disc_objective(phi: &PhiNetwork, disc: &Discriminator, x: &Matrix, condition: usize) -> (f64, Mlp) {
    let feats = phi.features_batch(x);
    let trace = disc.mlp.forward_trace(&feats);
    let probs = nn::softmax(trace.output());
    let labels = vec![condition; x.ncols()];
    let ce = nn::cross_entropy(&probs, &labels);
    let (grads, _) = disc
        .mlp
        .backward(&trace, &nn::cross_entropy_logit_grad(&probs, &labels));
    (ce, grads)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub losses: DaimlLosses,
    pub disc_updated: bool,
}

/// One iteration: adapt on `batch_a`, update `φ` on `batch_b`, project its
/// weights, then update the discriminator with probability `η`.
pub fn daiml_step<R: Rng + ?Sized>(
    phi: &mut PhiNetwork,
    disc: &mut Discriminator,
    batch_a: &Batch,
    batch_b: &Batch,
    condition: usize,
    cfg: &DaimlConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let (losses, grads) = phi_objective(phi, disc, batch_a, batch_b, condition, cfg)?;
    phi.mlp.sgd_step(&grads, cfg.lr_phi);
    phi.spectral_normalize(cfg.spectral_bound);

    let disc_updated = rng.random::<f64>() < cfg.eta;
    if disc_updated {
        let (_, g) = disc_objective(phi, disc, &batch_b.x, condition);
        disc.mlp.sgd_step(&g, cfg.lr_disc);
    }
    Ok(StepOutcome { losses, disc_updated })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub regression: f64,
    pub adversarial: f64,
    pub disc_accuracy: f64,
    pub disc_updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedDaiml {
    pub phi: PhiNetwork,
    pub disc: Discriminator,
    pub history: Vec<EpochStats>,
}

struct ConditionData {
    x: Matrix,
    y: Matrix,
}

fn gather(data: &ConditionData, idx: &[usize]) -> Batch {
    Batch {
        x: data.x.select_columns(idx),
        y: data.y.select_columns(idx),
    }
}

/// Runs `epochs × steps_per_epoch` DAIML steps on `dataset`, drawing the
/// condition uniformly at each step. Deterministic for a fixed seed.
pub fn train_daiml(dataset: &Dataset, cfg: &DaimlConfig) -> Result<TrainedDaiml> {
    cfg.validate()?;
    dataset.require_per_condition(cfg.k + cfg.b)?;
    let per_cond: Vec<ConditionData> = (0..NUM_CONDITIONS)
        .map(|k| {
            let d = dataset.condition(k);
            ConditionData {
                x: d.states(),
                y: d.labels(),
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input = Standardizer::fit(&dataset.states());
    let mut phi = PhiNetwork::new(cfg.feature_dim, input, &mut rng);
    phi.spectral_normalize(cfg.spectral_bound);
    let mut disc = Discriminator::new(cfg.feature_dim, &mut rng);

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut reg = 0.0;
        let mut adv = 0.0;
        let mut acc = 0.0;
        let mut updates = 0;
        for _ in 0..cfg.steps_per_epoch {
            let k = rng.random_range(0..NUM_CONDITIONS);
            let data = &per_cond[k];
            let picked = index::sample(&mut rng, data.x.ncols(), cfg.k + cfg.b).into_vec();
            let batch_a = gather(data, &picked[..cfg.k]);
            let batch_b = gather(data, &picked[cfg.k..]);
            let out = daiml_step(&mut phi, &mut disc, &batch_a, &batch_b, k, cfg, &mut rng)?;
            reg += out.losses.regression;
            adv += out.losses.adversarial;
            acc += out.losses.disc_accuracy;
            updates += usize::from(out.disc_updated);
        }
        let n = cfg.steps_per_epoch.max(1) as f64;
        history.push(EpochStats {
            epoch,
            regression: reg / n,
            adversarial: adv / n,
            disc_accuracy: acc / n,
            disc_updates: updates,
        });
        if !phi.mlp.is_finite() || !disc.mlp.is_finite() {
            return Err(Error::NoConvergence {
                iterations: epoch + 1,
                last_change: f64::NAN,
            });
        }
    }
    Ok(TrainedDaiml { phi, disc, history })
}

/// Least-squares coefficients for every condition of `dataset`.
pub fn adapt_all(phi: &PhiNetwork, dataset: &Dataset, cfg: &DaimlConfig) -> Result<Vec<CoeffVector>> {
    (0..NUM_CONDITIONS)
        .map(|k| {
            let d = dataset.condition(k);
            if d.is_empty() {
                return Err(Error::InsufficientData {
                    condition: k + 1,
                    have: 0,
                    need: 1,
                });
            }
            let f = phi.features_batch(&d.states());
            Ok(adapt_weights(&f, &d.labels(), cfg.ridge_scale, cfg.gamma)?.coeffs())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    /// Mean over validation records of `‖y − Φa_k‖²`.
    pub mse: f64,
    /// Mean over validation records of `‖y‖²`.
    pub zero_mse: f64,
    pub per_condition: Vec<(f64, f64)>,
}

impl PredictionReport {
    /// How many times better than predicting zero.
    pub fn improvement(&self) -> f64 {
        self.zero_mse / self.mse
    }
}

/// Adapts on each condition of `train` and scores the prediction on the
/// same condition of `validation`.
pub fn prediction_report(
    phi: &PhiNetwork,
    train: &Dataset,
    validation: &Dataset,
    cfg: &DaimlConfig,
) -> Result<PredictionReport> {
    let coeffs = adapt_all(phi, train, cfg)?;
    let mut total = 0.0;
    let mut total_zero = 0.0;
    let mut count = 0usize;
    let mut per_condition = Vec::with_capacity(NUM_CONDITIONS);
    for (k, a) in coeffs.iter().enumerate() {
        let d = validation.condition(k);
        if d.is_empty() {
            per_condition.push((0.0, 0.0));
            continue;
        }
        let f = phi.features_batch(&d.states());
        let y = d.labels();
        let err = (&y - a.as_weight() * f).norm_squared();
        let zero = y.norm_squared();
        per_condition.push((err / d.len() as f64, zero / d.len() as f64));
        total += err;
        total_zero += zero;
        count += d.len();
    }
    let n = count.max(1) as f64;
    Ok(PredictionReport {
        mse: total / n,
        zero_mse: total_zero / n,
        per_condition,
    })
}

/// Top-1 accuracy of the discriminator at predicting the condition from
/// `φ(x)`.
pub fn discriminator_accuracy(phi: &PhiNetwork, disc: &Discriminator, dataset: &Dataset) -> f64 {
    let probs = disc.probabilities(&phi.features_batch(&dataset.states()));
    nn::accuracy(&probs, &dataset.conditions())
}

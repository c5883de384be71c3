//! Morph-condition classifier on `χ = [f; x]` and the continuous ratio
//! estimate `ξ̂ = Σ ξ_k ρ_k`.
//!
//! The `f` half of `χ` comes first. During training it is the recorded
//! label `y`; online it is the controller's predicted drift `Φ(x)a`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::meta::Dataset;
use crate::nn::{self, Mlp, Standardizer};
use crate::vehicle::{MorphRatio, StateVec, MORPH_GRID, NUM_CONDITIONS, STATE_DIM};

pub const CHI_DIM: usize = 2 * STATE_DIM;
pub const CLASSIFIER_HIDDEN: [usize; 3] = [200, 200, 128];

/// `χ = [f; x]`.
pub fn chi(f: &StateVec, x: &StateVec) -> Vector {
    Vector::from_iterator(CHI_DIM, f.iter().chain(x.iter()).copied())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub mlp: Mlp,
    /// z-scoring applied to `χ` before the network.
    pub input: Standardizer,
}

impl ClassifierParams {
    pub fn zeros() -> Self {
        Self {
            mlp: Mlp::zeros(&sizes()),
            input: Standardizer::identity(CHI_DIM),
        }
    }

    /// Probabilities for a batch of `χ` columns (`10 × N` → `6 × N`).
    pub fn classify_batch(&self, chi: &Matrix) -> Matrix {
        nn::softmax(&self.mlp.forward(&self.input.apply(chi)))
    }
}

fn sizes() -> Vec<usize> {
    let mut s = vec![CHI_DIM];
    s.extend(CLASSIFIER_HIDDEN);
    s.push(NUM_CONDITIONS);
    s
}

/// Probability distribution over the six grid conditions.
pub fn classify(params: &ClassifierParams, chi: &Vector) -> Vector {
    nn::softmax_vec(&params.mlp.forward_one(&params.input.apply_vec(chi)))
}

/// `ξ̂ = Σ_k ξ_k ρ_k` over the grid.
pub fn estimate_xi(rho: &Vector, grid: &[f64]) -> Result<MorphRatio> {
    if rho.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for {} grid points",
            rho.len(),
            grid.len()
        )));
    }
    let sum = rho.sum();
    let min = rho.min();
    if (sum - 1.0).abs() > 1e-6 || min < -1e-9 || !sum.is_finite() {
        return Err(Error::NotSimplex { sum, min });
    }
    let xi: f64 = rho.iter().zip(grid).map(|(p, x)| p * x).sum();
    Ok(MorphRatio::saturating(xi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub holdout: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            lr: 0.02,
            batch: 64,
            epochs: 20,
            holdout: 0.2,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch == 0 {
            return Err(Error::Config("classifier.lr and batch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::Config("classifier.holdout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub accuracy: f64,
    /// Mean `|ξ̂ − ξ|`.
    pub xi_mae: f64,
    pub per_condition_accuracy: Vec<f64>,
    /// Mean training cross-entropy per epoch.
    pub loss_history: Vec<f64>,
}

/// `χ` columns and labels built from recorded `y` and `x`.
pub fn chi_matrix(dataset: &Dataset) -> Matrix {
    Matrix::from_fn(CHI_DIM, dataset.len(), |i, j| {
        let r = &dataset.records[j];
        if i < STATE_DIM {
            r.y[i]
        } else {
            r.x[i - STATE_DIM]
        }
    })
}

/// Mini-batch SGD on the mean cross-entropy. Returns the parameters and the
/// per-epoch mean training loss.
pub fn fit_classifier(chi: &Matrix, labels: &[usize], cfg: &ClassifierConfig) -> Result<(ClassifierParams, Vec<f64>)> {
    cfg.validate()?;
    for k in 0..NUM_CONDITIONS {
        let have = labels.iter().filter(|&&l| l == k).count();
        if have == 0 {
            return Err(Error::InsufficientData {
                condition: k + 1,
                have,
                need: 1,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input = Standardizer::fit(chi);
    let z = input.apply(chi);
    let mut params = ClassifierParams {
        mlp: Mlp::new(&sizes(), &mut rng),
        input,
    };
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            let xb = z.select_columns(chunk);
            let lb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let trace = params.mlp.forward_trace(&xb);
            let probs = nn::softmax(trace.output());
            total += nn::cross_entropy(&probs, &lb);
            batches += 1;
            let (g, _) = params.mlp.backward(&trace, &nn::cross_entropy_logit_grad(&probs, &lb));
            params.mlp.sgd_step(&g, cfg.lr);
        }
        history.push(total / batches.max(1) as f64);
    }
    if !params.mlp.is_finite() {
        return Err(Error::NoConvergence {
            iterations: cfg.epochs,
            last_change: f64::NAN,
        });
    }
    Ok((params, history))
}

/// Trains on the leading part of each condition's trajectory and reports
/// accuracy and `ξ̂` error on the held-out tail.
pub fn train_classifier(dataset: &Dataset, cfg: &ClassifierConfig) -> Result<(ClassifierParams, ClassifierReport)> {
    let (train, held) = dataset.split_holdout(cfg.holdout);
    train.require_per_condition(1)?;
    let (params, loss_history) = fit_classifier(&chi_matrix(&train), &train.conditions(), cfg)?;
    let mut report = evaluate_classifier(&params, &held);
    report.loss_history = loss_history;
    Ok((params, report))
}

pub fn evaluate_classifier(params: &ClassifierParams, dataset: &Dataset) -> ClassifierReport {
    let labels = dataset.conditions();
    let probs = params.classify_batch(&chi_matrix(dataset));
    let mut hits = [0usize; NUM_CONDITIONS];
    let mut counts = [0usize; NUM_CONDITIONS];
    let mut abs_err = 0.0;
    for (j, &k) in labels.iter().enumerate() {
        let col = probs.column(j);
        counts[k] += 1;
        if nn::argmax(&col) == k {
            hits[k] += 1;
        }
        let xi: f64 = col.iter().zip(MORPH_GRID).map(|(p, x)| p * x).sum();
        abs_err += (xi - MORPH_GRID[k]).abs();
    }
    let n = labels.len().max(1) as f64;
    ClassifierReport {
        accuracy: hits.iter().sum::<usize>() as f64 / n,
        xi_mae: abs_err / n,
        per_condition_accuracy: hits
            .iter()
            .zip(counts)
            .map(|(h, c)| if c == 0 { 0.0 } else { *h as f64 / c as f64 })
            .collect(),
        loss_history: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_weights_give_uniform() {
        let p = classify(&ClassifierParams::zeros(), &Vector::from_element(10, 3.0));
        assert!(p.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn outputs_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ClassifierParams {
            mlp: Mlp::new(&sizes(), &mut rng),
            input: Standardizer::identity(CHI_DIM),
        };
        for _ in 0..1000 {
            let c = Vector::from_fn(10, |_, _| rng.random_range(-50.0..50.0));
            let p = classify(&params, &c);
            assert!((p.sum() - 1.0).abs() < 1e-9 && p.min() >= 0.0);
        }
    }

    #[test]
    fn xi_estimates() {
        let grid = MORPH_GRID;
        let mut e3 = Vector::zeros(6);
        e3[2] = 1.0;
        assert!((estimate_xi(&e3, &grid).unwrap().value() - 0.4).abs() < 1e-15);
        let uniform = Vector::from_element(6, 1.0 / 6.0);
        assert!((estimate_xi(&uniform, &grid).unwrap().value() - 0.5).abs() < 1e-12);
        let mut mix = Vector::zeros(6);
        mix[1] = 0.5;
        mix[2] = 0.5;
        assert!((estimate_xi(&mix, &grid).unwrap().value() - 0.3).abs() < 1e-15);
        assert!(matches!(
            estimate_xi(&Vector::from_element(6, 0.5), &grid),
            Err(Error::NotSimplex { .. })
        ));
    }

    #[test]
    fn separable_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let centers: Vec<Vector> = (0..6)
            .map(|_| Vector::from_fn(10, |_, _| rng.random_range(-3.0..3.0)))
            .collect();
        let noise = Normal::new(0.0, 0.3).unwrap();
        let sample = |rng: &mut ChaCha8Rng, n: usize| {
            let labels: Vec<usize> = (0..n).map(|i| i % 6).collect();
            let m = Matrix::from_fn(10, n, |i, j| centers[labels[j]][i] + noise.sample(rng));
            (m, labels)
        };
        let (xt, lt) = sample(&mut rng, 1200);
        let (xv, lv) = sample(&mut rng, 600);
        let cfg = ClassifierConfig {
            epochs: 10,
            ..ClassifierConfig::default()
        };
        let (params, hist) = fit_classifier(&xt, &lt, &cfg).unwrap();
        assert!(hist.last().unwrap() < &hist[0]);
        let acc = nn::accuracy(&params.classify_batch(&xv), &lv);
        assert!(acc >= 0.95, "{acc}");
    }
}

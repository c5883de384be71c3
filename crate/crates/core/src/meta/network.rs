//! The shared representation `φ(x)`, its block-diagonal lift `Φ(x)`, and the
//! condition discriminator.

use rand::Rng;

use crate::linalg::{self, Matrix, Vector};
use crate::nn::{self, Mlp, Standardizer};
use crate::vehicle::{StateVec, NUM_CONDITIONS, STATE_DIM};

/// Hidden widths of `φ`.
pub const PHI_HIDDEN: [usize; 3] = [64, 64, 32];
/// Hidden width of the discriminator.
pub const DISC_HIDDEN: usize = 128;

/// Feature network `φ: R⁵ → Rᵐ` with a fixed input standardization.
///
/// The output layer is linear, so `ϱ(φ(x)) = φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiNetwork {
    pub mlp: Mlp,
    pub input: Standardizer,
}

impl PhiNetwork {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, input: Standardizer, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&phi_sizes(feature_dim), rng),
            input,
        }
    }

    pub fn zeros(feature_dim: usize) -> Self {
        Self {
            mlp: Mlp::zeros(&phi_sizes(feature_dim)),
            input: Standardizer::identity(STATE_DIM),
        }
    }

    /// Feature width `m`.
    pub fn feature_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    /// Coefficient width `h = 5m`.
    pub fn coeff_dim(&self) -> usize {
        STATE_DIM * self.feature_dim()
    }

    /// Features for a batch of states stored column-wise (`5 × N` → `m × N`).
    pub fn features_batch(&self, x: &Matrix) -> Matrix {
        self.mlp.forward(&self.input.apply(x))
    }

    pub fn features(&self, x: &StateVec) -> Vector {
        let xs = Vector::from_column_slice(x.as_slice());
        self.mlp.forward_one(&self.input.apply_vec(&xs))
    }

    pub fn feature_map(&self, x: &StateVec) -> FeatureMap {
        FeatureMap { phi: self.features(x) }
    }

    /// Rescales every weight matrix to spectral norm at most `bound`.
    pub fn spectral_normalize(&mut self, bound: f64) {
        for layer in &mut self.mlp.layers {
            linalg::spectral_normalize_in_place(&mut layer.weight, bound);
        }
    }
}

fn phi_sizes(feature_dim: usize) -> Vec<usize> {
    let mut s = vec![STATE_DIM];
    s.extend(PHI_HIDDEN);
    s.push(feature_dim);
    s
}

/// Features at one state together with the lifted `Φ = I₅ ⊗ φᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub phi: Vector,
}

impl FeatureMap {
    /// The `5 × 5m` block-diagonal matrix `Φ(x)`.
    pub fn matrix(&self) -> Matrix {
        let m = self.phi.len();
        let mut out = Matrix::zeros(STATE_DIM, STATE_DIM * m);
        for i in 0..STATE_DIM {
            out.view_mut((i, i * m), (1, m)).copy_from(&self.phi.transpose());
        }
        out
    }

    /// `Φ(x)·a` without forming `Φ`.
    pub fn predict(&self, a: &CoeffVector) -> StateVec {
        let m = self.phi.len();
        assert_eq!(a.0.len(), STATE_DIM * m, "coefficient width mismatch");
        StateVec::from_fn(|i, _| a.0.rows(i * m, m).dot(&self.phi))
    }
}

/// Stacked output-layer weights `a = vec(W)`, row `i` of `W` occupying
/// entries `[i·m, (i+1)·m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector(pub Vector);

impl CoeffVector {
    pub fn zeros(coeff_dim: usize) -> Self {
        Self(Vector::zeros(coeff_dim))
    }

    /// The `5 × m` weight matrix `W` with `Φ(x)a = Wφ(x)`.
    pub fn as_weight(&self) -> Matrix {
        let m = self.0.len() / STATE_DIM;
        Matrix::from_row_slice(STATE_DIM, m, self.0.as_slice())
    }

    pub fn from_weight(w: &Matrix) -> Self {
        Self(Vector::from_iterator(w.len(), w.transpose().iter().copied()))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Discriminator `h: Rᵐ → Δ⁶` predicting the condition index from features.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub mlp: Mlp,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[feature_dim, DISC_HIDDEN, NUM_CONDITIONS], rng),
        }
    }

    pub fn zeros(feature_dim: usize) -> Self {
        Self {
            mlp: Mlp::zeros(&[feature_dim, DISC_HIDDEN, NUM_CONDITIONS]),
        }
    }

    /// Class probabilities for a batch of feature columns.
    pub fn probabilities(&self, features: &Matrix) -> Matrix {
        nn::softmax(&self.mlp.forward(features))
    }

    pub fn forward(&self, phi: &Vector) -> Vector {
        nn::softmax_vec(&self.mlp.forward_one(phi))
    }
}

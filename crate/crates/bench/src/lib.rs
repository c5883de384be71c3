//! Fixed-seed problem instances shared by the benchmarks.

use morphnash::game::{assemble_sd_model, GameConfig, GameWeights, SdModel};
use morphnash::linalg::Matrix;
use morphnash::meta::daiml::Batch;
use morphnash::meta::{DaimlConfig, Discriminator, PhiNetwork};
use morphnash::nn::Standardizer;
use morphnash::vehicle::{StateVec, TrimPoint, VehicleParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Hurwitz matrix: random entries shifted left of the spectral abscissa.
pub fn random_stable(n: usize, rng: &mut impl Rng) -> Matrix {
    let m = random_matrix(n, n, rng);
    let shift = morphnash::linalg::spectral_abscissa(&m) + 0.5;
    m - DMatrix::identity(n, n) * shift
}

/// Symmetric positive definite with eigenvalues at least `floor`.
pub fn random_spd(n: usize, floor: f64, rng: &mut impl Rng) -> Matrix {
    let m = random_matrix(n, n, rng);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

/// Game model of the vehicle at a fixed off-trim state with a random
/// feature network.
pub struct GameFixture {
    pub model: SdModel,
    pub weights: GameWeights,
}

pub fn game_fixture(seed: u64) -> GameFixture {
    let params = VehicleParams::default();
    let trim = TrimPoint::default().refine(&params).expect("default trim refines");
    let mut r = rng(seed);
    let mut phi = PhiNetwork::new(5, Standardizer::identity(5), &mut r);
    phi.mlp.layers.iter_mut().for_each(|l| l.bias.fill(0.1));
    let x = StateVec::new(-2.0, 0.03, -0.02, 0.01, -5.0);
    let model = assemble_sd_model(&x, &params, &trim, &phi).expect("model assembles");
    let weights = GameConfig::default().weights().expect("default weights");
    GameFixture { model, weights }
}

/// Networks and two batches sized like one training step.
pub struct DaimlFixture {
    pub phi: PhiNetwork,
    pub disc: Discriminator,
    pub batch_a: Batch,
    pub batch_b: Batch,
    pub cfg: DaimlConfig,
}

pub fn daiml_fixture(seed: u64) -> DaimlFixture {
    let cfg = DaimlConfig::default();
    let mut r = rng(seed);
    let phi = PhiNetwork::new(cfg.feature_dim, Standardizer::identity(5), &mut r);
    let disc = Discriminator::new(cfg.feature_dim, &mut r);
    let mut batch = |n: usize| Batch {
        x: random_matrix(5, n, &mut r),
        y: random_matrix(5, n, &mut r),
    };
    let batch_a = batch(cfg.k);
    let batch_b = batch(cfg.b);
    DaimlFixture {
        phi,
        disc,
        batch_a,
        batch_b,
        cfg,
    }
}

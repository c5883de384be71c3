//! Actuator limits and additive Gaussian actuator noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::vehicle::{InputVec, TrimPoint, ELEVATOR_RANGE, THROTTLE_RANGE};

/// Componentwise clamp onto the admissible input set.
pub fn saturate(u: &InputVec) -> InputVec {
    InputVec::new(
        u[0].clamp(ELEVATOR_RANGE.0, ELEVATOR_RANGE.1),
        u[1].clamp(THROTTLE_RANGE.0, THROTTLE_RANGE.1),
    )
}

/// Per-channel standard deviations of zero-mean actuator noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorNoise {
    pub std: [f64; 2],
}

impl ActuatorNoise {
    pub const NONE: Self = Self { std: [0.0, 0.0] };

    /// `std_i = fraction · |u_e,i|`.
    pub fn from_trim(trim: &TrimPoint, fraction: f64) -> Self {
        Self {
            std: [fraction * trim.u_e.delta_e.abs(), fraction * trim.u_e.delta_t.abs()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.std.iter().all(|s| *s == 0.0)
    }

    /// Adds one noise draw to `u` and re-saturates.
    pub fn apply<R: Rng + ?Sized>(&self, u: &InputVec, rng: &mut R) -> InputVec {
        let mut out = *u;
        for (i, s) in self.std.iter().enumerate() {
            if *s > 0.0 {
                out[i] += Normal::new(0.0, *s).expect("finite non-negative std").sample(rng);
            }
        }
        saturate(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn saturation_examples() {
        assert_eq!(saturate(&InputVec::new(-1.0, 120.0)), InputVec::new(-0.7, 100.0));
        let inner = InputVec::new(0.1, 50.0);
        assert_eq!(saturate(&inner), inner);
        let s = saturate(&InputVec::new(3.0, -5.0));
        assert_eq!(saturate(&s), s);
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = InputVec::new(-0.3, 40.0);
        assert_eq!(ActuatorNoise::NONE.apply(&u, &mut rng), u);
    }

    #[test]
    fn default_noise_levels() {
        let n = ActuatorNoise::from_trim(&TrimPoint::default(), 0.3);
        assert!((n.std[0] - 0.0867).abs() < 1e-4);
        assert!((n.std[1] - 12.85).abs() < 1e-2);
    }

    #[test]
    fn noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = ActuatorNoise { std: [0.01, 2.0] };
        let u = InputVec::new(0.0, 50.0);
        let n = 1_000_000;
        let mut sum = InputVec::zeros();
        let mut sq = InputVec::zeros();
        for _ in 0..n {
            let d = noise.apply(&u, &mut rng) - u;
            sum += d;
            sq += d.component_mul(&d);
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            let sd = (sq[i] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() <= 3.0 * noise.std[i] / 1000.0, "mean {mean}");
            assert!((sd / noise.std[i] - 1.0).abs() < 0.01, "sd {sd}");
        }
    }
}

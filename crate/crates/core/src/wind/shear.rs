use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{WindError, WindField, WindSample};

/// One travelling Fourier mode `amplitude * sin(k . x - omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearMode {
    pub wavevector: [f64; 3],
    /// Perpendicular to `wavevector`, so the mode is divergence-free.
    pub amplitude: [f64; 3],
    pub phase: f64,
    pub frequency: f64,
}

/// Linear shear profile `U(z) = top_speed * z / height` plus a sum of
/// divergence-free Fourier modes, horizontally periodic with period `period_xy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShearField {
    pub top_speed: f64,
    pub height: f64,
    pub period_xy: f64,
    pub modes: Vec<ShearMode>,
}

impl SyntheticShearField {
    pub fn linear(top_speed: f64, height: f64) -> Self {
        SyntheticShearField {
            top_speed,
            height,
            period_xy: height,
            modes: Vec::new(),
        }
    }

    pub fn mean_profile(&self, z: f64) -> f64 {
        self.top_speed * z / self.height
    }

    /// Spatial RMS of the perturbation velocity (m/s).
    pub fn perturbation_rms(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude.iter().map(|a| a * a).sum::<f64>() / 2.0)
            .sum::<f64>()
            .sqrt()
    }
}

impl WindField for SyntheticShearField {
    fn sample(&self, x: f64, y: f64, z: f64, t: f64) -> Result<WindSample, WindError> {
        if z < 0.0 {
            return Err(WindError::BelowGround { z });
        }
        if z > self.height || z.is_nan() {
            return Err(WindError::AboveDomain { z, top: self.height });
        }
        let mut v = [self.mean_profile(z), 0.0, 0.0];
        for m in &self.modes {
            let k = m.wavevector;
            let s = (k[0] * x + k[1] * y + k[2] * z - m.frequency * t + m.phase).sin();
            for (vc, a) in v.iter_mut().zip(m.amplitude) {
                *vc += a * s;
            }
        }
        Ok(WindSample::new(v[0], v[1], v[2]))
    }

    fn ceiling(&self) -> Option<f64> {
        Some(self.height)
    }
}

/// Reproducible stand-in for a turbulent Couette snapshot: 30 m/s at a 100 m
/// lid, with `n_modes` random modes carrying 15% of the top speed as RMS.
pub fn synth_shear(seed: u64, n_modes: usize) -> SyntheticShearField {
    let mut field = SyntheticShearField::linear(30.0, 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_rms = 0.15 * field.top_speed;
    let per_mode = if n_modes > 0 {
        target_rms * (2.0 / n_modes as f64).sqrt()
    } else {
        0.0
    };
    let base = 2.0 * std::f64::consts::PI / field.period_xy;
    for _ in 0..n_modes {
        // Non-zero horizontal wavenumber keeps horizontal averages of the
        // perturbation at zero.
        let (nx, ny) = loop {
            let nx = rng.random_range(-3i32..=3);
            let ny = rng.random_range(-3i32..=3);
            if nx != 0 || ny != 0 {
                break (nx, ny);
            }
        };
        let k = [
            base * nx as f64,
            base * ny as f64,
            std::f64::consts::PI / field.height * rng.random_range(0..=3) as f64,
        ];
        let raw: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
        let kk: f64 = k.iter().map(|c| c * c).sum();
        let proj: f64 = raw.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() / kk;
        let mut a = [0, 1, 2].map(|c| raw[c] - proj * k[c]);
        let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-9 {
            a = [-k[1], k[0], 0.0];
        }
        let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        let amplitude = a.map(|c| c / norm * per_mode);
        field.modes.push(ShearMode {
            wavevector: k,
            amplitude,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            frequency: rng.random_range(0.0..1.0),
        });
    }
    field
}

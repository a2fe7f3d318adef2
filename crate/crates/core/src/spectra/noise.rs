use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::resonator::ComplexSpectrum;
use crate::seed;

/// Additive complex Gaussian noise plus a global frequency offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Standard deviation per real/imaginary component of linear S11.
    pub sigma_complex: f64,
    /// Standard deviation of the frequency offset, Hz.
    #[serde(rename = "f_jitter_hz")]
    pub f_jitter: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_complex: 0.01,
            f_jitter: 0.5e6,
        }
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        sigma_complex: 0.0,
        f_jitter: 0.0,
    };

    pub fn validate(&self) -> crate::Result<()> {
        if self.sigma_complex >= 0.0 && self.f_jitter >= 0.0 {
            Ok(())
        } else {
            Err(crate::Error::Config(format!(
                "noise deviations must be non-negative: {self:?}"
            )))
        }
    }
}

/// The frequency offset `add_noise` applies for `seed`.
pub fn frequency_offset(noise: &NoiseModel, seed: u64) -> f64 {
    let mut rng = seed::rng(seed::mix(seed, 0xF0, 0));
    let z: f64 = StandardNormal.sample(&mut rng);
    noise.f_jitter * z
}

/// Adds i.i.d. Gaussian noise to the real and imaginary parts of `s11`,
/// drawn from the stream for `seed`.
pub fn add_complex_noise(s11: &[Complex64], sigma: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = seed::rng(seed::mix(seed, 0xC0, 0));
    s11.iter()
        .map(|z| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(z.re + sigma * re, z.im + sigma * im)
        })
        .collect()
}

/// Noisy copy of `spectrum`: every frequency moves by one offset draw and
/// every sample gets independent complex noise.
pub fn add_noise(spectrum: &ComplexSpectrum, noise: &NoiseModel, seed: u64) -> ComplexSpectrum {
    let offset = frequency_offset(noise, seed);
    let values = add_complex_noise(spectrum.s11(), noise.sigma_complex, seed);
    spectrum.shifted(offset).with_values(values).expect("shape preserved")
}

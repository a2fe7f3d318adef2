use num_complex::Complex64;

use super::tensor::Tensor;
use crate::constants::mag_to_db;
use crate::dataset::{Dataset, LabeledSpectrum};
use crate::spectra::unwrap_phase;

/// One classifier input with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// `[2, N]`
    pub input: Tensor,
    pub label: usize,
}

/// Channel 0: magnitude in dB clamped to [−80, 0] and mapped onto [−1, 1].
/// Channel 1: unwrapped phase divided by π.
pub fn preprocess_s11(s11: &[Complex64]) -> Tensor {
    let n = s11.len();
    let mut data = Vec::with_capacity(2 * n);
    data.extend(s11.iter().map(|z| mag_to_db(z.norm()).clamp(-80.0, 0.0) / 40.0 + 1.0));
    data.extend(unwrap_phase(s11).into_iter().map(|p| p / std::f64::consts::PI));
    Tensor::new(vec![2, n], data).expect("two channels of n")
}

pub fn preprocess(record: &LabeledSpectrum) -> Tensor {
    preprocess_s11(&record.s11)
}

pub fn examples_from(ds: &Dataset) -> Vec<Example> {
    ds.records
        .iter()
        .map(|r| Example {
            input: preprocess(r),
            label: r.label.code(),
        })
        .collect()
}

/// Zeroes the phase channel.
pub fn ablate_phase(examples: &[Example]) -> Vec<Example> {
    examples
        .iter()
        .map(|e| {
            let mut input = e.input.clone();
            let n = input.shape()[1];
            input.data_mut()[n..].fill(0.0);
            Example { input, label: e.label }
        })
        .collect()
}

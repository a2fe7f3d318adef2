//! Desk-scale digital twin of a CPW-fed slot-loop urine biosensor.
//!
//! The pipeline runs condition → dielectric sample → loaded resonance →
//! complex S11 sweep → noisy labeled record → CNN-LSTM classifier → metrics.
//!
//! * [`dielectric`]: per-condition dielectric ranges, specimen sampling, complex permittivity
//! * [`resonator`]: slot resonance, calibration, lumped one-port reflection synthesis
//! * [`spectra`]: Touchstone I/O, measurement noise, feature extraction
//! * [`dataset`]: deterministic synthetic datasets, stratified splits, JSONL persistence
//! * [`neural`]: tensors, CNN-LSTM with analytic backprop, training, metrics

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dataset;
pub mod dielectric;
pub mod error;
pub mod neural;
pub mod resonator;
pub mod seed;
pub mod spectra;

pub use dataset::{Dataset, GenConfig, LabeledSpectrum};
pub use dielectric::{ClinicalInfo, DielectricRange, SampleDielectrics, UrineCondition};
pub use error::{Error, Result};
pub use resonator::{AntennaGeometry, CalibrationModel, ComplexSpectrum, Coupling, FrequencySweep};
pub use spectra::{FeatureVector, NoiseModel, TouchstoneFormat};

/// Version string written into generated files.
pub const GENERATOR: &str = concat!("uritwin ", env!("CARGO_PKG_VERSION"));

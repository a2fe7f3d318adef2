//! Fixtures shared by the criterion benches.

use uritwin::neural::{Example, Model, ModelConfig};
use uritwin::resonator::{default_calibration, synth_s11};
use uritwin::{dielectric, CalibrationModel, ComplexSpectrum, Coupling, FrequencySweep, UrineCondition};

pub struct Fixture {
    pub calibration: CalibrationModel,
    pub sweep: FrequencySweep,
    pub sample: dielectric::SampleDielectrics,
    pub spectrum: ComplexSpectrum,
    pub model: Model,
    pub example: Example,
}

pub fn fixture() -> Fixture {
    let calibration = default_calibration();
    let sweep = FrequencySweep::default();
    let sample = dielectric::sample_dielectrics(UrineCondition::Diabetic, 1);
    let spectrum = synth_s11(&calibration, &Coupling::default(), &sample, &sweep)
        .expect("synthesis")
        .spectrum;
    let model = Model::new(ModelConfig::default()).expect("default model");
    let example = Example {
        input: uritwin::neural::preprocess_s11(spectrum.s11()),
        label: UrineCondition::Diabetic.code(),
    };
    Fixture {
        calibration,
        sweep,
        sample,
        spectrum,
        model,
        example,
    }
}

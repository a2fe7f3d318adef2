use serde::{Deserialize, Serialize};
use uritwin::dielectric::DipoleConfig;
use uritwin::neural::{ModelConfig, TrainConfig};
use uritwin::resonator::{DEFAULT_KAPPA_LOSS, DEFAULT_Q0};
use uritwin::{Coupling, FrequencySweep, NoiseModel};

/// Every tunable in one JSON document. All keys are optional; unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub generation: GenerationConfig,
    pub noise: NoiseModel,
    pub resonator: ResonatorConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub n_per_class: usize,
    pub master_seed: u64,
    pub sweep: FrequencySweep,
    pub dipole: DipoleConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_per_class: 500,
            master_seed: 42,
            sweep: FrequencySweep::default(),
            dipole: DipoleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonatorConfig {
    pub q0: f64,
    pub kappa_loss: f64,
    pub g0: f64,
    pub dipole_phase_gain: f64,
}

impl Default for ResonatorConfig {
    fn default() -> Self {
        let c = Coupling::default();
        Self {
            q0: DEFAULT_Q0,
            kappa_loss: DEFAULT_KAPPA_LOSS,
            g0: c.g0,
            dipole_phase_gain: c.dipole_phase_gain,
        }
    }
}

impl ResonatorConfig {
    pub fn coupling(&self) -> Coupling {
        Coupling {
            g0: self.g0,
            dipole_phase_gain: self.dipole_phase_gain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
            seed: 42,
        }
    }
}

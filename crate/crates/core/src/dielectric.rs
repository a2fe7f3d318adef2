//! Urine dielectric properties at 1 GHz / 25 °C and the complex
//! permittivity model used by the resonator.
//!
//! The storage component ε′ is taken as flat across the sensing band. The
//! loss factor is the sum of a single-pole Debye term (glucose dipole
//! relaxation) and ionic conduction:
//!
//! ```text
//! ε″(f) = Δε·ωτ / (1 + (ωτ)²) + σ / (ω·ε0),   ω = 2πf
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::error::{Error, Result};
use crate::seed;

/// The five urine conditions. Integer codes 0..4 follow declaration order
/// and are the class labels used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UrineCondition {
    Healthy,
    Diluted,
    Concentrated,
    Diabetic,
    Dehydrated,
}

impl UrineCondition {
    pub const ALL: [UrineCondition; 5] = [
        UrineCondition::Healthy,
        UrineCondition::Diluted,
        UrineCondition::Concentrated,
        UrineCondition::Diabetic,
        UrineCondition::Dehydrated,
    ];

    pub const COUNT: usize = 5;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Lowercase name used in files and CLI output.
    pub fn name(self) -> &'static str {
        match self {
            UrineCondition::Healthy => "healthy",
            UrineCondition::Diluted => "diluted",
            UrineCondition::Concentrated => "concentrated",
            UrineCondition::Diabetic => "diabetic",
            UrineCondition::Dehydrated => "dehydrated",
        }
    }

    /// Capitalised name for reports.
    pub fn title(self) -> &'static str {
        match self {
            UrineCondition::Healthy => "Healthy",
            UrineCondition::Diluted => "Diluted",
            UrineCondition::Concentrated => "Concentrated",
            UrineCondition::Diabetic => "Diabetic",
            UrineCondition::Dehydrated => "Dehydrated",
        }
    }
}

impl fmt::Display for UrineCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UrineCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

/// Measured ranges for one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DielectricRange {
    pub eps_min: f64,
    pub eps_max: f64,
    /// S/m
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// g/cm³
    pub density_min: f64,
    pub density_max: f64,
}

impl DielectricRange {
    pub fn eps_mid(&self) -> f64 {
        0.5 * (self.eps_min + self.eps_max)
    }

    pub fn sigma_mid(&self) -> f64 {
        0.5 * (self.sigma_min + self.sigma_max)
    }

    pub fn density_mid(&self) -> f64 {
        0.5 * (self.density_min + self.density_max)
    }

    pub fn contains(&self, s: &SampleDielectrics) -> bool {
        (self.eps_min..=self.eps_max).contains(&s.eps_prime)
            && (self.sigma_min..=self.sigma_max).contains(&s.sigma)
            && (self.density_min..=self.density_max).contains(&s.density)
    }
}

/// Dielectric ranges of urine at 1 GHz and 25 °C.
pub fn table1_range(condition: UrineCondition) -> DielectricRange {
    let (eps, sigma, density) = match condition {
        UrineCondition::Healthy => ((70.0, 75.0), (0.5, 2.0), (1.010, 1.030)),
        UrineCondition::Diluted => ((75.0, 80.0), (0.2, 0.5), (1.000, 1.010)),
        UrineCondition::Concentrated => ((60.0, 70.0), (2.0, 4.0), (1.025, 1.040)),
        UrineCondition::Diabetic => ((65.0, 72.0), (1.5, 3.5), (1.020, 1.035)),
        UrineCondition::Dehydrated => ((55.0, 65.0), (3.0, 5.0), (1.030, 1.050)),
    };
    DielectricRange {
        eps_min: eps.0,
        eps_max: eps.1,
        sigma_min: sigma.0,
        sigma_max: sigma.1,
        density_min: density.0,
        density_max: density.1,
    }
}

/// Debye dipole-relaxation parameters used when sampling specimens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipoleConfig {
    /// Δε range for diabetic specimens.
    pub diabetic_delta_eps: (f64, f64),
    /// Δε range for every other condition.
    pub other_delta_eps: (f64, f64),
    /// Relaxation time, seconds.
    pub tau_s: f64,
}

impl Default for DipoleConfig {
    fn default() -> Self {
        Self {
            diabetic_delta_eps: (4.0, 8.0),
            other_delta_eps: (0.0, 0.5),
            tau_s: 25e-12,
        }
    }
}

impl DipoleConfig {
    pub fn range_for(&self, condition: UrineCondition) -> (f64, f64) {
        match condition {
            UrineCondition::Diabetic => self.diabetic_delta_eps,
            _ => self.other_delta_eps,
        }
    }
}

/// Dielectric description of one urine specimen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDielectrics {
    pub eps_prime: f64,
    /// S/m
    pub sigma: f64,
    /// g/cm³
    pub density: f64,
    pub delta_eps_dipole: f64,
    /// seconds
    pub tau: f64,
    pub condition: UrineCondition,
}

impl SampleDielectrics {
    /// The mid-range specimen for a condition: range midpoints and the
    /// midpoint of the condition's Δε range.
    pub fn nominal(condition: UrineCondition, dipole: &DipoleConfig) -> Self {
        let r = table1_range(condition);
        let (d0, d1) = dipole.range_for(condition);
        Self {
            eps_prime: r.eps_mid(),
            sigma: r.sigma_mid(),
            density: r.density_mid(),
            delta_eps_dipole: 0.5 * (d0 + d1),
            tau: dipole.tau_s,
            condition,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_prime > 1.0
            && self.sigma >= 0.0
            && self.delta_eps_dipole >= 0.0
            && self.tau > 0.0
            && [self.eps_prime, self.sigma, self.delta_eps_dipole, self.tau]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid dielectric sample {self:?}")))
        }
    }

    /// Debye dipole loss Δε·ωτ/(1+(ωτ)²) at `f_hz`. No domain check.
    pub fn dipole_loss(&self, f_hz: f64) -> f64 {
        let wt = 2.0 * PI * f_hz * self.tau;
        self.delta_eps_dipole * wt / (1.0 + wt * wt)
    }

    /// Ionic conduction loss σ/(ωε0) at `f_hz`. No domain check.
    pub fn ionic_loss(&self, f_hz: f64) -> f64 {
        self.sigma / (2.0 * PI * f_hz * EPS0)
    }
}

/// Draws one specimen of `condition` with the default dipole parameters.
pub fn sample_dielectrics(condition: UrineCondition, seed: u64) -> SampleDielectrics {
    sample_dielectrics_with(condition, seed, &DipoleConfig::default())
}

pub fn sample_dielectrics_with(condition: UrineCondition, seed: u64, dipole: &DipoleConfig) -> SampleDielectrics {
    let r = table1_range(condition);
    let mut rng = seed::rng(seed::mix(seed, 0xD1E1, condition.code() as u64));
    let (d0, d1) = dipole.range_for(condition);
    SampleDielectrics {
        eps_prime: rng.random_range(r.eps_min..=r.eps_max),
        sigma: rng.random_range(r.sigma_min..=r.sigma_max),
        density: rng.random_range(r.density_min..=r.density_max),
        delta_eps_dipole: rng.random_range(d0..=d1),
        tau: dipole.tau_s,
        condition,
    }
}

/// ε* = ε′ − jε″ evaluated at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPermittivity {
    pub storage: f64,
    pub loss: f64,
}

impl ComplexPermittivity {
    pub fn loss_tangent(&self) -> f64 {
        self.loss / self.storage
    }
}

pub fn complex_permittivity(sample: &SampleDielectrics, f_hz: f64) -> Result<ComplexPermittivity> {
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Domain(format!(
            "frequency must be positive and finite, got {f_hz}"
        )));
    }
    let loss = sample.dipole_loss(f_hz) + sample.ionic_loss(f_hz);
    if !loss.is_finite() {
        return Err(Error::Domain(format!("non-finite loss at {f_hz} Hz")));
    }
    Ok(ComplexPermittivity {
        storage: sample.eps_prime,
        loss,
    })
}

/// Associated diseases and clinical indicators for a condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClinicalInfo {
    pub condition: UrineCondition,
    pub diseases: &'static str,
    pub indicators: &'static str,
}

pub fn clinical_info(condition: UrineCondition) -> ClinicalInfo {
    let (diseases, indicators) = match condition {
        UrineCondition::Healthy => (
            "No disease (baseline)",
            "Normal hydration, balanced electrolytes",
        ),
        UrineCondition::Diluted => (
            "Overhydration, diabetes insipidus (ADH deficiency)",
            "Low specific gravity (<1.010), pale color, high urine",
        ),
        UrineCondition::Concentrated => (
            "Dehydration, fever/sweating, high-protein diet, SIADH (syndrome of inappropriate ADH)",
            "Dark color, high specific gravity (>1.025), low urine volume",
        ),
        UrineCondition::Diabetic => (
            "Diabetes mellitus (Type 1/2), gestational diabetes",
            "Glycosuria, hyperglycemia, high urine osmolality",
        ),
        UrineCondition::Dehydrated => (
            "Severe dehydration, acute kidney injury (pre-renal), high salt intake, Addison's disease (low aldosterone)",
            "Elevated Na+/K+, high urine osmolality, low urine volume",
        ),
    };
    ClinicalInfo {
        condition,
        diseases,
        indicators,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_stable() {
        for (i, c) in UrineCondition::ALL.iter().enumerate() {
            assert_eq!(c.code(), i);
            assert_eq!(UrineCondition::from_code(i), Some(*c));
            assert_eq!(c.name().parse::<UrineCondition>().unwrap(), *c);
        }
        assert_eq!(UrineCondition::from_code(5), None);
        assert!("Healthy".parse::<UrineCondition>().is_err());
    }

    #[test]
    fn table_rows() {
        let h = table1_range(UrineCondition::Healthy);
        assert_eq!((h.eps_min, h.eps_max), (70.0, 75.0));
        assert_eq!((h.sigma_min, h.sigma_max), (0.5, 2.0));
        assert_eq!((h.density_min, h.density_max), (1.010, 1.030));

        let d = table1_range(UrineCondition::Dehydrated);
        assert_eq!((d.eps_min, d.eps_max), (55.0, 65.0));
        assert_eq!((d.sigma_min, d.sigma_max), (3.0, 5.0));
        assert_eq!((d.density_min, d.density_max), (1.030, 1.050));

        let l = table1_range(UrineCondition::Diluted);
        assert_eq!((l.eps_min, l.eps_max), (75.0, 80.0));
        assert_eq!((l.sigma_min, l.sigma_max), (0.2, 0.5));
        assert_eq!((l.density_min, l.density_max), (1.000, 1.010));

        for c in UrineCondition::ALL {
            let r = table1_range(c);
            assert!(r.eps_min > 1.0 && r.eps_min <= r.eps_max);
            assert!(r.sigma_min > 0.0 && r.sigma_min <= r.sigma_max);
            assert!(r.density_min > 0.0 && r.density_min <= r.density_max);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_dielectrics(UrineCondition::Diabetic, 1234);
        let b = sample_dielectrics(UrineCondition::Diabetic, 1234);
        assert_eq!(a, b);
        assert_ne!(a, sample_dielectrics(UrineCondition::Diabetic, 1235));
    }

    #[test]
    fn non_diabetic_dipole_is_small() {
        for seed in 0..200 {
            let s = sample_dielectrics(UrineCondition::Dehydrated, seed);
            assert!(s.delta_eps_dipole <= 0.5);
            let d = sample_dielectrics(UrineCondition::Diabetic, seed);
            assert!((4.0..=8.0).contains(&d.delta_eps_dipole));
            assert_eq!(d.tau, 25e-12);
        }
    }

    fn lossy(sigma: f64, delta: f64) -> SampleDielectrics {
        SampleDielectrics {
            eps_prime: 72.0,
            sigma,
            density: 1.02,
            delta_eps_dipole: delta,
            tau: 25e-12,
            condition: UrineCondition::Healthy,
        }
    }

    #[test]
    fn ionic_loss_at_one_gigahertz() {
        let e = complex_permittivity(&lossy(1.0, 0.0), 1e9).unwrap();
        // 1 / (2π · 1e9 · 8.8541878128e-12)
        assert!((e.loss - 17.975_103_584_522_344).abs() < 1e-9, "{}", e.loss);
        assert_eq!(e.storage, 72.0);
    }

    #[test]
    fn debye_peak_is_half_amplitude() {
        let s = lossy(0.0, 6.0);
        let f_peak = 1.0 / (2.0 * PI * s.tau);
        let e = complex_permittivity(&s, f_peak).unwrap();
        assert!((e.loss - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lossless_sample_has_no_loss() {
        let s = lossy(0.0, 0.0);
        for f in [1e6, 5e8, 1e9, 3e10] {
            assert_eq!(complex_permittivity(&s, f).unwrap().loss, 0.0);
        }
    }

    #[test]
    fn rejects_non_positive_frequency() {
        let s = lossy(1.0, 1.0);
        assert!(matches!(complex_permittivity(&s, 0.0), Err(Error::Domain(_))));
        assert!(complex_permittivity(&s, -1e9).is_err());
        assert!(complex_permittivity(&s, f64::NAN).is_err());
    }

    #[test]
    fn clinical_rows() {
        assert_eq!(
            clinical_info(UrineCondition::Diabetic).indicators,
            "Glycosuria, hyperglycemia, high urine osmolality"
        );
        assert!(clinical_info(UrineCondition::Diluted)
            .indicators
            .contains("Low specific gravity (<1.010)"));
        assert_eq!(clinical_info(UrineCondition::Healthy).diseases, "No disease (baseline)");
        for c in UrineCondition::ALL {
            let info = clinical_info(c);
            assert!(!info.diseases.is_empty() && !info.indicators.is_empty());
        }
    }
}

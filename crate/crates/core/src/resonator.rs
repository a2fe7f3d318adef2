//! Slot resonance, loaded-resonance calibration and lumped one-port S11
//! synthesis.
//!
//! The unloaded slot resonates at `f = c / (2·L_eff·√ε_eff)`. Loading the
//! slot with a sample raises the effective permittivity to the affine mix
//! `α + β·ε′`, fitted by linear least squares to the reported loaded
//! resonances. The reflection of the loaded slot is a single-mode coupled
//! resonator:
//!
//! ```text
//! S11(f) = ((g − 1) + 2jQu·δ) / ((g + 1) + 2jQu·δ) · exp(−j·k·ε″_dip(f)),  δ = (f − fr)/fr
//! ```
//!
//! where the last factor is the reflection-phase rotation of the sample's
//! dipolar relaxation (magnitude-preserving).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::C;
use crate::dielectric::{complex_permittivity, SampleDielectrics};
use crate::error::{Error, Result};

/// Permittivity span over which a calibration must stay physical.
pub const EPS_SPAN: (f64, f64) = (55.0, 80.0);

/// Unloaded resonance of the bare antenna, Hz.
pub const F_UNLOADED: f64 = 1.42e9;

/// CPW-fed slot-loop antenna on Duroid 6010LM. Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaGeometry {
    pub ls: f64,
    pub ws: f64,
    pub lsl: f64,
    pub wsl: f64,
    pub lcpw: f64,
    pub scpw: f64,
    pub substrate_eps_r: f64,
    pub substrate_h: f64,
    pub tan_delta: f64,
    /// S/m
    pub ground_conductivity: f64,
}

impl Default for AntennaGeometry {
    fn default() -> Self {
        Self {
            ls: 70e-3,
            ws: 70e-3,
            lsl: 40e-3,
            wsl: 1.2e-3,
            lcpw: 31.3e-3,
            scpw: 4.2e-3,
            substrate_eps_r: 10.2,
            substrate_h: 2.54e-3,
            tan_delta: 0.0023,
            ground_conductivity: 5.8e7,
        }
    }
}

impl AntennaGeometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            self.ls,
            self.ws,
            self.lsl,
            self.wsl,
            self.lcpw,
            self.scpw,
            self.substrate_h,
        ];
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Domain("antenna lengths must be positive".into()));
        }
        if !(self.substrate_eps_r > 1.0) {
            return Err(Error::Domain("substrate permittivity must exceed 1".into()));
        }
        if !(self.tan_delta > 0.0 && self.tan_delta < 1.0) {
            return Err(Error::Domain("loss tangent must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Half-space CPW approximation (ε_r + 1)/2.
    pub fn eps_eff_unloaded(&self) -> f64 {
        0.5 * (self.substrate_eps_r + 1.0)
    }
}

/// Resonant frequency of a slot of effective length `l_eff` in a medium of
/// effective permittivity `eps_eff`.
pub fn slot_resonance(l_eff: f64, eps_eff: f64) -> f64 {
    C / (2.0 * l_eff * eps_eff.sqrt())
}

/// Effective slot length that resonates at `f_hz` in `eps_eff`.
pub fn slot_length_for(f_hz: f64, eps_eff: f64) -> f64 {
    C / (2.0 * f_hz * eps_eff.sqrt())
}

/// Effective permittivity that makes a slot of length `l_eff` resonate at `f_hz`.
pub fn eps_eff_for(l_eff: f64, f_hz: f64) -> f64 {
    let r = C / (2.0 * l_eff * f_hz);
    r * r
}

/// Effective slot length reproducing the measured unloaded resonance.
pub fn calibrate_unloaded(geometry: &AntennaGeometry, f_unloaded: f64) -> Result<f64> {
    if !(f_unloaded > 0.0 && f_unloaded.is_finite()) {
        return Err(Error::Domain(format!(
            "unloaded frequency must be positive, got {f_unloaded}"
        )));
    }
    Ok(slot_length_for(f_unloaded, geometry.eps_eff_unloaded()))
}

/// One calibration target: a sample permittivity and its measured resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationPoint {
    pub eps_mid: f64,
    pub f_r_hz: f64,
}

/// Permittivity midpoints of the reference ranges paired with the measured loaded
/// resonances (healthy, diluted, concentrated, diabetic, dehydrated).
pub fn reference_points() -> Vec<CalibrationPoint> {
    [
        (72.5, 691.25e6),
        (77.5, 672.5e6),
        (65.0, 725e6),
        (68.5, 710e6),
        (60.0, 747.5e6),
    ]
    .into_iter()
    .map(|(eps_mid, f_r_hz)| CalibrationPoint { eps_mid, f_r_hz })
    .collect()
}

pub const DEFAULT_Q0: f64 = 150.0;
pub const DEFAULT_KAPPA_LOSS: f64 = 0.2;

/// Fitted mapping from sample permittivity to loaded resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationModel {
    pub l_eff_m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q0: f64,
    pub kappa_loss: f64,
    /// f_model − f_target for each calibration point, Hz.
    pub residuals_hz: Vec<f64>,
}

impl CalibrationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_eff_m > 0.0) {
            return Err(Error::Calibration("L_eff must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Calibration(format!(
                "mixing slope beta must be positive, got {}",
                self.beta
            )));
        }
        let lo = self.alpha + self.beta * EPS_SPAN.0;
        if !(lo >= 1.0) {
            return Err(Error::Calibration(format!(
                "effective permittivity {lo} < 1 at eps = {}",
                EPS_SPAN.0
            )));
        }
        if !(self.q0 > 1.0) {
            return Err(Error::Calibration("q0 must exceed 1".into()));
        }
        if !(self.kappa_loss >= 0.0) {
            return Err(Error::Calibration("kappa_loss must be non-negative".into()));
        }
        Ok(())
    }

    pub fn max_abs_residual_hz(&self) -> f64 {
        self.residuals_hz.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn eps_eff_loaded(&self, eps_prime: f64) -> f64 {
        self.alpha + self.beta * eps_prime
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Fits `(α, β)` so that `α + β·ε_mid` matches the effective permittivity
/// implied by each measured resonance, in the least-squares sense.
pub fn calibrate_loaded(points: &[CalibrationPoint], l_eff: f64) -> Result<CalibrationModel> {
    calibrate_loaded_with(points, l_eff, DEFAULT_Q0, DEFAULT_KAPPA_LOSS)
}

pub fn calibrate_loaded_with(
    points: &[CalibrationPoint],
    l_eff: f64,
    q0: f64,
    kappa_loss: f64,
) -> Result<CalibrationModel> {
    if points.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 calibration points, got {}",
            points.len()
        )));
    }
    if !(l_eff > 0.0) {
        return Err(Error::Calibration("L_eff must be positive".into()));
    }
    if points
        .iter()
        .any(|p| !(p.f_r_hz > 0.0 && p.f_r_hz.is_finite() && p.eps_mid.is_finite()))
    {
        return Err(Error::Calibration(
            "calibration points need finite permittivity and positive frequency".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.eps_mid).collect();
    let ys: Vec<f64> = points.iter().map(|p| eps_eff_for(l_eff, p.f_r_hz)).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let scale = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    if sxx <= 1e-12 * scale * scale * n {
        return Err(Error::Calibration(
            "calibration permittivities are degenerate (all equal)".into(),
        ));
    }
    let beta = sxy / sxx;
    let alpha = y_mean - beta * x_mean;

    let mut model = CalibrationModel {
        l_eff_m: l_eff,
        alpha,
        beta,
        q0,
        kappa_loss,
        residuals_hz: Vec::new(),
    };
    model.validate()?;
    model.residuals_hz = points
        .iter()
        .map(|p| slot_resonance(l_eff, model.eps_eff_loaded(p.eps_mid)) - p.f_r_hz)
        .collect();
    Ok(model)
}

/// Default calibration: 1.42 GHz unloaded resonance plus the five
/// reference loaded resonances.
pub fn default_calibration() -> CalibrationModel {
    let l_eff = calibrate_unloaded(&AntennaGeometry::default(), F_UNLOADED).expect("default geometry is valid");
    calibrate_loaded(&reference_points(), l_eff).expect("reference points calibrate")
}

/// Loaded resonance for a sample of storage permittivity `eps_prime`.
pub fn loaded_resonance(model: &CalibrationModel, eps_prime: f64) -> Result<f64> {
    let eps_eff = model.eps_eff_loaded(eps_prime);
    if !(eps_eff >= 1.0) || !eps_eff.is_finite() {
        return Err(Error::Domain(format!(
            "effective permittivity {eps_eff} < 1 for eps' = {eps_prime}"
        )));
    }
    Ok(slot_resonance(model.l_eff_m, eps_eff))
}

/// Unloaded Q of the sample-loaded slot: `1/Q = 1/q0 + κ·ε″/ε′`.
pub fn quality_factor(model: &CalibrationModel, sample: &SampleDielectrics, f_r: f64) -> Result<f64> {
    let eps = complex_permittivity(sample, f_r)?;
    Ok(quality_from_tangent(model.q0, model.kappa_loss, eps.loss_tangent()))
}

pub(crate) fn quality_from_tangent(q0: f64, kappa: f64, tan_d: f64) -> f64 {
    1.0 / (1.0 / q0 + kappa * tan_d)
}

/// Coupling and phase-rotation settings of the reflection model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coupling {
    /// Coupling coefficient of a lossless sample.
    pub g0: f64,
    /// Reflection-phase rotation per unit of Debye dipole loss, radians.
    pub dipole_phase_gain: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            g0: 1.1,
            dipole_phase_gain: 0.9,
        }
    }
}

/// Uniform frequency grid, inclusive of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencySweep {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
}

impl Default for FrequencySweep {
    fn default() -> Self {
        Self {
            f_start_hz: 0.5e9,
            f_stop_hz: 1.5e9,
            n_points: 1001,
        }
    }
}

impl FrequencySweep {
    pub fn new(f_start_hz: f64, f_stop_hz: f64, n_points: usize) -> Result<Self> {
        let s = Self {
            f_start_hz,
            f_stop_hz,
            n_points,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_start_hz > 0.0 && self.f_start_hz < self.f_stop_hz && self.f_stop_hz.is_finite()) {
            return Err(Error::Domain(format!(
                "sweep needs 0 < f_start < f_stop, got {} .. {}",
                self.f_start_hz, self.f_stop_hz
            )));
        }
        if self.n_points < 2 {
            return Err(Error::Domain("sweep needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.f_stop_hz - self.f_start_hz) / (self.n_points - 1) as f64
    }

    pub fn frequency(&self, k: usize) -> f64 {
        if k + 1 == self.n_points {
            self.f_stop_hz
        } else {
            self.f_start_hz + k as f64 * self.step()
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.frequency(k)).collect()
    }

    pub fn contains(&self, f: f64) -> bool {
        (self.f_start_hz..=self.f_stop_hz).contains(&f)
    }

    /// The same grid moved by `offset_hz`.
    pub fn shifted(&self, offset_hz: f64) -> Self {
        Self {
            f_start_hz: self.f_start_hz + offset_hz,
            f_stop_hz: self.f_stop_hz + offset_hz,
            n_points: self.n_points,
        }
    }
}

/// Complex S11 sampled at strictly increasing frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    frequencies: Vec<f64>,
    s11: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(frequencies: Vec<f64>, s11: Vec<Complex64>) -> Result<Self> {
        if frequencies.len() != s11.len() {
            return Err(Error::Domain(format!(
                "{} frequencies but {} S11 values",
                frequencies.len(),
                s11.len()
            )));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("frequencies must be strictly increasing".into()));
        }
        Ok(Self { frequencies, s11 })
    }

    pub fn from_sweep(sweep: &FrequencySweep, s11: Vec<Complex64>) -> Result<Self> {
        sweep.validate()?;
        Self::new(sweep.frequencies(), s11)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn s11(&self) -> &[Complex64] {
        &self.s11
    }

    pub fn len(&self) -> usize {
        self.s11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s11.is_empty()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<Complex64>) {
        (self.frequencies, self.s11)
    }

    /// The uniform sweep this spectrum lies on, if its grid is uniform to
    /// within `1e-9` of a step.
    pub fn uniform_sweep(&self) -> Option<FrequencySweep> {
        let n = self.frequencies.len();
        if n < 2 {
            return None;
        }
        let sweep = FrequencySweep::new(self.frequencies[0], self.frequencies[n - 1], n).ok()?;
        let tol = 1e-9 * sweep.step();
        self.frequencies
            .iter()
            .enumerate()
            .all(|(k, f)| (f - sweep.frequency(k)).abs() <= tol.max(f.abs() * 1e-15))
            .then_some(sweep)
    }

    /// Mean frequency step.
    pub fn mean_step(&self) -> f64 {
        let n = self.frequencies.len();
        if n < 2 {
            return 0.0;
        }
        (self.frequencies[n - 1] - self.frequencies[0]) / (n - 1) as f64
    }

    /// Copy with every frequency moved by `offset_hz`.
    pub fn shifted(&self, offset_hz: f64) -> Self {
        Self {
            frequencies: self.frequencies.iter().map(|f| f + offset_hz).collect(),
            s11: self.s11.clone(),
        }
    }

    /// Copy with the same frequencies and new S11 values.
    pub fn with_values(&self, s11: Vec<Complex64>) -> Result<Self> {
        Self::new(self.frequencies.clone(), s11)
    }
}

/// Lumped reflection of a one-port resonator with unloaded quality `q_u`
/// and coupling `g`.
pub fn reflection(f: f64, f_r: f64, q_u: f64, g: f64) -> Complex64 {
    let x = 2.0 * q_u * (f - f_r) / f_r;
    Complex64::new(g - 1.0, x) / Complex64::new(g + 1.0, x)
}

/// A synthesized spectrum with the resonator parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub spectrum: ComplexSpectrum,
    pub f_r: f64,
    pub q_u: f64,
    pub coupling: f64,
    /// False when the loaded resonance falls outside the sweep.
    pub resonance_in_sweep: bool,
}

pub fn synth_s11(
    model: &CalibrationModel,
    coupling: &Coupling,
    sample: &SampleDielectrics,
    sweep: &FrequencySweep,
) -> Result<Synthesis> {
    sweep.validate()?;
    sample.validate()?;
    let f_r = loaded_resonance(model, sample.eps_prime)?;
    let eps = complex_permittivity(sample, f_r)?;
    let tan_d = eps.loss_tangent();
    let q_u = quality_from_tangent(model.q0, model.kappa_loss, tan_d);
    let g = coupling.g0 / (1.0 + model.kappa_loss * q_u * tan_d);
    let frequencies = sweep.frequencies();
    let s11 = frequencies
        .iter()
        .map(|&f| {
            let rot = -coupling.dipole_phase_gain * sample.dipole_loss(f);
            reflection(f, f_r, q_u, g) * Complex64::from_polar(1.0, rot)
        })
        .collect();
    Ok(Synthesis {
        spectrum: ComplexSpectrum::new(frequencies, s11)?,
        f_r,
        q_u,
        coupling: g,
        resonance_in_sweep: sweep.contains(f_r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dielectric::UrineCondition;

    #[test]
    fn unloaded_length() {
        let l = calibrate_unloaded(&AntennaGeometry::default(), 1.42e9).unwrap();
        // c / (2 · 1.42e9 · √5.6)
        assert!((l - 0.044_607_547_784).abs() < 1e-11, "{l}");
        assert_eq!(slot_resonance(l, 5.6), 1.42e9);
    }

    #[test]
    fn unit_permittivity_identity() {
        let g = AntennaGeometry {
            substrate_eps_r: 1.0,
            ..Default::default()
        };
        let l = calibrate_unloaded(&g, C / 2.0).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_slot_length_overshoots() {
        // the bare 40 mm slot would resonate near 1.59 GHz
        let f = slot_resonance(40e-3, AntennaGeometry::default().eps_eff_unloaded());
        assert!((f / 1e9 - 1.584).abs() < 0.01, "{f}");
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let l_eff = 0.05;
        let (a, b) = (2.5, 0.31);
        let pts: Vec<_> = [58.0, 79.0]
            .into_iter()
            .map(|e| CalibrationPoint {
                eps_mid: e,
                f_r_hz: slot_resonance(l_eff, a + b * e),
            })
            .collect();
        let m = calibrate_loaded(&pts, l_eff).unwrap();
        assert!(((m.alpha - a) / a).abs() < 1e-9);
        assert!(((m.beta - b) / b).abs() < 1e-9);
        assert!(m.max_abs_residual_hz() < 1e-3);
    }

    #[test]
    fn calibration_rejects_bad_inputs() {
        let one = &reference_points()[..1];
        assert!(matches!(calibrate_loaded(one, 0.045), Err(Error::Calibration(_))));
        let same = vec![
            CalibrationPoint {
                eps_mid: 70.0,
                f_r_hz: 7e8,
            },
            CalibrationPoint {
                eps_mid: 70.0,
                f_r_hz: 7.1e8,
            },
        ];
        assert!(matches!(calibrate_loaded(&same, 0.045), Err(Error::Calibration(_))));
        // rising frequency with permittivity implies beta < 0
        let inverted = vec![
            CalibrationPoint {
                eps_mid: 60.0,
                f_r_hz: 6.9e8,
            },
            CalibrationPoint {
                eps_mid: 75.0,
                f_r_hz: 7.4e8,
            },
        ];
        assert!(calibrate_loaded(&inverted, 0.045).is_err());
    }

    #[test]
    fn loaded_resonance_domain() {
        let m = default_calibration();
        assert!(loaded_resonance(&m, 77.5).unwrap() < loaded_resonance(&m, 60.0).unwrap());
        let bad = -(m.alpha - 0.5) / m.beta;
        assert!(matches!(loaded_resonance(&m, bad), Err(Error::Domain(_))));
    }

    #[test]
    fn quality_factor_cases() {
        let m = CalibrationModel {
            l_eff_m: 0.045,
            alpha: 3.9,
            beta: 0.27,
            q0: 150.0,
            kappa_loss: 0.2,
            residuals_hz: vec![],
        };
        let lossless = SampleDielectrics {
            eps_prime: 70.0,
            sigma: 0.0,
            density: 1.02,
            delta_eps_dipole: 0.0,
            tau: 25e-12,
            condition: UrineCondition::Healthy,
        };
        assert_eq!(quality_factor(&m, &lossless, 7e8).unwrap(), 150.0);
        // 1 / (1/150 + 0.2 · 0.25)
        let q = quality_from_tangent(150.0, 0.2, 0.25);
        assert!((q - 17.647_058_823_529_41).abs() < 1e-12, "{q}");
    }

    #[test]
    fn reflection_limits() {
        assert_eq!(reflection(7e8, 7e8, 50.0, 1.0).norm(), 0.0);
        assert!((reflection(7e8, 7e8, 50.0, 0.5).norm() - 1.0 / 3.0).abs() < 1e-15);
        let far = reflection(1.4e9, 7e8, 200.0, 0.8);
        assert!((far.norm() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn flags_out_of_band_resonance() {
        let m = default_calibration();
        let s = SampleDielectrics::nominal(UrineCondition::Healthy, &Default::default());
        let sweep = FrequencySweep::new(1.0e9, 1.5e9, 101).unwrap();
        let out = synth_s11(&m, &Coupling::default(), &s, &sweep).unwrap();
        assert!(!out.resonance_in_sweep);
        let out = synth_s11(&m, &Coupling::default(), &s, &FrequencySweep::default()).unwrap();
        assert!(out.resonance_in_sweep);
    }

    #[test]
    fn sweep_validation() {
        assert!(FrequencySweep::new(0.0, 1e9, 10).is_err());
        assert!(FrequencySweep::new(2e9, 1e9, 10).is_err());
        assert!(FrequencySweep::new(1e9, 2e9, 1).is_err());
        let s = FrequencySweep::default();
        assert_eq!(s.step(), 1e6);
        let f = s.frequencies();
        assert_eq!(f.len(), 1001);
        assert_eq!((f[0], f[1000]), (0.5e9, 1.5e9));
    }

    #[test]
    fn calibration_json_key_order() {
        let json = default_calibration().to_json();
        let keys = ["l_eff_m", "alpha", "beta", "q0", "kappa_loss", "residuals_hz"];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{json}");
        let back = CalibrationModel::from_json(&json).unwrap();
        assert_eq!(back, default_calibration());
    }
}

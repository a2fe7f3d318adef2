//! Deterministic synthetic datasets.
//!
//! Record `i` of class `c` uses `record_seed = seed::mix(master_seed, c, i)`,
//! i.e. `splitmix64(master ^ splitmix64((c << 32) | i))`. Every draw for a
//! record (dielectrics, frequency offset, complex noise) derives from that
//! seed alone. Records can therefore be produced in any order or thread
//! count and still assemble into identical output.
//!
//! A frequency-calibration offset `d` is applied by synthesising at
//! `f_k − d` and storing the values against the nominal grid `f_k`, so the
//! dip appears at `f_r + d` while every record shares one sweep.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dielectric::{sample_dielectrics_with, DipoleConfig, SampleDielectrics, UrineCondition};
use crate::error::{Error, Result};
use crate::resonator::{synth_s11, CalibrationModel, ComplexSpectrum, Coupling, FrequencySweep};
use crate::seed;
use crate::spectra::{add_complex_noise, frequency_offset, NoiseModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_per_class: usize,
    pub master_seed: u64,
    pub sweep: FrequencySweep,
    pub noise: NoiseModel,
    pub calibration: Option<CalibrationModel>,
    pub coupling: Coupling,
    pub dipole: DipoleConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_per_class: 500,
            master_seed: 42,
            sweep: FrequencySweep::default(),
            noise: NoiseModel::default(),
            calibration: None,
            coupling: Coupling::default(),
            dipole: DipoleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrum {
    pub label: UrineCondition,
    pub record_seed: u64,
    pub dielectrics: SampleDielectrics,
    /// S11 on the dataset's shared sweep.
    pub s11: Vec<Complex64>,
    /// Loaded resonance of the specimen before any frequency offset, Hz.
    pub f_r_true: f64,
}

impl LabeledSpectrum {
    pub fn spectrum(&self, sweep: &FrequencySweep) -> Result<ComplexSpectrum> {
        ComplexSpectrum::from_sweep(sweep, self.s11.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sweep: FrequencySweep,
    pub noise: NoiseModel,
    pub records: Vec<LabeledSpectrum>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_counts(&self) -> [usize; UrineCondition::COUNT] {
        let mut counts = [0; UrineCondition::COUNT];
        for r in &self.records {
            counts[r.label.code()] += 1;
        }
        counts
    }

    fn with_records(&self, records: Vec<LabeledSpectrum>) -> Self {
        Self {
            sweep: self.sweep,
            noise: self.noise,
            records,
        }
    }
}

fn generate_record(
    cfg: &GenConfig,
    calibration: &CalibrationModel,
    class: UrineCondition,
    index: usize,
) -> Result<LabeledSpectrum> {
    let record_seed = seed::mix(cfg.master_seed, class.code() as u64, index as u64);
    let dielectrics = sample_dielectrics_with(class, record_seed, &cfg.dipole);
    let offset = frequency_offset(&cfg.noise, record_seed);
    let synth = synth_s11(calibration, &cfg.coupling, &dielectrics, &cfg.sweep.shifted(-offset))?;
    let s11 = add_complex_noise(synth.spectrum.s11(), cfg.noise.sigma_complex, record_seed);
    Ok(LabeledSpectrum {
        label: class,
        record_seed,
        dielectrics,
        s11,
        f_r_true: synth.f_r,
    })
}

/// Generates `n_per_class` records per condition, in (class, index) order.
/// Runs on the current rayon pool; output does not depend on its size.
pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset> {
    let calibration = cfg
        .calibration
        .as_ref()
        .ok_or_else(|| Error::Config("dataset generation needs a calibration model".into()))?;
    calibration.validate()?;
    cfg.sweep.validate()?;
    cfg.noise.validate()?;
    if cfg.n_per_class == 0 {
        return Err(Error::Config("n_per_class must be at least 1".into()));
    }
    let tasks: Vec<(UrineCondition, usize)> = UrineCondition::ALL
        .into_iter()
        .flat_map(|c| (0..cfg.n_per_class).map(move |i| (c, i)))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(c, i)| generate_record(cfg, calibration, c, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        sweep: cfg.sweep,
        noise: cfg.noise,
        records,
    })
}

/// Stratified split into (train, validation, test).
///
/// Per class, validation and test each get `max(1, round(n·ratio))`
/// records and training keeps the rest, after a seeded shuffle.
pub fn split_dataset(ds: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!(
            "ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let mut parts: [Vec<LabeledSpectrum>; 3] = Default::default();
    for class in UrineCondition::ALL {
        let mut members: Vec<&LabeledSpectrum> = ds.records.iter().filter(|r| r.label == class).collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            return Err(Error::Split(format!(
                "class {class} has {n} records, fewer than the 3 splits"
            )));
        }
        let n_val = ((n as f64 * va).round() as usize).max(1);
        let n_test = ((n as f64 * te).round() as usize).max(1);
        if n_val + n_test >= n {
            return Err(Error::Split(format!(
                "class {class} with {n} records leaves no training data"
            )));
        }
        let mut rng = seed::rng(seed::mix(seed, 0x5917, class.code() as u64));
        members.shuffle(&mut rng);
        let n_train = n - n_val - n_test;
        parts[0].extend(members[..n_train].iter().map(|r| (*r).clone()));
        parts[1].extend(members[n_train..n_train + n_val].iter().map(|r| (*r).clone()));
        parts[2].extend(members[n_train + n_val..].iter().map(|r| (*r).clone()));
    }
    let [a, b, c] = parts;
    Ok((ds.with_records(a), ds.with_records(b), ds.with_records(c)))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    sweep: FrequencySweep,
    noise: NoiseModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    label: UrineCondition,
    record_seed: u64,
    eps_prime: f64,
    sigma: f64,
    delta_eps_dipole: f64,
    tau_s: f64,
    density: f64,
    f_r_true_hz: f64,
    s11_re: Vec<f64>,
    s11_im: Vec<f64>,
}

/// Serializes `ds` as JSONL: one header line, then one line per record.
pub fn write_dataset_to<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        sweep: ds.sweep,
        noise: ds.noise,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(|e| Error::io("<stream>", e))?;
    for r in &ds.records {
        let d = &r.dielectrics;
        let line = RecordLine {
            label: r.label,
            record_seed: r.record_seed,
            eps_prime: d.eps_prime,
            sigma: d.sigma,
            delta_eps_dipole: d.delta_eps_dipole,
            tau_s: d.tau,
            density: d.density,
            f_r_true_hz: r.f_r_true,
            s11_re: r.s11.iter().map(|z| z.re).collect(),
            s11_im: r.s11.iter().map(|z| z.im).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io("<stream>", e))?;
    }
    Ok(())
}

pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut buf = Vec::new();
    write_dataset_to(ds, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_dataset_from<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Dataset { line, msg };

    let header: Header = match lines.next() {
        Some((_, text)) => {
            let text = text.map_err(|e| bad(1, e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| bad(1, e.to_string()))?
        }
        None => return Err(bad(1, "empty file, expected header".into())),
    };
    if header.version != FORMAT_VERSION {
        return Err(bad(
            1,
            format!("unsupported version {} (expected {FORMAT_VERSION})", header.version),
        ));
    }
    header.sweep.validate().map_err(|e| bad(1, e.to_string()))?;

    let mut records = Vec::new();
    for (idx, text) in lines {
        let line = idx + 1;
        let text = text.map_err(|e| bad(line, e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let r: RecordLine = serde_json::from_str(&text).map_err(|e| bad(line, e.to_string()))?;
        let n = header.sweep.n_points;
        if r.s11_re.len() != n || r.s11_im.len() != n {
            return Err(bad(
                line,
                format!(
                    "record has {}/{} samples but the sweep has {n}",
                    r.s11_re.len(),
                    r.s11_im.len()
                ),
            ));
        }
        let dielectrics = SampleDielectrics {
            eps_prime: r.eps_prime,
            sigma: r.sigma,
            density: r.density,
            delta_eps_dipole: r.delta_eps_dipole,
            tau: r.tau_s,
            condition: r.label,
        };
        records.push(LabeledSpectrum {
            label: r.label,
            record_seed: r.record_seed,
            dielectrics,
            s11: r
                .s11_re
                .iter()
                .zip(&r.s11_im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
            f_r_true: r.f_r_true_hz,
        });
    }
    Ok(Dataset {
        sweep: header.sweep,
        noise: header.noise,
        records,
    })
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset_to(ds, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(BufReader::new(file))
}

//! `uritwin` command-line frontend.
//!
//! Exit codes: 0 success, 1 usage, 2 malformed input, 3 numeric, training
//! or output failure.

pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use uritwin::dataset::{dataset_to_string, generate_dataset, read_dataset_from, split_dataset};
use uritwin::dielectric::{clinical_info, table1_range, DipoleConfig, SampleDielectrics};
use uritwin::neural::{
    evaluate, examples_from, model_from_json, model_to_json, predict, preprocess_s11, train, Example, History, Model,
};
use uritwin::resonator::{
    calibrate_loaded_with, calibrate_unloaded, reference_points, synth_s11, AntennaGeometry, CalibrationPoint,
    F_UNLOADED,
};
use uritwin::spectra::{extract_features, parse_touchstone};
use uritwin::{CalibrationModel, ComplexSpectrum, Dataset, FeatureVector, GenConfig, NoiseModel, UrineCondition};

use config::CliConfig;
use report::{render_report, ReportBundle};

pub const DISCLAIMER: &str =
    "Informational only. Not a diagnostic result; consult a clinician and a laboratory urinalysis.";

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn format(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn numeric(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }
}

impl From<uritwin::Error> for Failure {
    fn from(e: uritwin::Error) -> Self {
        let code = if e.is_format_error() { 2 } else { 3 };
        Self { code, error: e.into() }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "uritwin",
    version,
    about = "Microwave urine-sensor digital twin and classifier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the loaded-resonance calibration and write it as JSON.
    Calibrate {
        /// JSON array of {"eps_mid", "f_r_hz"} objects; built-in points otherwise.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a labeled synthetic dataset as JSONL.
    Generate {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        n_per_class: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Standard deviation of the per-record frequency offset, Hz.
        #[arg(long)]
        f_jitter: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified train/val/test split of a JSONL dataset.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Extract dip features from a Touchstone file.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Train the classifier.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the shuffle and initialization seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: PathBuf,
        /// Also save the best-validation-accuracy model.
        #[arg(long)]
        best_out: Option<PathBuf>,
    },
    /// Evaluate a model and render the report directory.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report_dir: PathBuf,
        /// History CSV from `train`, plotted in curves.svg.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Classify one Touchstone spectrum.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
    },
    /// Print the built-in reference tables as CSV.
    Tables {
        /// 1: dielectric ranges, 2: clinical indicators.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        table: u8,
    },
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::format)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::numeric)
}

fn load_config(path: Option<&Path>) -> Result<CliConfig, Failure> {
    match path {
        None => Ok(CliConfig::default()),
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("invalid config {}", p.display()))
            .map_err(Failure::format),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    let text = read_text(path)?;
    read_dataset_from(text.as_bytes())
        .with_context(|| format!("in {}", path.display()))
        .map_err(|e| Failure { code: 2, error: e })
}

fn load_calibration(path: &Path) -> Result<CalibrationModel, Failure> {
    Ok(CalibrationModel::from_json(&read_text(path)?)?)
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    Ok(model_from_json(&read_text(path)?)?)
}

fn load_spectrum(path: &Path) -> Result<ComplexSpectrum, Failure> {
    parse_touchstone(&read_text(path)?)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::format)
}

fn json_line(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn cmd_calibrate(points: Option<&Path>, config: Option<&Path>, out: &Path) -> CmdResult {
    let cfg = load_config(config)?;
    let points: Vec<CalibrationPoint> = match points {
        None => reference_points(),
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("malformed points file {}", p.display()))
            .map_err(Failure::format)?,
    };
    let l_eff = calibrate_unloaded(&AntennaGeometry::default(), F_UNLOADED)?;
    let model = calibrate_loaded_with(&points, l_eff, cfg.resonator.q0, cfg.resonator.kappa_loss)?;
    write_text(out, &(model.to_json() + "\n"))?;
    println!(
        "L_eff_mm={:.6} alpha={:.6} beta={:.6}",
        l_eff * 1e3,
        model.alpha,
        model.beta
    );
    for (p, r) in points.iter().zip(&model.residuals_hz) {
        println!(
            "eps={} f_r_MHz={:.4} residual_MHz={:.4}",
            p.eps_mid,
            p.f_r_hz / 1e6,
            r / 1e6
        );
    }
    println!("max_abs_residual_MHz={:.4}", model.max_abs_residual_hz() / 1e6);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    calibration: &Path,
    n_per_class: usize,
    seed: u64,
    noise_sigma: Option<f64>,
    f_jitter: Option<f64>,
    config: Option<&Path>,
    out: &Path,
) -> CmdResult {
    let cfg = load_config(config)?;
    let calibration = load_calibration(calibration)?;
    let noise = NoiseModel {
        sigma_complex: noise_sigma.unwrap_or(cfg.noise.sigma_complex),
        f_jitter: f_jitter.unwrap_or(cfg.noise.f_jitter),
    };
    noise.validate().map_err(Failure::format)?;
    let gen = GenConfig {
        n_per_class,
        master_seed: seed,
        sweep: cfg.generation.sweep,
        noise,
        calibration: Some(calibration),
        coupling: cfg.resonator.coupling(),
        dipole: cfg.generation.dipole,
    };
    let ds = generate_dataset(&gen)?;
    write_text(out, &dataset_to_string(&ds))?;
    eprintln!("wrote {} records to {}", ds.len(), out.display());
    Ok(())
}

fn cmd_split(data: &Path, seed: Option<u64>, config: Option<&Path>, outs: [&Path; 3]) -> CmdResult {
    let cfg = load_config(config)?;
    let ds = load_dataset(data)?;
    let s = cfg.split;
    let parts = split_dataset(&ds, (s.train, s.val, s.test), seed.unwrap_or(s.seed))?;
    for (part, path) in [&parts.0, &parts.1, &parts.2].into_iter().zip(outs) {
        write_text(path, &dataset_to_string(part))?;
    }
    println!("train={} val={} test={}", parts.0.len(), parts.1.len(), parts.2.len());
    Ok(())
}

fn cmd_features(input: &Path, baseline: Option<&Path>) -> CmdResult {
    let spectrum = load_spectrum(input)?;
    let base = baseline.map(load_spectrum).transpose()?;
    let fv = extract_features(&spectrum, base.as_ref())?;
    println!("{}", json_line(&fv));
    Ok(())
}

fn check_input_len(model: &Model, examples: &[Example], what: &str) -> CmdResult {
    let want = model.config.input_len;
    match examples.iter().find(|e| e.input.shape()[1] != want) {
        Some(e) => Err(Failure::format(anyhow!(
            "{what}: spectra have {} points, model expects {want}",
            e.input.shape()[1]
        ))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    epochs: usize,
    best_epoch: usize,
    final_train_loss: f64,
    final_train_acc: f64,
    final_val_acc: f64,
    best_val_acc: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &Path,
    val: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    history_path: &Path,
    best_out: Option<&Path>,
) -> CmdResult {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.train.shuffle_seed = s;
        cfg.model.init_seed = s;
    }
    let train_ds = load_dataset(data)?;
    let val_ds = load_dataset(val)?;
    cfg.model.input_len = train_ds.sweep.n_points;
    cfg.train.validate().map_err(Failure::format)?;
    let model = Model::new(cfg.model.clone()).map_err(Failure::format)?;
    let (tr, va) = (examples_from(&train_ds), examples_from(&val_ds));
    check_input_len(&model, &va, "validation data")?;
    let outcome = train(&model, &tr, &va, &cfg.train)?;
    write_text(out, &model_to_json(&outcome.final_model))?;
    if let Some(p) = best_out {
        write_text(p, &model_to_json(&outcome.best_model))?;
    }
    write_text(history_path, &outcome.history.to_csv())?;
    let last = outcome.history.epochs.last().expect("epochs > 0");
    let best = outcome.history.epochs[outcome.best_epoch];
    println!(
        "{}",
        json_line(&TrainSummary {
            epochs: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            final_train_loss: last.train_loss,
            final_train_acc: last.train_acc,
            final_val_acc: last.val_acc,
            best_val_acc: best.val_acc,
        })
    );
    Ok(())
}

fn cmd_eval(
    data: &Path,
    model_path: &Path,
    report_dir: &Path,
    history: Option<&Path>,
    config: Option<&Path>,
) -> CmdResult {
    let mut cfg = load_config(config)?;
    let model = load_model(model_path)?;
    let ds = load_dataset(data)?;
    let examples = examples_from(&ds);
    check_input_len(&model, &examples, "test data")?;
    let history = history
        .map(|p| History::from_csv(&read_text(p)?).map_err(Failure::from))
        .transpose()?;
    let metrics = evaluate(&model, &examples)?;
    cfg.model = model.config.clone();
    let bundle = ReportBundle {
        metrics: metrics.clone(),
        history,
        config: serde_json::to_value(&cfg).expect("config serializes"),
    };
    render_report(&bundle, report_dir).map_err(Failure::numeric)?;
    println!("{}", json_line(&metrics));
    Ok(())
}

#[derive(Serialize)]
struct Clinical {
    diseases: &'static str,
    indicators: &'static str,
    disclaimer: &'static str,
}

#[derive(Serialize)]
struct Classification {
    condition: UrineCondition,
    confidence: f64,
    probabilities: Vec<(UrineCondition, f64)>,
    features: Option<FeatureVector>,
    clinical: Clinical,
}

/// Noiseless mid-range healthy spectrum on the same grid, as a feature
/// baseline. `None` if the grid is not uniform or synthesis fails.
fn healthy_baseline(spectrum: &ComplexSpectrum, calibration: &CalibrationModel) -> Option<ComplexSpectrum> {
    let sweep = spectrum.uniform_sweep()?;
    let nominal = SampleDielectrics::nominal(UrineCondition::Healthy, &DipoleConfig::default());
    let coupling = config::ResonatorConfig::default().coupling();
    synth_s11(calibration, &coupling, &nominal, &sweep)
        .ok()
        .map(|s| s.spectrum)
}

fn cmd_classify(input: &Path, model_path: &Path, calibration: &Path) -> CmdResult {
    let spectrum = load_spectrum(input)?;
    let model = load_model(model_path)?;
    let calibration = load_calibration(calibration)?;
    let example = Example {
        input: preprocess_s11(spectrum.s11()),
        label: 0,
    };
    check_input_len(&model, std::slice::from_ref(&example), "input spectrum")?;
    let (class, probs) = predict(&model, std::slice::from_ref(&example))?.remove(0);
    let condition = UrineCondition::ALL[class];
    let baseline = healthy_baseline(&spectrum, &calibration);
    let features = extract_features(&spectrum, baseline.as_ref()).ok();
    let info = clinical_info(condition);
    let out = Classification {
        condition,
        confidence: probs[class],
        probabilities: UrineCondition::ALL.into_iter().zip(probs.iter().copied()).collect(),
        features,
        clinical: Clinical {
            diseases: info.diseases,
            indicators: info.indicators,
            disclaimer: DISCLAIMER,
        },
    };
    println!("{}", json_line(&out));
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_tables(table: u8) -> CmdResult {
    if table == 1 {
        println!(
            "condition,eps_min,eps_max,sigma_min_s_per_m,sigma_max_s_per_m,density_min_g_per_cm3,density_max_g_per_cm3"
        );
        for c in UrineCondition::ALL {
            let r = table1_range(c);
            println!(
                "{},{},{},{},{},{},{}",
                c.name(),
                r.eps_min,
                r.eps_max,
                r.sigma_min,
                r.sigma_max,
                r.density_min,
                r.density_max
            );
        }
    } else {
        println!("condition,diseases,indicators");
        for c in UrineCondition::ALL {
            let i = clinical_info(c);
            println!("{},{},{}", c.name(), csv_field(i.diseases), csv_field(i.indicators));
        }
    }
    Ok(())
}

pub fn execute(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Calibrate { points, config, out } => cmd_calibrate(points.as_deref(), config.as_deref(), &out),
        Command::Generate {
            calibration,
            n_per_class,
            seed,
            noise_sigma,
            f_jitter,
            config,
            out,
        } => cmd_generate(
            &calibration,
            n_per_class,
            seed,
            noise_sigma,
            f_jitter,
            config.as_deref(),
            &out,
        ),
        Command::Split {
            data,
            seed,
            config,
            train_out,
            val_out,
            test_out,
        } => cmd_split(&data, seed, config.as_deref(), [&train_out, &val_out, &test_out]),
        Command::Features { input, baseline } => cmd_features(&input, baseline.as_deref()),
        Command::Train {
            data,
            val,
            config,
            seed,
            out,
            history,
            best_out,
        } => cmd_train(
            &data,
            &val,
            config.as_deref(),
            seed,
            &out,
            &history,
            best_out.as_deref(),
        ),
        Command::Eval {
            data,
            model,
            report_dir,
            history,
            config,
        } => cmd_eval(&data, &model, &report_dir, history.as_deref(), config.as_deref()),
        Command::Classify {
            input,
            model,
            calibration,
        } => cmd_classify(&input, &model, &calibration),
        Command::Tables { table } => cmd_tables(table),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

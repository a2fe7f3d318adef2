use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use uritwin::neural::{History, Metrics};
use uritwin::UrineCondition;

/// Everything `render_report` writes.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub metrics: Metrics,
    pub history: Option<History>,
    /// Effective configuration, echoed verbatim.
    pub config: serde_json::Value,
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'a str,
    files: &'a [&'a str],
}

pub const CONFUSION_FILE: &str = "confusion_matrix.csv";
pub const REPORT_FILE: &str = "classification_report.txt";
pub const CURVES_FILE: &str = "curves.svg";
pub const CONFIG_FILE: &str = "config_echo.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn confusion_csv(m: &Metrics) -> String {
    let mut out = String::from("true\\predicted");
    for c in UrineCondition::ALL {
        out.push(',');
        out.push_str(c.title());
    }
    out.push('\n');
    for (c, row) in UrineCondition::ALL.iter().zip(&m.confusion) {
        out.push_str(c.title());
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn classification_report(m: &Metrics) -> String {
    let mut out = format!(
        "{:<14}{:>10}{:>10}{:>10}{:>10}\n\n",
        "", "precision", "recall", "f1-score", "support"
    );
    for (c, s) in UrineCondition::ALL.iter().zip(&m.per_class) {
        let _ = writeln!(
            out,
            "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
            c.title(),
            s.precision,
            s.recall,
            s.f1,
            s.support
        );
    }
    let total = m.total();
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<14}{:>10}{:>10}{:>10.2}{:>10}",
        "accuracy", "", "", m.accuracy, total
    );
    let _ = writeln!(
        out,
        "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
        "macro avg", m.macro_precision, m.macro_recall, m.macro_f1, total
    );
    out
}

const W: f64 = 900.0;
const H: f64 = 380.0;
const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const TOP: f64 = 50.0;
const TRAIN_COLOR: &str = "#1f77b4";
const VAL_COLOR: &str = "#d62728";

struct Panel<'a> {
    left: f64,
    title: &'a str,
    y_max: f64,
    series: [(&'a str, &'a str, Vec<f64>); 2],
}

fn polyline(left: f64, y_max: f64, values: &[f64], color: &str) -> String {
    let n = values.len();
    let dx = if n > 1 { PANEL_W / (n - 1) as f64 } else { 0.0 };
    let mut pts = String::new();
    for (i, v) in values.iter().enumerate() {
        let x = left + i as f64 * dx;
        let y = TOP + PANEL_H * (1.0 - (v / y_max).clamp(0.0, 1.0));
        if !pts.is_empty() {
            pts.push(' ');
        }
        let _ = write!(pts, "{x:.2},{y:.2}");
    }
    format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{pts}\"/>\n")
}

fn panel(svg: &mut String, p: &Panel, epochs: usize) {
    let (l, b) = (p.left, TOP + PANEL_H);
    let _ = write!(
        svg,
        "<rect x=\"{l:.2}\" y=\"{TOP:.2}\" width=\"{PANEL_W:.2}\" height=\"{PANEL_H:.2}\" fill=\"none\" stroke=\"#444\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        l + PANEL_W / 2.0,
        TOP - 15.0,
        p.title
    );
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let y = b - frac * PANEL_H;
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{l:.2}\" y2=\"{y:.2}\" stroke=\"#444\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{:.2}</text>\n",
            l - 5.0,
            l - 8.0,
            y + 4.0,
            frac * p.y_max
        );
    }
    let last = epochs.saturating_sub(1);
    let _ = write!(
        svg,
        "<text x=\"{l:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">0</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">{last}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n",
        b + 16.0,
        l + PANEL_W,
        b + 16.0,
        l + PANEL_W / 2.0,
        b + 34.0
    );
    for (i, (label, color, values)) in p.series.iter().enumerate() {
        if !values.is_empty() {
            svg.push_str(&polyline(l, p.y_max, values, color));
        }
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{label}</text>\n",
            l + PANEL_W - 110.0,
            l + PANEL_W - 90.0,
            l + PANEL_W - 84.0,
            ly + 4.0
        );
    }
}

/// Two-panel loss and accuracy chart. Without a history the axes are drawn
/// and no series are emitted.
pub fn curves_svg(history: Option<&History>) -> String {
    let col = |f: fn(&uritwin::neural::EpochStats) -> f64| -> Vec<f64> {
        history.map(|h| h.epochs.iter().map(f).collect()).unwrap_or_default()
    };
    let (tl, vl, ta, va) = (
        col(|e| e.train_loss),
        col(|e| e.val_loss),
        col(|e| e.train_acc),
        col(|e| e.val_acc),
    );
    let peak = tl
        .iter()
        .chain(&vl)
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let loss_max = if peak > 0.0 {
        (peak * 1.1 * 10.0).ceil() / 10.0
    } else {
        1.0
    };
    let epochs = history.map_or(0, |h| h.len());

    let mut svg = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n"
    );
    panel(
        &mut svg,
        &Panel {
            left: 70.0,
            title: "Loss",
            y_max: loss_max,
            series: [("train loss", TRAIN_COLOR, tl), ("val loss", VAL_COLOR, vl)],
        },
        epochs,
    );
    panel(
        &mut svg,
        &Panel {
            left: 70.0 + PANEL_W + 90.0,
            title: "Accuracy",
            y_max: 1.0,
            series: [("train acc", TRAIN_COLOR, ta), ("val acc", VAL_COLOR, va)],
        },
        epochs,
    );
    svg.push_str("</svg>\n");
    svg
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the bundle into `dir` and returns the emitted file names.
pub fn render_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<&'static str>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let files = [
        CONFUSION_FILE,
        REPORT_FILE,
        CURVES_FILE,
        CONFIG_FILE,
        METRICS_FILE,
        MANIFEST_FILE,
    ];
    write(dir, CONFUSION_FILE, &confusion_csv(&bundle.metrics))?;
    write(dir, REPORT_FILE, &classification_report(&bundle.metrics))?;
    write(dir, CURVES_FILE, &curves_svg(bundle.history.as_ref()))?;
    write(
        dir,
        CONFIG_FILE,
        &(serde_json::to_string_pretty(&bundle.config)? + "\n"),
    )?;
    write(
        dir,
        METRICS_FILE,
        &(serde_json::to_string_pretty(&bundle.metrics)? + "\n"),
    )?;
    let manifest = Manifest {
        generator: uritwin::GENERATOR,
        files: &files,
    };
    write(dir, MANIFEST_FILE, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(files.to_vec())
}

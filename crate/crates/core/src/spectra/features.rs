//! Resonance features of a reflection dip.
//!
//! * `f_dip`, `depth_db`: vertex of the parabola through the deepest
//!   sample and its two neighbours, in dB.
//! * `q_3db`: unloaded Q. For a lumped one-port the absorbed power
//!   `1 - |S11|²` is a Lorentzian, so `1/(1 - |S11|²)` is a parabola in f
//!   with minimum `(1+g)²/4g` and curvature `Qu²/(g·f0²)`. The parabola is
//!   fitted by least squares over the half-absorbed-power band. The dip
//!   phase relative to the sweep edges tells under-coupling (the locus
//!   encircles the origin) from over-coupling, which picks `g` or `1/g`.
//!   Q is reported only when both band edges lie inside the sweep.
//! * `phase_at_ref_deg`: unwrapped phase at the spectrum's own dip, so
//!   that the resonator term cancels between specimens and `delta_phi_deg`
//!   isolates the sample's phase rotation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{unwrap_phase, wrap_degrees};
use crate::constants::mag_to_db;
use crate::error::{Error, Result};
use crate::resonator::ComplexSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Hz
    pub f_dip: f64,
    /// dB, ≤ 0
    pub depth_db: f64,
    pub q_3db: Option<f64>,
    pub phase_at_ref_deg: f64,
    /// Hz, present iff a baseline was supplied
    pub delta_f: Option<f64>,
    pub delta_phi_deg: Option<f64>,
}

struct Dip {
    f_dip: f64,
    depth_db: f64,
    q: Option<f64>,
    phase_deg: f64,
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (a, b) = (x[1] - x[0], x[1] - x[2]);
    let (fa, fb) = (y[1] - y[0], y[1] - y[2]);
    let den = a * fb - b * fa;
    if den == 0.0 {
        return (x[1], y[1]);
    }
    let xv = x[1] - 0.5 * (a * a * fb - b * b * fa) / den;
    // Lagrange form evaluated at the vertex
    let l0 = (xv - x[1]) * (xv - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]));
    let l1 = (xv - x[0]) * (xv - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]));
    let l2 = (xv - x[0]) * (xv - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
    (xv, y[0] * l0 + y[1] * l1 + y[2] * l2)
}

fn interp(xs: &[f64], ys: &[f64], x: f64, i: usize) -> f64 {
    // i is the sample nearest the target; pick the bracketing interval
    let j = if x >= xs[i] { i.min(xs.len() - 2) } else { i.max(1) - 1 };
    let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + t * (ys[j + 1] - ys[j])
}

fn crossing(f: &[f64], db: &[f64], level: f64, from: usize, step_left: bool) -> Option<f64> {
    let mut j = from;
    loop {
        let next = if step_left {
            j.checked_sub(1)?
        } else {
            (j + 1 < f.len()).then_some(j + 1)?
        };
        if db[next] >= level {
            let t = (level - db[j]) / (db[next] - db[j]);
            return Some(f[j] + t * (f[next] - f[j]));
        }
        j = next;
    }
}

/// Least-squares parabola `1/(1 - |S11|²) = A + B·(f - f0)²` over the
/// samples around `i` that absorb at least half the peak power.
fn lorentzian_q(f: &[f64], s: &[Complex64], i: usize, under: bool) -> Option<f64> {
    let absorbed = |k: usize| 1.0 - s[k].norm_sqr();
    let half = 0.5 * absorbed(i);
    let (mut lo, mut hi) = (i - 1, i + 1);
    while lo > 0 && absorbed(lo - 1) >= half {
        lo -= 1;
    }
    while hi + 1 < f.len() && absorbed(hi + 1) >= half {
        hi += 1;
    }
    let scale = f[i + 1] - f[i - 1];
    // normal equations for y = c0 + c1·u + c2·u²
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for k in lo..=hi {
        let p = absorbed(k);
        if p <= 0.0 {
            return None;
        }
        let u = (f[k] - f[i]) / scale;
        let pw = [1.0, u, u * u];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += pw[a] * pw[b];
            }
            r[a] += pw[a] / p;
        }
    }
    let c = solve3(m, r)?;
    if c[2] <= 0.0 {
        return None;
    }
    let u0 = -c[1] / (2.0 * c[2]);
    let f0 = f[i] + u0 * scale;
    // A = (1+g)²/4g ≥ 1; noise can push it just below
    let a = (c[0] - c[1] * c[1] / (4.0 * c[2])).max(1.0);
    let g_under = (2.0 * a - 1.0) - ((2.0 * a - 1.0).powi(2) - 1.0).sqrt();
    let g = if under { g_under } else { 1.0 / g_under };
    let curvature = c[2] / (scale * scale);
    Some((curvature * g).sqrt() * f0).filter(|q| q.is_finite() && *q > 0.0)
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let k = m[row][col] / m[col][col];
            let pivot = m[col];
            for (a, b) in m[row].iter_mut().zip(pivot).skip(col) {
                *a -= k * b;
            }
            r[row] -= k * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|j| m[row][j] * x[j]).sum();
        x[row] = (r[row] - tail) / m[row][row];
    }
    Some(x)
}

fn analyse(spectrum: &ComplexSpectrum) -> Result<Dip> {
    let f = spectrum.frequencies();
    let s = spectrum.s11();
    let n = s.len();
    if n < 5 {
        return Err(Error::Features(format!("need at least 5 points, got {n}")));
    }
    let db: Vec<f64> = s.iter().map(|z| mag_to_db(z.norm())).collect();
    let i = db
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v < db[best] { k } else { best });
    if i == 0 || i == n - 1 {
        return Err(Error::Features(format!(
            "reflection minimum at sweep edge ({} Hz)",
            f[i]
        )));
    }
    let (f_dip, depth) = parabola_vertex([f[i - 1], f[i], f[i + 1]], [db[i - 1], db[i], db[i + 1]]);
    let depth_db = depth.min(0.0);

    let rho = 10f64.powf(depth_db / 20.0);
    let level = 10.0 * ((1.0 + rho * rho) / 2.0).log10();
    let q = match (crossing(f, &db, level, i, true), crossing(f, &db, level, i, false)) {
        (Some(lo), Some(hi)) if hi > lo => {
            let unit = |z: Complex64| if z.norm() > 0.0 { z / z.norm() } else { z };
            let edge = (unit(s[0]) + unit(s[n - 1])).arg();
            let under = wrap_degrees((s[i].arg() - edge).to_degrees()).abs() > 90.0;
            lorentzian_q(f, s, i, under)
        }
        _ => None,
    };

    let phase = unwrap_phase(s);
    let phase_deg = interp(f, &phase, f_dip, i) * 180.0 / PI;
    Ok(Dip {
        f_dip,
        depth_db,
        q,
        phase_deg,
    })
}

/// Extracts dip features, with shifts relative to `baseline` when given.
pub fn extract_features(spectrum: &ComplexSpectrum, baseline: Option<&ComplexSpectrum>) -> Result<FeatureVector> {
    let own = analyse(spectrum)?;
    let base = baseline.map(analyse).transpose()?;
    Ok(FeatureVector {
        f_dip: own.f_dip,
        depth_db: own.depth_db,
        q_3db: own.q,
        phase_at_ref_deg: own.phase_deg,
        delta_f: base.as_ref().map(|b| own.f_dip - b.f_dip),
        delta_phi_deg: base.as_ref().map(|b| wrap_degrees(own.phase_deg - b.phase_deg)),
    })
}

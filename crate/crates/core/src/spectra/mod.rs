//! Spectrum I/O, measurement noise and feature extraction.

mod features;
mod noise;
mod touchstone;

pub use features::{extract_features, FeatureVector};
pub use noise::{add_complex_noise, add_noise, frequency_offset, NoiseModel};
pub use touchstone::{parse_touchstone, write_touchstone, TouchstoneFormat};

use std::f64::consts::PI;

use num_complex::Complex64;

/// Nearest-branch phase unwrap in radians, scanning in sample order.
pub fn unwrap_phase(s11: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(s11.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for z in s11 {
        let p = z.arg();
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    out
}

/// Wraps an angle in degrees to (−180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut w = deg % 360.0;
    if w > 180.0 {
        w -= 360.0;
    } else if w <= -180.0 {
        w += 360.0;
    }
    w
}

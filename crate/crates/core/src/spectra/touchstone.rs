//! One-port Touchstone v1 (`.s1p`).

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::resonator::ComplexSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchstoneFormat {
    /// real / imaginary
    Ri,
    /// magnitude / angle in degrees
    Ma,
    /// 20·log10 magnitude / angle in degrees
    Db,
}

impl TouchstoneFormat {
    pub fn token(self) -> &'static str {
        match self {
            TouchstoneFormat::Ri => "RI",
            TouchstoneFormat::Ma => "MA",
            TouchstoneFormat::Db => "DB",
        }
    }
}

impl FromStr for TouchstoneFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RI" => Ok(TouchstoneFormat::Ri),
            "MA" => Ok(TouchstoneFormat::Ma),
            "DB" => Ok(TouchstoneFormat::Db),
            other => Err(format!("unknown data format {other:?}")),
        }
    }
}

struct OptionLine {
    freq_scale: f64,
    format: TouchstoneFormat,
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine> {
    let err = |msg: String| Error::Touchstone { line, msg };
    let mut freq_scale = None;
    let mut format = None;
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => freq_scale = Some(1.0),
            "KHZ" => freq_scale = Some(1e3),
            "MHZ" => freq_scale = Some(1e6),
            "GHZ" => freq_scale = Some(1e9),
            "S" => {}
            "Y" | "Z" | "H" | "G" => return Err(err(format!("only S parameters are supported, got {tok}"))),
            "RI" | "MA" | "DB" => format = Some(tok.parse().map_err(err)?),
            "R" => {
                let z0 = tokens
                    .next()
                    .ok_or_else(|| err("missing reference impedance after R".into()))?;
                let z0: f64 = z0.parse().map_err(|_| err(format!("bad reference impedance {z0:?}")))?;
                if !(z0 > 0.0) {
                    return Err(err(format!("reference impedance must be positive, got {z0}")));
                }
            }
            _ => return Err(err(format!("unknown option token {tok:?}"))),
        }
    }
    Ok(OptionLine {
        freq_scale: freq_scale.ok_or_else(|| err("option line has no frequency unit".into()))?,
        format: format.ok_or_else(|| err("option line has no data format".into()))?,
    })
}

/// Parses a one-port Touchstone v1 file. Line numbers in errors are 1-based.
pub fn parse_touchstone(text: &str) -> Result<ComplexSpectrum> {
    let mut options: Option<OptionLine> = None;
    let mut freqs = Vec::new();
    let mut values = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('!').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('#') {
            // later option lines are ignored, as in the v1 format
            if options.is_none() {
                options = Some(parse_option_line(rest, line)?);
            }
            continue;
        }
        let opts = options.as_ref().ok_or(Error::Touchstone {
            line,
            msg: "data row before option line".into(),
        })?;
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Touchstone {
                line,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0; 3];
        for (n, f) in nums.iter_mut().zip(&fields) {
            *n = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Touchstone {
                    line,
                    msg: format!("non-numeric field {f:?}"),
                })?;
        }
        let f = nums[0] * opts.freq_scale;
        if let Some(&last) = freqs.last() {
            if !(f > last) {
                return Err(Error::Touchstone {
                    line,
                    msg: format!("frequency {f} Hz does not increase"),
                });
            }
        }
        let z = match opts.format {
            TouchstoneFormat::Ri => Complex64::new(nums[1], nums[2]),
            TouchstoneFormat::Ma => Complex64::from_polar(nums[1], nums[2].to_radians()),
            TouchstoneFormat::Db => Complex64::from_polar(10f64.powf(nums[1] / 20.0), nums[2].to_radians()),
        };
        freqs.push(f);
        values.push(z);
    }

    if options.is_none() {
        return Err(Error::Touchstone {
            line: text.lines().count().max(1),
            msg: "missing option line".into(),
        });
    }
    ComplexSpectrum::new(freqs, values).map_err(|e| Error::Touchstone {
        line: 0,
        msg: e.to_string(),
    })
}

/// Writes a one-port Touchstone v1 file with frequencies in Hz and a 50 Ω
/// reference.
pub fn write_touchstone(spectrum: &ComplexSpectrum, format: TouchstoneFormat, seed: Option<u64>) -> String {
    let mut out = String::new();
    match seed {
        Some(s) => writeln!(out, "! {} seed={s}", crate::GENERATOR),
        None => writeln!(out, "! {}", crate::GENERATOR),
    }
    .unwrap();
    writeln!(out, "# Hz S {} R 50", format.token()).unwrap();
    for (f, z) in spectrum.frequencies().iter().zip(spectrum.s11()) {
        let (a, b) = match format {
            TouchstoneFormat::Ri => (z.re, z.im),
            TouchstoneFormat::Ma => (z.norm(), z.arg().to_degrees()),
            // floored so that S11 = 0 stays a finite number
            TouchstoneFormat::Db => (20.0 * z.norm().max(f64::MIN_POSITIVE).log10(), z.arg().to_degrees()),
        };
        // Display on f64 is the shortest round-trip decimal
        writeln!(out, "{f} {a} {b}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ri_row() {
        let s = parse_touchstone("# GHz S RI R 50\n0.7 -0.9 0.1").unwrap();
        assert_eq!(s.frequencies(), &[7e8]);
        assert_eq!(s.s11()[0], Complex64::new(-0.9, 0.1));
    }

    #[test]
    fn db_row() {
        let s = parse_touchstone("# MHz S DB R 50\n700 -20 45").unwrap();
        let z = s.s11()[0];
        assert!((z.norm() - 0.1).abs() < 1e-15);
        assert!((z.arg().to_degrees() - 45.0).abs() < 1e-12);
        assert_eq!(s.frequencies(), &[7e8]);
    }

    #[test]
    fn ma_row_and_comments() {
        let text = "! header\n!another\n# khz s ma r 50 ! trailing\n\n1 0.5 -90 ! c\n2 0.25 180\n";
        let s = parse_touchstone(text).unwrap();
        assert_eq!(s.frequencies(), &[1e3, 2e3]);
        assert!((s.s11()[0] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((s.s11()[1] - Complex64::new(-0.25, 0.0)).norm() < 1e-15);
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Touchstone { line, .. } => line,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_name_lines() {
        assert!(parse_touchstone("! only comment\n1 2 3\n").is_err());
        assert!(matches!(parse_touchstone("! nothing\n"), Err(Error::Touchstone { .. })));
        assert_eq!(line_of(parse_touchstone("# GHz S XY R 50\n").unwrap_err()), 1);
        assert_eq!(
            line_of(parse_touchstone("# GHz S RI R 50\n1 0 0\n1 0 0\n").unwrap_err()),
            3
        );
        assert_eq!(
            line_of(parse_touchstone("# GHz S RI R 50\n1 0 0\n2 x 0\n").unwrap_err()),
            3
        );
        assert_eq!(line_of(parse_touchstone("!c\n# GHz S RI R 50\n1 0\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_touchstone("1 0 0\n# GHz S RI R 50\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_touchstone("# GHz Z RI R 50\n").unwrap_err()), 1);
    }

    #[test]
    fn writes_header_and_zero_rows() {
        let s = ComplexSpectrum::new(vec![1e9, 2e9], vec![Complex64::new(0.0, 0.0); 2]).unwrap();
        let text = write_touchstone(&s, TouchstoneFormat::Ri, Some(9));
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('!') && lines[0].ends_with("seed=9"));
        assert_eq!(lines[1], "# Hz S RI R 50");
        assert_eq!(lines[2], "1000000000 0 0");
        assert_eq!(lines.len(), 4);
    }
}

//! Tilt-series text files: one `phi theta psi` line per projection,
//! whitespace separated, in degrees; `#` starts a comment.
//!
//! Angles are written with Rust's shortest-round-trip float formatting,
//! so a write/read cycle reproduces the values exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{EulerTriple, TiltSeries};

/// Parses tilt-series text.
pub fn parse_tilt_series(text: &str) -> Result<TiltSeries> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::invalid(format!(
                "tilt line {}: expected 3 angles, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| {
                Error::invalid(format!("tilt line {}: bad angle '{f}'", lineno + 1))
            })?;
        }
        out.push(EulerTriple::new(vals[0], vals[1], vals[2])?);
    }
    if out.is_empty() {
        return Err(Error::invalid("tilt series is empty"));
    }
    Ok(out)
}

/// Formats a tilt series as text.
pub fn format_tilt_series(angles: &TiltSeries) -> String {
    let mut out = String::new();
    for e in angles {
        out.push_str(&format!("{} {} {}\n", e.phi, e.theta, e.psi));
    }
    out
}

pub fn read_tilt_series(path: impl AsRef<Path>) -> Result<TiltSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tilt_series(&text)
}

pub fn write_tilt_series(path: impl AsRef<Path>, angles: &TiltSeries) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tlt.tmp");
    fs::write(&tmp, format_tilt_series(angles)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

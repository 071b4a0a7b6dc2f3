//! Plain-text output helpers shared by every exporter.

use std::io::Write;

use crate::error::Result;
use crate::geometry::PlanarPoint;

/// Formats a float with 17 significant digits; infinities print as `inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// Accumulates CSV text with `\n` line endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn with_header(cols: &[&str]) -> Self {
        let mut c = Csv::default();
        c.buf.push_str(&cols.join(","));
        c.buf.push('\n');
        c
    }

    pub fn row(&mut self, vals: &[f64]) {
        let cells: Vec<String> = vals.iter().map(|&v| fmt_f64(v)).collect();
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    /// Row of preformatted cells.
    pub fn raw_row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

pub fn write_points_csv<W: Write>(points: &[PlanarPoint], mut w: W) -> Result<()> {
    let mut c = Csv::with_header(&["x1", "x2"]);
    for p in points {
        c.row(&[p.x1, p.x2]);
    }
    w.write_all(c.as_str().as_bytes())?;
    Ok(())
}

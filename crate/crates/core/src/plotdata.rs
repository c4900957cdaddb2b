//! Two-column plot data: one `#` header line, then `log10(n) log10(error)`
//! rows separated by a single space.

use crate::error::{Error, Result};

pub fn render(header: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("# {header}\n");
    for (x, y) in points {
        out.push_str(&format!("{x} {y}\n"));
    }
    out
}

/// Parses plot data. Lines starting with `#` and blank lines are skipped;
/// every other line must hold exactly two finite numbers.
pub fn parse(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected 2 columns, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("line {}: bad number {s:?}", lineno + 1)))
        };
        points.push((num(fields[0])?, num(fields[1])?));
    }
    Ok(points)
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Least-squares line through `(log10 n, log10 error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Intercept of the base-10 log-log line.
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `log(error)` on `log(n)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(invalid(format!(
            "a slope needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, e)) = points
        .iter()
        .find(|&&(n, e)| !(n > 0.0 && n.is_finite() && e > 0.0 && e.is_finite()))
    {
        return Err(invalid(format!(
            "log-log fit needs positive finite coordinates, got ({n}, {e})"
        )));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, e)| (n.log10(), e.log10()))
        .collect();
    fit_line(&logs)
}

/// Ordinary least squares line through `(x, y)` points.
pub fn fit_line(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(invalid(format!(
            "a line needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|(x, y)| !(x.is_finite() && y.is_finite()))
    {
        return Err(invalid("non-finite coordinate in line fit"));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}

/// `(-3/2 + p, -1/2 + p)`: predicted log-log slopes of location and weight errors.
pub fn expected_slopes(p: f64) -> (f64, f64) {
    (-1.5 + p, -0.5 + p)
}

/// Median of a non-empty sample; sorts a copy, so the input order is irrelevant.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Mean after sorting, so the floating-point sum is order independent.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (4..12)
            .map(|k| {
                let n = 2f64.powi(k);
                (n, n.powf(-1.5))
            })
            .collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_line() {
        let fit = fit_slope(&[(16.0, 1.0), (64.0, 0.25)]).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_slope(&[(16.0, 1.0)]).is_err());
        assert!(fit_slope(&[(16.0, 1.0), (32.0, 0.0)]).is_err());
        assert!(fit_slope(&[(16.0, 1.0), (16.0, 2.0)]).is_err());
    }

    #[test]
    fn expected_slope_table() {
        assert_eq!(expected_slopes(0.0), (-1.5, -0.5));
        assert_eq!(expected_slopes(0.25), (-1.25, -0.25));
        assert_eq!(expected_slopes(0.75), (-0.75, 0.25));
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), Some(3.0));
    }
}

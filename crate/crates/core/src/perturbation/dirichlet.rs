//! The Dirichlet kernel `D_n(t) = sum_{j=-n}^{n} exp(i j t) = sin((n + 1/2) t) / sin(t / 2)`
//! and its first two derivatives.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Below this `|sin(t/2)|` the kernel quotient is replaced by direct summation.
pub const KERNEL_SWITCH: f64 = 1e-6;

/// Reduces `t` to `(-pi, pi]`; every quantity here is `2pi`-periodic in `t`.
fn reduce(t: f64) -> f64 {
    let r = t - TAU * (t / TAU).round();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

fn direct(n: u64, t: f64, order: u32) -> f64 {
    // sum (ij)^order e^{ijt} is real: pair +j with -j
    let mut acc = if order == 0 { 1.0 } else { 0.0 };
    for j in 1..=n {
        let jf = j as f64;
        acc += match order {
            0 => 2.0 * (jf * t).cos(),
            1 => -2.0 * jf * (jf * t).sin(),
            _ => -2.0 * jf * jf * (jf * t).cos(),
        };
    }
    acc
}

/// `sum_{j=-n}^{n} exp(i j t)`, equal to `2n + 1` at `t = 0 (mod 2pi)`.
pub fn dirichlet_sum(n: u64, t: f64) -> f64 {
    let t = reduce(t);
    let half = (0.5 * t).sin();
    if half.abs() < KERNEL_SWITCH {
        return direct(n, t, 0);
    }
    ((n as f64 + 0.5) * t).sin() / half
}

/// `sum_{j=-n}^{n} (i j)^order exp(i j t)` for `order` 1 or 2, i.e. the
/// `order`-th derivative of [`dirichlet_sum`] in `t`. The value is real; it
/// is returned as a complex number with zero imaginary part.
///
/// The closed forms lose accuracy through cancellation once `(n + 1/2) |t|`
/// drops below one, so that region (which contains `t = 0`) is summed directly.
pub fn dirichlet_derivative(n: u64, t: f64, order: u32) -> Result<Complex64> {
    if !(1..=2).contains(&order) {
        return Err(invalid(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let t = reduce(t);
    let m = n as f64 + 0.5;
    let s = (0.5 * t).sin();
    if s.abs() < KERNEL_SWITCH || m * t.abs() < 1.0 {
        return Ok(Complex64::new(direct(n, t, order), 0.0));
    }
    let c = (0.5 * t).cos();
    let (sin_mt, cos_mt) = (m * t).sin_cos();
    let value = if order == 1 {
        m * cos_mt / s - 0.5 * sin_mt * c / (s * s)
    } else {
        -m * m * sin_mt / s - m * cos_mt * c / (s * s)
            + 0.25 * sin_mt / s
            + 0.5 * sin_mt * c * c / (s * s * s)
    };
    Ok(Complex64::new(value, 0.0))
}

/// `sum_{j=-n}^{n} |j|^order`, the peak magnitude of the `order`-th kernel.
pub fn kernel_peak(n: u64, order: u32) -> f64 {
    let nf = n as f64;
    match order {
        0 => 2.0 * nf + 1.0,
        1 => nf * (nf + 1.0),
        _ => nf * (nf + 1.0) * (2.0 * nf + 1.0) / 3.0,
    }
}

//! Reference implementations used as test oracles. They share no code with
//! the library: plain loops over `Vec`s, no nalgebra.
#![allow(dead_code)]

use num_complex::Complex64;

pub type Dense = Vec<Vec<Complex64>>;

pub fn cis(t: f64) -> Complex64 {
    Complex64::new(t.cos(), t.sin())
}

/// `sum_k w_k e^{ijx_k}` term by term.
pub fn fourier_direct(locations: &[f64], weights: &[Complex64], j: i64) -> Complex64 {
    locations
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * cis(j as f64 * x))
        .sum()
}

/// `sum_{j=-n}^{n} (ij)^order e^{ijt}` term by term, in complex arithmetic.
pub fn dirichlet_direct(n: u64, t: f64, order: u32) -> Complex64 {
    let n = n as i64;
    (-n..=n)
        .map(|j| Complex64::new(0.0, j as f64).powu(order) * cis(j as f64 * t))
        .sum()
}

/// Row-major `(2n+1) x 2r` matrix `[A W, B W]` with rows `j = -n..=n`.
pub fn design_direct(locations: &[f64], weights: &[Complex64], n: usize) -> Dense {
    let n = n as i64;
    (-n..=n)
        .map(|j| {
            let jf = j as f64;
            let a = locations
                .iter()
                .zip(weights)
                .map(|(&x, &w)| Complex64::new(0.0, jf) * cis(jf * x) * w);
            let b = locations
                .iter()
                .zip(weights)
                .map(|(&x, &w)| cis(jf * x) * w);
            a.chain(b).collect()
        })
        .collect()
}

/// `X^* Y` for row-major matrices with equal row counts.
pub fn adjoint_product(x: &Dense, y: &Dense) -> Dense {
    let (p, q) = (x[0].len(), y[0].len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); q]; p];
    for (xr, yr) in x.iter().zip(y) {
        for i in 0..p {
            let c = xr[i].conj();
            for k in 0..q {
                out[i][k] += c * yr[k];
            }
        }
    }
    out
}

/// Least squares by modified Gram-Schmidt QR with one reorthogonalisation
/// pass, then back substitution. Assumes full column rank.
pub fn mgs_lstsq(m: &Dense, rhs: &[Complex64]) -> Vec<Complex64> {
    let rows = m.len();
    let cols = m[0].len();
    let mut q: Vec<Vec<Complex64>> = (0..cols)
        .map(|c| (0..rows).map(|r| m[r][c]).collect())
        .collect();
    let mut r = vec![vec![Complex64::new(0.0, 0.0); cols]; cols];
    for k in 0..cols {
        for _pass in 0..2 {
            for i in 0..k {
                let proj: Complex64 = q[i].iter().zip(&q[k]).map(|(a, b)| a.conj() * b).sum();
                r[i][k] += proj;
                let qi = q[i].clone();
                for (v, u) in q[k].iter_mut().zip(&qi) {
                    *v -= proj * u;
                }
            }
        }
        let norm = q[k].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        r[k][k] = Complex64::new(norm, 0.0);
        for v in q[k].iter_mut() {
            *v /= norm;
        }
    }
    let qtb: Vec<Complex64> = q
        .iter()
        .map(|col| col.iter().zip(rhs).map(|(a, b)| a.conj() * b).sum())
        .collect();
    let mut x = vec![Complex64::new(0.0, 0.0); cols];
    for i in (0..cols).rev() {
        let mut s = qtb[i];
        for k in i + 1..cols {
            s -= r[i][k] * x[k];
        }
        x[i] = s / r[i][i];
    }
    x
}

pub fn circular(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Minimum summed circular distance over every permutation.
pub fn brute_force_matching(truth: &[f64], est: &[f64]) -> f64 {
    fn go(truth: &[f64], est: &[f64], used: &mut Vec<bool>, row: usize) -> f64 {
        if row == truth.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..est.len() {
            if !used[c] {
                used[c] = true;
                best = best.min(circular(truth[row], est[c]) + go(truth, est, used, row + 1));
                used[c] = false;
            }
        }
        best
    }
    go(truth, est, &mut vec![false; est.len()], 0)
}

pub fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Sample standard deviation of complex values, `sqrt(mean |v - mean|^2)`.
pub fn complex_sd(values: &[Complex64]) -> f64 {
    let m = values.len() as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / m;
    (values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (m - 1.0)).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        0.5 * (s[k - 1] + s[k])
    }
}

//! First-order error model of the least-squares spike fit.
//!
//! Writing an estimate as `x_k + a_k` and `w_k (1 + b_k)` and dropping terms of
//! second order in `(a, b)`, the fit residual becomes
//! `sum_k e^{ijx_k} w_k (i j a_k + b_k) - z_j`. With
//! `A[j, k] = i j e^{ijx_k}`, `B[j, k] = e^{ijx_k}` and `W = diag(w)`, the
//! perturbations solve the linear least-squares problem
//! `min || [A B] diag(W, W) [a; b] - z ||`, whose normal equations are
//!
//! ```text
//! [A*A  A*B] [W   ] [a]   [A*z]
//! [B*A  B*B] [   W] [b] = [B*z]
//! ```
//!
//! Rows of the design matrices are ordered `j = -n..=n`.

pub mod dirichlet;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::measure::SpikeMeasure;

pub use dirichlet::{dirichlet_derivative, dirichlet_sum, kernel_peak};

/// Default bound on the Gram matrix condition estimate.
pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e12;

/// Jacobians of the residual with respect to location and relative weight
/// perturbations, plus the weights that scale them.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    n: usize,
    a: CMatrix,
    b: CMatrix,
    weights: Vec<Complex64>,
}

impl DesignMatrices {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// `(2n+1) x r`, entry `(j + n, k) = i j e^{ijx_k}`.
    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    /// `(2n+1) x r`, entry `(j + n, k) = e^{ijx_k}`.
    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// Diagonal of `W`.
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// `M = [A B] diag(W, W)`.
    pub fn m(&self) -> CMatrix {
        let r = self.rank();
        let rows = self.a.nrows();
        CMatrix::from_fn(rows, 2 * r, |i, k| {
            if k < r {
                self.a[(i, k)] * self.weights[k]
            } else {
                self.b[(i, k - r)] * self.weights[k - r]
            }
        })
    }
}

pub fn build_design(measure: &SpikeMeasure, n: usize) -> Result<DesignMatrices> {
    if n < 1 {
        return Err(invalid("n must be at least 1"));
    }
    let r = measure.rank();
    let rows = 2 * n + 1;
    let mut a = CMatrix::zeros(rows, r);
    let mut b = CMatrix::zeros(rows, r);
    for (k, &x) in measure.locations().iter().enumerate() {
        for row in 0..rows {
            let j = row as f64 - n as f64;
            let (s, c) = (j * x).sin_cos();
            let e = Complex64::new(c, s);
            b[(row, k)] = e;
            a[(row, k)] = Complex64::new(0.0, j) * e;
        }
    }
    Ok(DesignMatrices {
        n,
        a,
        b,
        weights: measure.weights().to_vec(),
    })
}

/// The four blocks of `[A B]^* [A B]`.
#[derive(Debug, Clone)]
pub struct GramBlocks {
    pub aa: CMatrix,
    pub ab: CMatrix,
    pub ba: CMatrix,
    pub bb: CMatrix,
}

impl GramBlocks {
    pub fn rank(&self) -> usize {
        self.aa.nrows()
    }

    /// The assembled `2r x 2r` Hermitian matrix.
    pub fn full(&self) -> CMatrix {
        let r = self.rank();
        let mut g = CMatrix::zeros(2 * r, 2 * r);
        g.view_mut((0, 0), (r, r)).copy_from(&self.aa);
        g.view_mut((0, r), (r, r)).copy_from(&self.ab);
        g.view_mut((r, 0), (r, r)).copy_from(&self.ba);
        g.view_mut((r, r), (r, r)).copy_from(&self.bb);
        g
    }
}

pub fn gram_blocks(d: &DesignMatrices) -> GramBlocks {
    GramBlocks {
        aa: d.a.ad_mul(&d.a),
        ab: d.a.ad_mul(&d.b),
        ba: d.b.ad_mul(&d.a),
        bb: d.b.ad_mul(&d.b),
    }
}

/// Solution of the first-order system.
#[derive(Debug, Clone)]
pub struct PerturbationSolution {
    /// Location perturbations. Only the real parts are angle shifts; the
    /// imaginary parts vanish to leading order.
    pub a: Vec<Complex64>,
    /// Relative weight perturbations.
    pub b: Vec<Complex64>,
    /// `u = W a`.
    pub u: Vec<Complex64>,
    /// `v = W b`.
    pub v: Vec<Complex64>,
    /// `|| G [u; v] - [A*z; B*z] ||` for the Gram matrix `G`.
    pub residual_norm: f64,
    /// Norm of the normal-equation right-hand side `[A*z; B*z]`.
    pub rhs_norm: f64,
    /// Condition estimate of the Gram matrix.
    pub gram_condition: f64,
    /// Relative difference between the orthogonal-factorization solution
    /// and the Cholesky solve of the normal equations.
    pub normal_route_discrepancy: f64,
}

impl PerturbationSolution {
    /// `Re a_k`, the angle shifts.
    pub fn location_shifts(&self) -> Vec<f64> {
        self.a.iter().map(|a| a.re).collect()
    }

    /// Largest `|Im a_k|`; a linearization diagnostic.
    pub fn max_imaginary_shift(&self) -> f64 {
        self.a.iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }

    /// Applies the perturbation to `measure`: `x + Re a`, `w (1 + b)`.
    pub fn apply_to(&self, measure: &SpikeMeasure, step: f64) -> Result<SpikeMeasure> {
        let locations = measure
            .locations()
            .iter()
            .zip(&self.a)
            .map(|(x, a)| x + step * a.re)
            .collect();
        let weights = measure
            .weights()
            .iter()
            .zip(&self.b)
            .map(|(w, b)| w * (1.0 + b * step))
            .collect();
        SpikeMeasure::new(locations, weights)
    }
}

/// Solves `min || M [a; b] - z ||` by column-equilibrated SVD of `M` and
/// cross-checks against a Cholesky solve of the normal equations.
pub fn solve_first_order(d: &DesignMatrices, z: &[Complex64]) -> Result<PerturbationSolution> {
    solve_first_order_with(d, z, DEFAULT_CONDITION_THRESHOLD)
}

pub fn solve_first_order_with(
    d: &DesignMatrices,
    z: &[Complex64],
    condition_threshold: f64,
) -> Result<PerturbationSolution> {
    let rows = 2 * d.n + 1;
    if z.len() != rows {
        return Err(invalid(format!(
            "right-hand side has {} entries, expected 2n+1 = {rows}",
            z.len()
        )));
    }
    let r = d.rank();
    let gram = gram_blocks(d).full();
    let gram_condition = linalg::hermitian_condition(&gram);
    if !(gram_condition <= condition_threshold) {
        return Err(Error::IllConditioned {
            what: "Gram matrix",
            condition: gram_condition,
            threshold: condition_threshold,
        });
    }

    let zv = CVector::from_column_slice(z);
    let theta = linalg::lstsq(&d.m(), &zv, f64::INFINITY, "first-order system")?.solution;
    let a: Vec<Complex64> = theta.rows(0, r).iter().copied().collect();
    let b: Vec<Complex64> = theta.rows(r, r).iter().copied().collect();
    let u: Vec<Complex64> = a.iter().zip(&d.weights).map(|(a, w)| a * w).collect();
    let v: Vec<Complex64> = b.iter().zip(&d.weights).map(|(b, w)| b * w).collect();

    let mut rhs = CVector::zeros(2 * r);
    rhs.rows_mut(0, r).copy_from(&d.a.ad_mul(&zv));
    rhs.rows_mut(r, r).copy_from(&d.b.ad_mul(&zv));
    let uv = CVector::from_iterator(2 * r, u.iter().chain(&v).copied());
    let residual_norm = (&gram * &uv - &rhs).norm();

    let normal = linalg::hermitian_solve(&gram, &rhs)?;
    let scale = uv.norm();
    let normal_route_discrepancy = if scale > 0.0 {
        (&normal - &uv).norm() / scale
    } else {
        normal.norm()
    };

    Ok(PerturbationSolution {
        a,
        b,
        u,
        v,
        residual_norm,
        rhs_norm: rhs.norm(),
        gram_condition,
        normal_route_discrepancy,
    })
}

/// Max-norm distance between `D^{-1} G D^{-1}` and `diag(2/3 I, 2 I)`, with
/// `D = diag(n^{3/2} I, n^{1/2} I)`.
pub fn scaled_gram_deviation(g: &GramBlocks, n: usize) -> f64 {
    let r = g.rank();
    let nf = n as f64;
    let full = g.full();
    let scale = |i: usize| if i < r { nf.powf(-1.5) } else { nf.powf(-0.5) };
    let limit = |i: usize| if i < r { 2.0 / 3.0 } else { 2.0 };
    let mut worst: f64 = 0.0;
    for i in 0..2 * r {
        for k in 0..2 * r {
            let target = if i == k { limit(i) } else { 0.0 };
            let entry = full[(i, k)] * (scale(i) * scale(k));
            worst = worst.max((entry - target).norm());
        }
    }
    worst
}

/// Exact standard deviations `(sd(A*z)_k, sd(B*z)_k)` under
/// `z_j ~ sigma |j|^p N_C(0, 1)`: `sigma sqrt(sum j^2 |j|^{2p})` and
/// `sigma sqrt(sum |j|^{2p})`.
pub fn rhs_noise_scales(n: usize, sigma: f64, p: f64) -> (f64, f64) {
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for j in -(n as i64)..=(n as i64) {
        let jf = j.unsigned_abs() as f64;
        let var = jf.powf(2.0 * p);
        sum_a += jf * jf * var;
        sum_b += var;
    }
    (sigma * sum_a.sqrt(), sigma * sum_b.sqrt())
}

/// Leading-order standard deviations of the location and relative weight
/// errors: `sqrt(3/2) sigma n^{-3/2+p} / w_min` and `sqrt(1/2) sigma n^{-1/2+p} / w_min`.
pub fn predicted_error_scales(n: usize, sigma: f64, p: f64, min_weight: f64) -> Result<(f64, f64)> {
    if !(min_weight > 0.0) {
        return Err(invalid(format!(
            "min_weight must be positive, got {min_weight}"
        )));
    }
    if n < 1 {
        return Err(invalid("n must be at least 1"));
    }
    let nf = n as f64;
    let loc = 1.5f64.sqrt() * sigma * nf.powf(-1.5 + p) / min_weight;
    let wt = 0.5f64.sqrt() * sigma * nf.powf(-0.5 + p) / min_weight;
    Ok((loc, wt))
}

/// Row-major `[re, im]` dump used by the JSON debugging output.
pub(crate) fn matrix_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    m.row_iter()
        .map(|row| row.iter().map(|v| [v.re, v.im]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn design_rows_and_quarter_turn_entries() {
        let m = SpikeMeasure::from_real(vec![FRAC_PI_2, 2.0], &[1.0, 0.5]).unwrap();
        let d = build_design(&m, 3).unwrap();
        for k in 0..2 {
            assert_eq!(d.a()[(3, k)], Complex64::new(0.0, 0.0));
            assert_eq!(d.b()[(3, k)], Complex64::new(1.0, 0.0));
        }
        // j = 1 sits in row n + 1
        assert!((d.b()[(4, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((d.a()[(4, 0)] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(build_design(&m, 0).is_err());
    }

    #[test]
    fn small_gram_diagonals() {
        let m = SpikeMeasure::from_real(vec![0.7], &[2.0]).unwrap();
        let g = gram_blocks(&build_design(&m, 2).unwrap());
        assert!((g.aa[(0, 0)].re - 10.0).abs() < 1e-13);
        assert!((g.bb[(0, 0)].re - 5.0).abs() < 1e-13);
        assert!(g.ab[(0, 0)].norm() < 1e-13);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let m = SpikeMeasure::from_real(vec![0.5, 2.5, 4.5], &[1.0, 0.8, 1.2]).unwrap();
        let d = build_design(&m, 32).unwrap();
        let sol = solve_first_order(&d, &vec![Complex64::new(0.0, 0.0); 65]).unwrap();
        assert!(sol.a.iter().chain(&sol.b).all(|v| v.norm() == 0.0));
        assert!(solve_first_order(&d, &[Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn ill_conditioned_gram_is_rejected() {
        let m = SpikeMeasure::from_real(vec![1.0, 1.0 + 1e-7], &[1.0, 1.0]).unwrap();
        let d = build_design(&m, 8).unwrap();
        let z = vec![Complex64::new(0.1, 0.0); 17];
        assert!(matches!(
            solve_first_order(&d, &z),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn prediction_constants() {
        let (a, b) = predicted_error_scales(100, 0.1, 0.0, 1.0).unwrap();
        assert!((a - 1.5f64.sqrt() * 1e-4).abs() < 1e-18);
        assert!((b - 0.5f64.sqrt() * 1e-2).abs() < 1e-16);
        let (a2, _) = predicted_error_scales(200, 0.1, 0.0, 1.0).unwrap();
        assert!((a / a2 - 2f64.powf(1.5)).abs() < 1e-12);
        assert!(predicted_error_scales(100, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn noise_scales_closed_form_at_p0() {
        assert_eq!(rhs_noise_scales(50, 0.0, 0.3), (0.0, 0.0));
        for n in [1usize, 7, 128] {
            let nf = n as f64;
            let (sa, sb) = rhs_noise_scales(n, 0.2, 0.0);
            let ea = 0.2 * (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 3.0).sqrt();
            let eb = 0.2 * (2.0 * nf + 1.0).sqrt();
            assert!((sa - ea).abs() < 1e-12 * ea);
            assert!((sb - eb).abs() < 1e-12 * eb);
        }
    }

    #[test]
    fn single_spike_scaled_gram_deviation() {
        let m = SpikeMeasure::from_real(vec![1.3], &[1.0]).unwrap();
        let n = 1000usize;
        let dev = scaled_gram_deviation(&gram_blocks(&build_design(&m, n).unwrap()), n);
        let nf = n as f64;
        let exact = ((nf * (nf + 1.0) * (2.0 * nf + 1.0) / (3.0 * nf.powi(3)) - 2.0 / 3.0).abs())
            .max(((2.0 * nf + 1.0) / nf - 2.0).abs());
        assert!((dev - exact).abs() < 1e-12);
        assert!(dev <= 2.1e-3);
    }
}

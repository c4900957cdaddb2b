//! Dense complex linear algebra used by the estimators and the first-order
//! solver: column-equilibrated SVD least squares, Hermitian solves, small
//! eigenvalue problems, and a truncated SVD for Hankel data matrices.

use std::sync::Arc;

use faer::Mat;
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Solution of a dense least-squares problem together with the 2-norm
/// condition number of the column-equilibrated system matrix.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: CVector,
    pub condition: f64,
}

/// Thin SVD `m = U diag(s) V^*` with `s` non-increasing.
///
/// Computed with faer: nalgebra's complex SVD returns wrong factors for some
/// rank-deficient inputs such as noiseless Hankel matrices.
pub struct DenseSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

pub fn dense_svd(m: &CMatrix) -> Result<DenseSvd> {
    let fm = Mat::<Complex64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok(DenseSvd {
        u: CMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        singular_values: (0..s.nrows()).map(|i| s[i].re).collect(),
        v: CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}

/// Minimises `||m x - rhs||` by SVD after scaling each column of `m` to unit
/// norm. Fails when the equilibrated condition number exceeds `threshold`.
pub fn lstsq(
    m: &CMatrix,
    rhs: &CVector,
    threshold: f64,
    what: &'static str,
) -> Result<LeastSquares> {
    if m.nrows() != rhs.len() {
        return Err(Error::Numerical(format!(
            "{what}: {} rows but right-hand side of length {}",
            m.nrows(),
            rhs.len()
        )));
    }
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::IllConditioned {
            what,
            condition: f64::INFINITY,
            threshold,
        });
    }
    let mut scaled = m.clone();
    for (mut col, &s) in scaled.column_iter_mut().zip(&norms) {
        col.unscale_mut(s);
    }
    let svd = dense_svd(&scaled)?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= threshold) {
        return Err(Error::IllConditioned {
            what,
            condition,
            threshold,
        });
    }
    if scaled.nrows() < scaled.ncols() || smin == 0.0 {
        return Err(Error::RankDeficient(format!(
            "{what}: {} x {} system is rank deficient",
            scaled.nrows(),
            scaled.ncols()
        )));
    }
    let mut coeffs = svd.u.ad_mul(rhs);
    for (c, &sv) in coeffs.iter_mut().zip(&svd.singular_values) {
        *c /= sv;
    }
    let mut solution = &svd.v * coeffs;
    for (x, &s) in solution.iter_mut().zip(&norms) {
        *x /= s;
    }
    Ok(LeastSquares {
        solution,
        condition,
    })
}

/// 2-norm condition number of a Hermitian positive semidefinite matrix.
pub fn hermitian_condition(h: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(h.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the Hermitian positive definite system `h x = rhs` after symmetric
/// diagonal scaling `D^{-1/2} h D^{-1/2}`.
pub fn hermitian_solve(h: &CMatrix, rhs: &CVector) -> Result<CVector> {
    let d: Vec<f64> = (0..h.nrows()).map(|i| h[(i, i)].re.sqrt()).collect();
    if d.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Numerical(
            "Hermitian system has a zero diagonal".into(),
        ));
    }
    let scaled = CMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] / (d[i] * d[j]));
    let b = CVector::from_iterator(rhs.len(), rhs.iter().zip(&d).map(|(v, s)| v / *s));
    let chol = scaled
        .cholesky()
        .ok_or_else(|| Error::Numerical("Hermitian system is not positive definite".into()))?;
    let mut x = chol.solve(&b);
    for (v, s) in x.iter_mut().zip(&d) {
        *v /= *s;
    }
    Ok(x)
}

/// Eigenvalues of a small general complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("Schur form is not triangular".into()))?;
    Ok(ev.iter().copied().collect())
}

/// The square Hankel matrix `H[s, t] = g[s + t]`, `s, t = 0..=n`, applied
/// through FFT-based correlation instead of being stored.
pub struct HankelOperator {
    n: usize,
    len: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl HankelOperator {
    /// `g` holds the `2n + 1` anti-diagonal values.
    pub fn new(g: &[Complex64]) -> Self {
        assert!(g.len() % 2 == 1, "Hankel generator must have odd length");
        let n = g.len() / 2;
        let len = (3 * n + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        spectrum[..g.len()].copy_from_slice(g);
        forward.process(&mut spectrum);
        Self {
            n,
            len,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n + 1);
        // y[s] = sum_t g[s + t] x[t] is entry s + n of g convolved with reversed x
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (u, v) in x.iter().rev().enumerate() {
            buf[u] = *v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[self.n..=2 * self.n].iter().map(|v| v * scale).collect()
    }

    /// `y = H^* x`. A Hankel matrix is complex symmetric, so `H^* x = conj(H conj(x))`.
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let xc: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        self.apply(&xc).into_iter().map(|v| v.conj()).collect()
    }

    fn apply_block(&self, block: &CMatrix, adjoint: bool) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), block.ncols());
        for (k, col) in block.column_iter().enumerate() {
            let x: Vec<Complex64> = col.iter().copied().collect();
            let y = if adjoint {
                self.apply_adjoint(&x)
            } else {
                self.apply(&x)
            };
            out.column_mut(k).copy_from_slice(&y);
        }
        out
    }

    pub fn to_dense(&self, g: &[Complex64]) -> CMatrix {
        CMatrix::from_fn(self.dim(), self.dim(), |s, t| g[s + t])
    }
}

/// Leading singular values and left singular vectors of a Hankel matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Descending; may contain more values than vectors.
    pub singular_values: Vec<f64>,
    /// `(n + 1) x want` orthonormal columns.
    pub left: CMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Dimension up to which the Hankel matrix is decomposed densely.
pub const DENSE_SVD_MAX_DIM: usize = 129;

const OVERSAMPLE: usize = 8;
const MAX_SUBSPACE_ITERS: usize = 300;
const RESIDUAL_TOL: f64 = 1e-10;

/// Top `want` singular triplets (left vectors only) of the Hankel matrix built
/// from `g`. Small matrices use a full dense SVD; larger ones use block
/// subspace iteration on `H H^*` with Rayleigh-Ritz extraction, stopping when
/// every wanted triplet satisfies `||H v - s u|| <= 1e-10 * s_1`.
pub fn hankel_top_singular(g: &[Complex64], want: usize) -> Result<TruncatedSvd> {
    let op = HankelOperator::new(g);
    let dim = op.dim();
    if want == 0 || want > dim {
        return Err(Error::Numerical(format!(
            "cannot extract {want} singular vectors from a {dim}x{dim} matrix"
        )));
    }
    if dim <= DENSE_SVD_MAX_DIM || want + OVERSAMPLE >= dim {
        let svd = dense_svd(&op.to_dense(g))?;
        return Ok(TruncatedSvd {
            left: svd.u.columns(0, want).into_owned(),
            singular_values: svd.singular_values,
            iterations: 0,
            converged: true,
        });
    }
    subspace_iteration(&op, want)
}

fn orthonormalize(m: CMatrix) -> CMatrix {
    m.qr().q()
}

fn subspace_iteration(op: &HankelOperator, want: usize) -> Result<TruncatedSvd> {
    let dim = op.dim();
    let block = want + OVERSAMPLE;
    // fixed start so that results depend only on the data
    let mut rng = rng::stream(Domain::Subspace, 0, dim as u64, block as u64);
    let omega = CMatrix::from_fn(dim, block, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let mut q = orthonormalize(op.apply_block(&omega, false));

    let mut result = None;
    for iter in 1..=MAX_SUBSPACE_ITERS {
        // Rayleigh-Ritz: Z = H^* Q = (Q^* H)^*, so the left singular vectors
        // of Q^* H are the right singular vectors of Z.
        let z = op.apply_block(&q, true);
        let DenseSvd {
            u: uz,
            singular_values: values,
            v: vz,
        } = dense_svd(&z)?;
        let left = &q * vz.columns(0, want);
        let right = uz.columns(0, want).into_owned();
        let hv = op.apply_block(&right, false);
        let s1 = values[0];
        let residual = (0..want)
            .map(|i| (hv.column(i) - left.column(i) * Complex64::new(values[i], 0.0)).norm())
            .fold(0.0, f64::max);
        let converged = s1 == 0.0 || residual <= RESIDUAL_TOL * s1;
        let candidate = TruncatedSvd {
            singular_values: values,
            left,
            iterations: iter,
            converged,
        };
        if converged {
            return Ok(candidate);
        }
        result = Some(candidate);
        q = orthonormalize(op.apply_block(&z, false));
    }
    result.ok_or_else(|| Error::Numerical("subspace iteration produced no iterate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rng::stream(Domain::Noise, seed, 0, 0);
        (0..len)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }

    #[test]
    fn rank_one_hankel_svd() {
        let (w, x) = (1.3177657879870837, 2.446531211037936);
        for n in [8usize, 24] {
            let g: Vec<Complex64> = (0..=2 * n)
                .map(|m| Complex64::from_polar(w, (m as f64 - n as f64) * x))
                .collect();
            let h = HankelOperator::new(&g).to_dense(&g);
            let svd = dense_svd(&h).unwrap();
            let s = CMatrix::from_diagonal(&CVector::from_iterator(
                svd.singular_values.len(),
                svd.singular_values.iter().map(|&v| c(v, 0.0)),
            ));
            assert!((&svd.u * s * svd.v.adjoint() - &h).norm() < 1e-12 * h.norm());
            assert!((svd.singular_values[0] - w * (n + 1) as f64).abs() < 1e-12 * w * n as f64);
            assert!((svd.u[(1, 0)] / svd.u[(0, 0)] - Complex64::from_polar(1.0, x)).norm() < 1e-12);
        }
    }

    #[test]
    fn hankel_operator_matches_dense_product() {
        for n in [1, 4, 33] {
            let g = random_vec(2 * n + 1, n as u64);
            let op = HankelOperator::new(&g);
            let dense = op.to_dense(&g);
            let x = random_vec(n + 1, 100 + n as u64);
            let xv = CVector::from_vec(x.clone());
            let y = op.apply(&x);
            let yd = &dense * &xv;
            let ya = op.apply_adjoint(&x);
            let yad = dense.adjoint() * &xv;
            for i in 0..=n {
                assert!((y[i] - yd[i]).norm() < 1e-11 * (1.0 + yd.norm()));
                assert!((ya[i] - yad[i]).norm() < 1e-11 * (1.0 + yad.norm()));
            }
        }
    }

    #[test]
    fn subspace_iteration_agrees_with_dense_svd() {
        let n = 200;
        let noise = random_vec(2 * n + 1, 3);
        let g: Vec<Complex64> = (0..=2 * n)
            .map(|m| {
                let j = m as f64 - n as f64;
                Complex64::from_polar(1.0, j * 0.7)
                    + Complex64::from_polar(0.6, j * 2.9)
                    + noise[m] * 0.05
            })
            .collect();
        let fast = hankel_top_singular(&g, 3).unwrap();
        assert!(fast.iterations > 0 && fast.converged);
        let dense = dense_svd(&HankelOperator::new(&g).to_dense(&g)).unwrap();
        for i in 0..3 {
            let rel = (fast.singular_values[i] - dense.singular_values[i]).abs()
                / dense.singular_values[0];
            assert!(rel < 1e-10, "singular value {i}: {rel}");
        }
        // compare the two-dimensional signal subspaces through their projectors
        let ud = dense.u.columns(0, 2).into_owned();
        let uf = fast.left.columns(0, 2).into_owned();
        let diff = &ud * ud.adjoint() - &uf * uf.adjoint();
        assert!(diff.norm() < 1e-8);
    }

    #[test]
    fn lstsq_gates_on_condition() {
        let m = CMatrix::from_row_slice(
            3,
            2,
            &[
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 1e-14),
                c(1.0, 0.0),
                c(1.0, 0.0),
            ],
        );
        let rhs = CVector::from_vec(vec![c(1.0, 0.0); 3]);
        assert!(matches!(
            lstsq(&m, &rhs, 1e12, "test"),
            Err(Error::IllConditioned { .. })
        ));
        let zero_col =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert!(lstsq(&zero_col, &CVector::zeros(2), 1e12, "test").is_err());
    }

    #[test]
    fn schur_eigenvalues_of_triangular_matrix() {
        let m =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(3.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((ev[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn hermitian_solve_roundtrip() {
        let a =
            CMatrix::from_row_slice(2, 2, &[c(4.0, 0.0), c(1.0, -2.0), c(1.0, 2.0), c(9.0, 0.0)]);
        let x = CVector::from_vec(vec![c(1.0, 1.0), c(-2.0, 0.5)]);
        let b = &a * &x;
        let got = hermitian_solve(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-13);
        assert!(hermitian_condition(&a).is_finite());
    }
}

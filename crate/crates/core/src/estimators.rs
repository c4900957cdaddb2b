//! Spike recovery from measurement sets: single-snapshot ESPRIT for the
//! global estimate and Gauss-Newton refinement of the least-squares fit.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::measure::{min_circular_gap, wrap_angle, MeasurementSet, SpikeMeasure};
use crate::perturbation::{self, DEFAULT_CONDITION_THRESHOLD};

/// Options for [`esprit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EspritOptions {
    /// When set, the data are asserted to be exact: reject them if the
    /// `(rank+1)`-th singular value exceeds this fraction of the `rank`-th.
    pub exact_rank_ratio: Option<f64>,
    /// Condition gate for the Vandermonde weight solve.
    pub condition_threshold: f64,
}

impl Default for EspritOptions {
    fn default() -> Self {
        Self {
            exact_rank_ratio: None,
            condition_threshold: DEFAULT_CONDITION_THRESHOLD,
        }
    }
}

/// Below this ratio `s_rank / s_1` the signal subspace is considered empty.
const NUMERICAL_RANK_FLOOR: f64 = 1e-13;

pub fn esprit(g: &MeasurementSet, rank: usize) -> Result<SpikeMeasure> {
    esprit_with(g, rank, &EspritOptions::default())
}

/// ESPRIT on the `(n+1) x (n+1)` Hankel matrix `H[s, t] = g_{s+t-n}`.
///
/// The leading `rank` left singular vectors `U` span the shifts of
/// `(e^{i s x_k})_s`; the least-squares solution of `U[..n] Psi = U[1..]` has
/// eigenvalues `e^{i x_k}`, whose arguments are the locations. Weights then
/// come from [`weights_least_squares`].
pub fn esprit_with(g: &MeasurementSet, rank: usize, opts: &EspritOptions) -> Result<SpikeMeasure> {
    let n = g.n();
    if rank < 1 {
        return Err(invalid("rank must be at least 1"));
    }
    if n < rank {
        return Err(invalid(format!(
            "ESPRIT needs 2n+1 >= 2*rank+1 samples: n = {n}, rank = {rank}"
        )));
    }
    let want = (rank + 1).min(n + 1);
    let svd = linalg::hankel_top_singular(g.samples(), want)?;
    let s = &svd.singular_values;
    let s_rank = s[rank - 1];
    if !(s_rank > NUMERICAL_RANK_FLOOR * s[0]) || s_rank == 0.0 {
        return Err(Error::RankDeficient(format!(
            "singular value {rank} is {s_rank:e} against a leading value of {:e}",
            s[0]
        )));
    }
    if let (Some(ratio), Some(&next)) = (opts.exact_rank_ratio, s.get(rank)) {
        if next > ratio * s_rank {
            return Err(Error::RankDeficient(format!(
                "singular value {} is {next:e}, more than {ratio:e} of singular value {rank} ({s_rank:e})",
                rank + 1
            )));
        }
    }

    let u = svd.left.columns(0, rank);
    let upper = u.rows(0, n).into_owned();
    let lower = u.rows(1, n).into_owned();
    let psi = solve_rotation(&upper, &lower)?;
    let locations: Vec<f64> = linalg::eigenvalues(&psi)?
        .into_iter()
        .map(|lambda| wrap_angle(lambda.arg()))
        .collect();
    let mut sorted = locations.clone();
    sorted.sort_by(f64::total_cmp);
    if min_circular_gap(&sorted) <= 0.0 {
        return Err(Error::SpikeCollision {
            first: sorted[0],
            second: sorted[0],
            tolerance: 0.0,
        });
    }
    let weights = weights_least_squares_with(g, &locations, opts.condition_threshold)?;
    SpikeMeasure::new(locations, weights)
}

fn solve_rotation(upper: &CMatrix, lower: &CMatrix) -> Result<CMatrix> {
    let r = upper.ncols();
    let mut psi = CMatrix::zeros(r, r);
    for k in 0..r {
        let col = linalg::lstsq(
            upper,
            &lower.column(k).into_owned(),
            f64::INFINITY,
            "ESPRIT rotation",
        )?;
        psi.column_mut(k).copy_from(&col.solution);
    }
    Ok(psi)
}

/// `argmin_w sum_j |sum_k e^{ijx_k} w_k - g_j|^2` for fixed locations.
pub fn weights_least_squares(g: &MeasurementSet, locations: &[f64]) -> Result<Vec<Complex64>> {
    weights_least_squares_with(g, locations, DEFAULT_CONDITION_THRESHOLD)
}

pub fn weights_least_squares_with(
    g: &MeasurementSet,
    locations: &[f64],
    condition_threshold: f64,
) -> Result<Vec<Complex64>> {
    if locations.is_empty() {
        return Err(invalid("no locations given"));
    }
    let n = g.n() as i64;
    let rows = g.samples().len();
    let vandermonde = CMatrix::from_fn(rows, locations.len(), |row, k| {
        let (s, c) = ((row as i64 - n) as f64 * locations[k]).sin_cos();
        Complex64::new(c, s)
    });
    let rhs = CVector::from_column_slice(g.samples());
    let ls = linalg::lstsq(
        &vandermonde,
        &rhs,
        condition_threshold,
        "Vandermonde system",
    )?;
    Ok(ls.solution.iter().copied().collect())
}

/// Parameters of the Gauss-Newton refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Known model order.
    pub rank: usize,
    pub max_iters: usize,
    /// Stop once an accepted step moves no location by more than this (radians).
    pub step_tol: f64,
    /// How many times a step may be halved while looking for a
    /// non-increasing objective.
    pub max_halvings: u32,
    /// Locations closer than this abort the refinement.
    pub collision_tol: f64,
    pub condition_threshold: f64,
}

impl EstimatorConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iters: 50,
            step_tol: 1e-12,
            max_halvings: 30,
            collision_tol: 1e-8,
            condition_threshold: DEFAULT_CONDITION_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 {
            return Err(invalid("rank must be at least 1"));
        }
        if !(self.step_tol > 0.0) {
            return Err(invalid(format!(
                "step_tol must be positive, got {}",
                self.step_tol
            )));
        }
        if !(self.collision_tol >= 0.0) {
            return Err(invalid("collision_tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// An accepted step moved every location by at most `step_tol`.
    StepTolerance,
    /// No halving of the step decreased the objective.
    Stalled,
    /// `max_iters` steps were taken without meeting `step_tol`.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub measure: SpikeMeasure,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective of every accepted iterate, starting with the initial one.
    pub objective_history: Vec<f64>,
}

impl RefineOutcome {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }

    pub fn objective(&self) -> f64 {
        *self
            .objective_history
            .last()
            .expect("history starts with the initial objective")
    }
}

/// `sum_j |f_j(measure) - g_j|^2`.
pub fn objective(g: &MeasurementSet, measure: &SpikeMeasure) -> Result<f64> {
    Ok(residual(g, measure)?.iter().map(|r| r.norm_sqr()).sum())
}

fn residual(g: &MeasurementSet, measure: &SpikeMeasure) -> Result<Vec<Complex64>> {
    g.difference(&measure.sample_noiseless(g.n())?)
}

/// Gauss-Newton on the least-squares objective over real locations and
/// complex weights. Each step linearises `f_j(x + dx, w (1 + b))` around the
/// current iterate, solves for real `dx` and complex `b`, and is halved until
/// the objective does not increase.
pub fn mle_refine(
    g: &MeasurementSet,
    initial: &SpikeMeasure,
    cfg: &EstimatorConfig,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    if initial.rank() != cfg.rank {
        return Err(invalid(format!(
            "initial estimate has {} spikes, configured rank is {}",
            initial.rank(),
            cfg.rank
        )));
    }
    let n = g.n();
    let mut current = initial.clone();
    let mut current_obj = objective(g, &current)?;
    let mut history = vec![current_obj];

    for iter in 0..cfg.max_iters {
        let (dx, db) = gauss_newton_step(
            &current,
            &residual(g, &current)?,
            n,
            cfg.condition_threshold,
        )?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let candidate = SpikeMeasure::new(
                current
                    .locations()
                    .iter()
                    .zip(&dx)
                    .map(|(x, d)| x + scale * d)
                    .collect(),
                current
                    .weights()
                    .iter()
                    .zip(&db)
                    .map(|(w, b)| w * (1.0 + b * scale))
                    .collect(),
            )?;
            check_collision(&candidate, cfg.collision_tol)?;
            let obj = objective(g, &candidate)?;
            if obj <= current_obj {
                accepted = Some((candidate, obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, obj)) = accepted else {
            return Ok(RefineOutcome {
                measure: current,
                iterations: iter,
                termination: Termination::Stalled,
                objective_history: history,
            });
        };
        let moved = dx.iter().map(|d| (scale * d).abs()).fold(0.0, f64::max);
        current = next;
        current_obj = obj;
        history.push(obj);
        if moved <= cfg.step_tol {
            return Ok(RefineOutcome {
                measure: current,
                iterations: iter + 1,
                termination: Termination::StepTolerance,
                objective_history: history,
            });
        }
    }
    Ok(RefineOutcome {
        measure: current,
        iterations: cfg.max_iters,
        termination: Termination::MaxIterations,
        objective_history: history,
    })
}

/// Real least-squares solve of `sum_k (i j dx_k + b_k) w_k e^{ijx_k} = res_j`
/// with `dx` real and `b` complex, via the stacked real and imaginary parts.
fn gauss_newton_step(
    current: &SpikeMeasure,
    res: &[Complex64],
    n: usize,
    threshold: f64,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let design = perturbation::build_design(current, n)?;
    let (a, b) = (design.a(), design.b());
    let rows = res.len();
    let r = current.rank();
    let w = current.weights();
    let real = |v: f64| Complex64::new(v, 0.0);
    let m = CMatrix::from_fn(2 * rows, 3 * r, |row, col| {
        let (j, imag_row) = (row % rows, row >= rows);
        let k = col % r;
        let c = if col < r {
            a[(j, k)] * w[k]
        } else {
            b[(j, k)] * w[k]
        };
        // coefficient 1 for dx and Re b, i for Im b
        let c = if col >= 2 * r {
            c * Complex64::new(0.0, 1.0)
        } else {
            c
        };
        real(if imag_row { c.im } else { c.re })
    });
    let rhs = CVector::from_fn(2 * rows, |row, _| {
        let v = res[row % rows];
        real(if row >= rows { v.im } else { v.re })
    });
    let sol = linalg::lstsq(&m, &rhs, threshold, "Gauss-Newton system")?.solution;
    let dx = (0..r).map(|k| sol[k].re).collect();
    let db = (0..r)
        .map(|k| Complex64::new(sol[r + k].re, sol[2 * r + k].re))
        .collect();
    Ok((dx, db))
}

fn check_collision(m: &SpikeMeasure, tol: f64) -> Result<()> {
    let x = m.locations();
    if x.len() < 2 {
        return Ok(());
    }
    let r = x.len();
    for k in 0..r {
        let next = (k + 1) % r;
        let gap = if next == 0 {
            std::f64::consts::TAU - (x[r - 1] - x[0])
        } else {
            x[next] - x[k]
        };
        if gap < tol {
            return Err(Error::SpikeCollision {
                first: x[k],
                second: x[next],
                tolerance: tol,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{circular_distance, Provenance};

    #[test]
    fn single_spike_exact() {
        let truth = SpikeMeasure::from_real(vec![1.0], &[2.0]).unwrap();
        let est = esprit(&truth.sample_noiseless(8).unwrap(), 1).unwrap();
        assert!(circular_distance(est.locations()[0], 1.0) < 1e-10);
        assert!((est.weights()[0] - Complex64::new(2.0, 0.0)).norm() / 2.0 < 1e-10);
    }

    #[test]
    fn two_spikes_exact() {
        let truth = SpikeMeasure::from_real(vec![1.0, 2.0], &[1.0, 0.5]).unwrap();
        let est = esprit(&truth.sample_noiseless(16).unwrap(), 2).unwrap();
        for k in 0..2 {
            assert!(circular_distance(est.locations()[k], truth.locations()[k]) < 1e-9);
            let w = truth.weights()[k];
            assert!((est.weights()[k] - w).norm() / w.norm() < 1e-9);
        }
    }

    #[test]
    fn zero_data_is_rank_deficient() {
        let g = MeasurementSet::new(6, vec![Complex64::new(0.0, 0.0); 13], Provenance::default())
            .unwrap();
        assert!(matches!(esprit(&g, 1), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn exact_path_detects_extra_spike() {
        let truth = SpikeMeasure::from_real(vec![0.5, 2.0, 4.0], &[1.0, 1.0, 1.0]).unwrap();
        let g = truth.sample_noiseless(12).unwrap();
        let opts = EspritOptions {
            exact_rank_ratio: Some(1e-8),
            ..EspritOptions::default()
        };
        assert!(matches!(
            esprit_with(&g, 2, &opts),
            Err(Error::RankDeficient(_))
        ));
        assert!(esprit_with(&g, 3, &opts).is_ok());
    }

    #[test]
    fn infeasible_rank() {
        let truth = SpikeMeasure::from_real(vec![0.5], &[1.0]).unwrap();
        let g = truth.sample_noiseless(2).unwrap();
        assert!(matches!(esprit(&g, 3), Err(Error::InvalidArgument(_))));
        assert!(esprit(&g, 0).is_err());
    }

    #[test]
    fn weights_from_true_locations_and_zero_data() {
        let truth = SpikeMeasure::new(
            vec![0.3, 3.3],
            vec![Complex64::new(1.0, -0.5), Complex64::new(0.7, 0.2)],
        )
        .unwrap();
        let g = truth.sample_noiseless(10).unwrap();
        let w = weights_least_squares(&g, truth.locations()).unwrap();
        for (a, b) in w.iter().zip(truth.weights()) {
            assert!((a - b).norm() < 1e-10);
        }
        let zero = MeasurementSet::new(
            10,
            vec![Complex64::new(0.0, 0.0); 21],
            Provenance::default(),
        )
        .unwrap();
        assert!(weights_least_squares(&zero, truth.locations())
            .unwrap()
            .iter()
            .all(|w| w.norm() == 0.0));
        assert!(matches!(
            weights_least_squares(&g, &[1.0, 1.0 + 1e-14]),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn refine_from_truth_is_stationary() {
        let truth = SpikeMeasure::from_real(vec![0.4, 2.2, 5.0], &[1.0, 0.6, 1.3]).unwrap();
        let g = truth.sample_noiseless(32).unwrap();
        let out = mle_refine(&g, &truth, &EstimatorConfig::new(3)).unwrap();
        assert!(out.converged());
        for (a, b) in out.measure.locations().iter().zip(truth.locations()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn refine_rejects_rank_mismatch_and_bad_config() {
        let truth = SpikeMeasure::from_real(vec![0.4, 2.2], &[1.0, 0.6]).unwrap();
        let g = truth.sample_noiseless(16).unwrap();
        assert!(mle_refine(&g, &truth, &EstimatorConfig::new(3)).is_err());
        let mut cfg = EstimatorConfig::new(2);
        cfg.step_tol = 0.0;
        assert!(mle_refine(&g, &truth, &cfg).is_err());
    }

    #[test]
    fn zero_iterations_reports_max_iterations() {
        let truth = SpikeMeasure::from_real(vec![0.4, 2.2], &[1.0, 0.6]).unwrap();
        let g = truth.sample_noiseless(16).unwrap();
        let mut cfg = EstimatorConfig::new(2);
        cfg.max_iters = 0;
        let out = mle_refine(&g, &truth, &cfg).unwrap();
        assert_eq!(out.termination, Termination::MaxIterations);
        assert_eq!(out.objective_history.len(), 1);
    }
}

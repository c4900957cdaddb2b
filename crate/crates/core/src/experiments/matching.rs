//! Pairing estimated spikes with true ones, and the per-spike error metrics.

use crate::error::{invalid, Result};
use crate::measure::{circular_distance, SpikeMeasure};

/// Largest size solved by exhaustive enumeration.
pub const EXHAUSTIVE_MAX: usize = 8;

/// Returns `perm` with `perm[k]` the estimate index paired with truth spike
/// `k`, minimising the summed circular distance.
pub fn match_spikes(truth: &SpikeMeasure, estimate: &SpikeMeasure) -> Result<Vec<usize>> {
    if truth.rank() != estimate.rank() {
        return Err(invalid(format!(
            "cannot pair {} true spikes with {} estimated spikes",
            truth.rank(),
            estimate.rank()
        )));
    }
    let cost: Vec<Vec<f64>> = truth
        .locations()
        .iter()
        .map(|&x| {
            estimate
                .locations()
                .iter()
                .map(|&y| circular_distance(x, y))
                .collect()
        })
        .collect();
    Ok(if cost.len() <= EXHAUSTIVE_MAX {
        exhaustive_assignment(&cost)
    } else {
        hungarian(&cost)
    })
}

pub fn assignment_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    fn recurse(
        cost: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        partial: f64,
        current: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if partial >= best.0 {
            return;
        }
        if row == cost.len() {
            *best = (partial, current.clone());
            return;
        }
        for col in 0..cost.len() {
            if !used[col] {
                used[col] = true;
                current.push(col);
                recurse(cost, row + 1, used, partial + cost[row][col], current, best);
                current.pop();
                used[col] = false;
            }
        }
    }
    let r = cost.len();
    let identity: Vec<usize> = (0..r).collect();
    // start from the identity so ties resolve to it
    let mut best = (assignment_cost(cost, &identity), identity);
    if best.0 == 0.0 {
        return best.1;
    }
    let mut used = vec![false; r];
    // strict improvement only: ties keep the earlier permutation
    recurse(
        cost,
        0,
        &mut used,
        0.0,
        &mut Vec::with_capacity(r),
        &mut best,
    );
    best.1
}

/// Kuhn-Munkres with potentials, O(r^3).
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

/// Per-spike circular location errors and relative weight errors under `pairing`.
pub fn error_metrics(
    truth: &SpikeMeasure,
    estimate: &SpikeMeasure,
    pairing: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if pairing.len() != truth.rank() || pairing.iter().any(|&j| j >= estimate.rank()) {
        return Err(invalid("pairing does not match the measures"));
    }
    let loc = truth
        .locations()
        .iter()
        .zip(pairing)
        .map(|(&x, &j)| circular_distance(x, estimate.locations()[j]))
        .collect();
    let wt = truth
        .weights()
        .iter()
        .zip(pairing)
        .map(|(&w, &j)| (estimate.weights()[j] - w).norm() / w.norm())
        .collect();
    Ok((loc, wt))
}

mod common;

use std::f64::consts::TAU;

use common::{brute_force_matching, circular, fourier_direct};
use num_complex::Complex64;
use proptest::prelude::*;
use spikelab::estimators;
use spikelab::experiments::{error_metrics, match_spikes, SweepConfig};
use spikelab::io;
use spikelab::measure::{circular_distance, random_measure, wrap_angle, NoiseModel, SpikeMeasure};
use spikelab::plotdata;

fn measure_strategy(max_r: usize) -> impl Strategy<Value = SpikeMeasure> {
    (
        1..=max_r,
        any::<u64>(),
        prop::collection::vec((0.5f64..1.5, 0.0f64..TAU), max_r),
    )
        .prop_map(|(r, seed, polar)| {
            let base = random_measure(r, 0.2, 0.5, 1.5, seed).unwrap();
            let w = polar[..r]
                .iter()
                .map(|&(m, a)| Complex64::from_polar(m, a))
                .collect();
            SpikeMeasure::new(base.locations().to_vec(), w).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn real_weights_give_conjugate_symmetric_samples(
        seed in any::<u64>(), r in 1usize..6, n in 1usize..64,
    ) {
        let m = random_measure(r, 0.1, 0.5, 1.5, seed).unwrap();
        let g = m.sample_noiseless(n).unwrap();
        for j in 1..=n as i64 {
            prop_assert!((g.at(-j) - g.at(j).conj()).norm() <= 1e-14 * m.total_variation().max(1.0) * 4.0);
        }
    }

    #[test]
    fn fourier_bounded_by_total_variation(m in measure_strategy(6), j in -5000i64..5000) {
        let f = m.fourier_coefficient(j);
        prop_assert!(f.norm() <= m.total_variation() * (1.0 + 1e-12));
        let want = fourier_direct(m.locations(), m.weights(), j);
        prop_assert!((f - want).norm() <= 1e-9 * m.total_variation());
    }

    #[test]
    fn circular_distance_is_a_metric(x in -20.0f64..20.0, y in -20.0f64..20.0, z in -20.0f64..20.0) {
        let d = circular_distance;
        prop_assert!(d(x, y) >= 0.0 && d(x, y) <= std::f64::consts::PI + 1e-12);
        prop_assert!((d(x, y) - d(y, x)).abs() < 1e-12);
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-12);
        prop_assert!((d(x, y) - circular(x, y)).abs() < 1e-9);
        let w = wrap_angle(x);
        prop_assert!((0.0..TAU).contains(&w));
    }

    #[test]
    fn sampled_measures_respect_the_gap(r in 1usize..20, seed in any::<u64>()) {
        let gap = 0.25;
        let m = random_measure(r, gap, 0.5, 1.5, seed).unwrap();
        prop_assert_eq!(m.rank(), r);
        prop_assert!(r == 1 || m.min_gap() >= gap);
        prop_assert!(m.locations().iter().all(|x| (0.0..TAU).contains(x)));
        prop_assert!(m.weights().iter().all(|w| w.im == 0.0 && (0.5..=1.5).contains(&w.re)));
    }

    #[test]
    fn matching_is_optimal(
        seed in any::<u64>(), r in 1usize..6,
        jitter in prop::collection::vec(-0.4f64..0.4, 6),
        order in Just(()).prop_perturb(|_, mut rng| {
            let mut v: Vec<usize> = (0..6).collect();
            for i in (1..6).rev() { v.swap(i, rng.random_range(0..=i)); }
            v
        }),
    ) {
        let truth = random_measure(r, 0.3, 0.5, 1.5, seed).unwrap();
        let locs: Vec<f64> = order.iter().filter(|&&i| i < r)
            .map(|&i| truth.locations()[i] + jitter[i]).collect();
        let est = SpikeMeasure::from_real(locs, &vec![1.0; r]).unwrap();
        let perm = match_spikes(&truth, &est).unwrap();
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..r).collect::<Vec<_>>());
        let cost: f64 = error_metrics(&truth, &est, &perm).unwrap().0.iter().sum();
        prop_assert!(cost <= brute_force_matching(truth.locations(), est.locations()) + 1e-12);
    }

    #[test]
    fn measure_json_round_trip(m in measure_strategy(8), seed in proptest::option::of(any::<u64>())) {
        let text = io::measure_to_json(&m, seed).unwrap();
        prop_assert_eq!(io::parse_measure(text.as_bytes()).unwrap(), m);
    }

    #[test]
    fn measurement_json_round_trip(
        m in measure_strategy(4), n in 1usize..40, sigma in 0.0f64..1.0,
        p in 0.0f64..1.0, seed in any::<u64>(), trial in any::<u64>(),
    ) {
        let g = NoiseModel::new(sigma, p, seed).unwrap()
            .apply_noise(&m.sample_noiseless(n).unwrap(), trial);
        let text = io::measurement_to_json(&g).unwrap();
        prop_assert_eq!(io::parse_measurement(text.as_bytes()).unwrap(), g);
    }

    #[test]
    fn plotdata_round_trip(points in prop::collection::vec((-10.0f64..10.0, -20.0f64..5.0), 0..20)) {
        let text = plotdata::render("x y", &points);
        prop_assert_eq!(plotdata::parse(&text).unwrap(), points);
    }

    #[test]
    fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = io::parse_measure(&bytes);
        let _ = io::parse_measurement(&bytes);
        let _ = SweepConfig::from_json(&bytes);
        if let Ok(s) = std::str::from_utf8(&bytes) {
            let _ = plotdata::parse(s);
        }
    }

    #[test]
    fn noise_is_deterministic_and_keyed_by_trial(seed in any::<u64>(), trial in 0u64..1000, n in 1usize..50) {
        let model = NoiseModel::new(0.1, 0.5, seed).unwrap();
        let a = model.draw_noise(n, trial);
        prop_assert_eq!(&a, &model.draw_noise(n, trial));
        prop_assert_ne!(&a, &model.draw_noise(n, trial + 1));
        prop_assert_eq!(a[n], Complex64::new(0.0, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Rotating every spike by `s` multiplies `f_j` by `e^{ijs}`, and ESPRIT
    /// on the rotated data returns the rotated locations.
    #[test]
    fn shift_equivariance(seed in any::<u64>(), r in 1usize..5, s in -3.0f64..3.0) {
        let m = random_measure(r, 0.3, 0.5, 1.5, seed).unwrap();
        let moved_locs: Vec<f64> = m.locations().iter().map(|x| x + s).collect();
        let moved = SpikeMeasure::new(moved_locs, m.weights().to_vec()).unwrap();
        let n = 24;
        let (g, h) = (m.sample_noiseless(n).unwrap(), moved.sample_noiseless(n).unwrap());
        for j in -(n as i64)..=n as i64 {
            let rotated = g.at(j) * Complex64::from_polar(1.0, j as f64 * s);
            prop_assert!((h.at(j) - rotated).norm() <= 1e-11 * m.total_variation());
        }
        let est = estimators::esprit(&h, r).unwrap();
        let perm = match_spikes(&moved, &est).unwrap();
        let (loc, wt) = error_metrics(&moved, &est, &perm).unwrap();
        prop_assert!(loc.iter().all(|&e| e < 1e-8));
        prop_assert!(wt.iter().all(|&e| e < 1e-8));
    }

    #[test]
    fn noiseless_recovery(m in measure_strategy(6), extra in 0usize..40) {
        let n = m.rank() + 16 + extra;
        let est = estimators::esprit(&m.sample_noiseless(n).unwrap(), m.rank()).unwrap();
        let perm = match_spikes(&m, &est).unwrap();
        let (loc, wt) = error_metrics(&m, &est, &perm).unwrap();
        prop_assert!(loc.iter().all(|&e| e < 1e-8), "{loc:?}");
        prop_assert!(wt.iter().all(|&e| e < 1e-8), "{wt:?}");
    }
}

use fesim::analysis::{normalized_rms, period_average, residual_force, segment_rms, smooth_force, PeriodSet, RmsTable, SpatialRmsMap, MAP_FACTOR};
use fesim::spline::NaturalSpline;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// Sliding mean by explicit time bookkeeping.
fn brute_smooth(x: &[f64], fs: f64, window: f64, step: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t0 = k as f64 * step;
        let lo = (t0 * fs).round() as usize;
        let hi = lo + (window * fs).round() as usize;
        if hi > x.len() {
            break;
        }
        let mut s = 0.0;
        for v in &x[lo..hi] {
            s += v;
        }
        out.push((t0 + window / 2.0, s / (hi - lo) as f64));
        k += 1;
    }
    out
}

fn brute_period_mean(pts: &[(f64, f64)], (a, b): (f64, f64)) -> f64 {
    let sel: Vec<f64> = pts.iter().filter(|(t, _)| *t >= a && *t < b).map(|(_, v)| *v).collect();
    sel.iter().sum::<f64>() / sel.len() as f64
}

fn brute_segment_rms(x: &[f64], fs: usize, start_s: usize, seconds: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..seconds {
        let mut ss = 0.0;
        for i in 0..fs {
            let v = x[(start_s + k) * fs + i];
            ss += v * v;
        }
        acc += (ss / fs as f64).sqrt();
    }
    acc / seconds as f64
}

#[test]
fn smoothing_and_period_means_match_brute_force() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = [100.0, 250.0, 1000.0][seed as usize % 3];
        let duration = rng.random_range(20..60) as f64;
        let x: Vec<f64> = (0..(duration * fs) as usize).map(|i| (i as f64 * 0.001).sin() * 50.0 + rng.random_range(-5.0..5.0)).collect();
        let s = smooth_force(&x, fs, 1.0, 0.5).unwrap();
        let b = brute_smooth(&x, fs, 1.0, 0.5);
        assert_eq!(s.values.len(), b.len());
        for ((t, v), (bt, bv)) in s.times.iter().zip(&s.values).zip(&b) {
            assert!(close(*t, *bt, 1e-12) && close(*v, *bv, 1e-12));
        }
        let end = duration - 1.0;
        let periods = PeriodSet::evenly_spaced(end, rng.random_range(1..5));
        let means = period_average(&s, &periods).unwrap();
        for (m, p) in means.iter().zip(&periods.0) {
            assert!(close(*m, brute_period_mean(&b, *p), 1e-12));
        }
        let mvc = rng.random_range(50.0..500.0);
        let last = periods.last();
        let r = residual_force(&s, last, mvc).unwrap();
        assert!(close(r, 100.0 * brute_period_mean(&b, last) / mvc, 1e-12));
    }
}

#[test]
fn segment_rms_matches_brute_force_and_table_route() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let fs = 2048usize;
        let seconds = rng.random_range(3..12);
        let x: Vec<f64> = (0..seconds * fs).map(|_| rng.random_range(-1.0..1.0) * 0.05).collect();
        let a = rng.random_range(0..seconds - 1);
        let len = rng.random_range(1..=seconds - a);
        let direct = segment_rms(&x, fs as f64, (a as f64, (a + len) as f64)).unwrap();
        let oracle = brute_segment_rms(&x, fs, a, len);
        assert!(close(direct, oracle, 1e-12), "{direct} {oracle}");
        let table = RmsTable::from_channels(1, 1, [x.as_slice()], fs as f64);
        assert!(close(table.segment_rms(0, (a as f64, (a + len) as f64)).unwrap(), oracle, 1e-12));
    }
}

#[test]
fn normalized_rms_divides_by_initial_value() {
    let n = normalized_rms(&[2.0, 1.0, 3.0]).unwrap();
    assert_eq!(n, vec![1.0, 0.5, 1.5]);
    assert!(normalized_rms(&[0.0, 1.0]).is_err());
    assert!(normalized_rms(&[]).is_err());
}

// Natural cubic spline through unit-spaced knots by a dense linear solve of
// the second-derivative system.
fn dense_spline(y: &[f64], x: f64) -> f64 {
    let n = y.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    a[(0, 0)] = 1.0;
    a[(n - 1, n - 1)] = 1.0;
    for i in 1..n - 1 {
        a[(i, i - 1)] = 1.0;
        a[(i, i)] = 4.0;
        a[(i, i + 1)] = 1.0;
        rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
    }
    let m = a.lu().solve(&rhs).unwrap();
    let last = (n - 1) as f64;
    if x > last {
        let slope = y[n - 1] - y[n - 2] + m[n - 2] / 6.0 + m[n - 1] / 3.0;
        return y[n - 1] + slope * (x - last);
    }
    let i = (x.floor() as usize).min(n - 2);
    let t = x - i as f64;
    let (a0, b0) = (1.0 - t, t);
    a0 * y[i] + b0 * y[i + 1] + ((a0 * a0 * a0 - a0) * m[i] + (b0 * b0 * b0 - b0) * m[i + 1]) / 6.0
}

#[test]
fn spline_matches_dense_solve() {
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..20);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = NaturalSpline::new(&y).unwrap();
        for k in 0..(n * 10 + 9) {
            let x = k as f64 / 10.0;
            assert!(close(s.eval(x), dense_spline(&y, x), 1e-9), "seed {seed} x {x}");
        }
    }
}

#[test]
fn spatial_maps_pass_through_base_nodes() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..128).map(|_| rng.random_range(0.001..0.2)).collect();
        let map = SpatialRmsMap::from_base(8, 16, base.clone()).unwrap();
        let (rows, cols) = map.interpolated_dims();
        assert_eq!((rows, cols), (80, 160));
        assert_eq!(map.interpolated.len(), rows * cols);
        for i in 0..8 {
            for j in 0..16 {
                let v = map.interpolated[(i * MAP_FACTOR) * cols + j * MAP_FACTOR];
                assert!((v - base[i * 16 + j]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn interpolated_csv_has_grid_shape() {
    let map = SpatialRmsMap::from_base(8, 16, vec![1.0; 128]).unwrap();
    let csv = map.interpolated_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 80);
    assert!(lines.iter().all(|l| l.split(',').count() == 160));
    assert!(map.interpolated.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

proptest! {
    #[test]
    fn constant_force_smooths_to_itself(level in 0.0f64..1000.0, secs in 3usize..30) {
        let x = vec![level; secs * 100];
        let s = smooth_force(&x, 100.0, 1.0, 0.5).unwrap();
        prop_assert!(s.values.iter().all(|v| (v - level).abs() <= 1e-9 * level.max(1.0)));
        prop_assert_eq!(s.values.len(), 2 * secs - 1);
    }

    #[test]
    fn segment_rms_scales_linearly(gain in 0.01f64..100.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..4 * 512).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * gain).collect();
        let a = segment_rms(&x, 512.0, (0.0, 4.0)).unwrap();
        let b = segment_rms(&y, 512.0, (0.0, 4.0)).unwrap();
        prop_assert!((b - gain * a).abs() <= 1e-12 * b.max(1.0));
    }
}

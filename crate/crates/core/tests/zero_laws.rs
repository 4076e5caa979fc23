mod common;

use common::*;
use gaflab::gaf::DEFAULT_TAIL_EPS;
use gaflab::zeros::{
    count_zeros_robust, find_zeros, jensen_residual, reconstruct_modulus, residual_tolerance, write_zero_csv,
    ZERO_CSV_HEADER,
};
use gaflab::{GafSnapshot, RngStream};
use num_complex::Complex64;
use rayon::prelude::*;

/// Snapshot valid a little beyond `radius`, leaving room for retries.
fn snapshot(radius: f64, stream: &RngStream) -> GafSnapshot {
    GafSnapshot::sample_for_radius(radius * 1.01, DEFAULT_TAIL_EPS, stream, 0.0).unwrap()
}

#[test]
fn companion_count_matches_winding() {
    for (j, radius) in [0.5f64, 1.0, 2.0].into_iter().enumerate() {
        let root = RngStream::new(50 + j as u64);
        let bad: Vec<String> = (0..1000u64)
            .into_par_iter()
            .filter_map(|i| {
                let s = snapshot(radius, &root.child64(i));
                match find_zeros(&s, radius) {
                    Ok(zs) if zs.is_consistent() => {
                        let over = zs
                            .zeros
                            .iter()
                            .zip(&zs.residuals)
                            .any(|(z, r)| *r >= residual_tolerance(*z) || z.norm() >= zs.disk_radius);
                        over.then(|| format!("sample {i}: residual/disk violation"))
                    }
                    Ok(_) => Some(format!("sample {i}: inconsistent")),
                    Err(e) => Some(format!("sample {i}: {e}")),
                }
            })
            .collect();
        assert!(bad.is_empty(), "R = {radius}: {bad:?}");
    }
}

#[test]
fn mean_zero_count_is_area_over_pi() {
    for (j, radius) in [1.0f64, 2.0].into_iter().enumerate() {
        let root = RngStream::new(60 + j as u64);
        let counts: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let s = snapshot(radius, &root.child64(i));
                count_zeros_robust(&s, radius, s.valid_radius()).unwrap().0 as f64
            })
            .collect();
        let m = mean(&counts);
        assert!((m - radius * radius).abs() < 3.0 * sem(&counts), "R = {radius}: {m}");
    }
}

#[test]
fn jensen_identity_on_random_snapshots() {
    let root = RngStream::new(70);
    let worst = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(2.05, DEFAULT_TAIL_EPS, &root.child64(i), 0.0).unwrap();
            jensen_residual(&s, 2.0).unwrap()
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst < 1e-6, "max residual {worst}");
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[test]
fn reconstruction_error_shrinks_with_radius() {
    let root = RngStream::new(71);
    let errs: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(4.05, DEFAULT_TAIL_EPS, &root.child64(i), 0.0).unwrap();
            let truth = s.eval(Complex64::new(0.0, 0.0)).unwrap().norm();
            let rel = |r: f64| {
                let zs = find_zeros(&s, r).unwrap();
                (reconstruct_modulus(&zs, zs.disk_radius) - truth).abs() / truth
            };
            (rel(2.0), rel(4.0))
        })
        .collect();
    let m2 = median(errs.iter().map(|e| e.0).collect());
    let m4 = median(errs.iter().map(|e| e.1).collect());
    assert!(m4 < m2, "median relative error r=4 {m4}, r=2 {m2}");
}

#[test]
fn hole_probability_decreases_with_radius() {
    let n = 100_000u64;
    let freq: Vec<(u64, f64)> = [0.4f64, 0.8, 1.2]
        .into_iter()
        .enumerate()
        .map(|(j, radius)| {
            let root = RngStream::new(80 + j as u64);
            let holes = (0..n)
                .into_par_iter()
                .filter(|&i| {
                    let s = snapshot(radius, &root.child64(i));
                    count_zeros_robust(&s, radius, s.valid_radius()).unwrap().0 == 0
                })
                .count() as u64;
            (holes, radius)
        })
        .collect();
    for w in freq.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        assert!(a > b, "{freq:?}");
        assert!(freq_z(a, n, b, n) > 3.0, "{freq:?}");
    }
}

#[test]
fn explicit_quadratic_zeros() {
    let s = GafSnapshot::from_coeffs(
        vec![Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        2.0,
        0.0,
    )
    .unwrap();
    let zs = find_zeros(&s, 1.5).unwrap();
    assert_eq!(zs.len(), 2);
    let r = 2f64.powf(0.25);
    for z in &zs.zeros {
        assert!((z.norm() - r).abs() < 1e-12 && z.im.abs() < 1e-12);
    }
}

#[test]
fn zero_csv_round_trip() {
    let root = RngStream::new(90);
    let sets: Vec<(u64, _)> = (0..3u64)
        .map(|i| (i, find_zeros(&snapshot(2.0, &root.child64(i)), 2.0).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_zero_csv(&mut buf, &sets).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(ZERO_CSV_HEADER));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), sets.iter().map(|s| s.1.len()).sum::<usize>());
    let mut k = 0;
    for (id, zs) in &sets {
        for z in &zs.zeros {
            assert_eq!(rows[k][0].parse::<u64>().unwrap(), *id);
            assert_eq!(rows[k][2].parse::<f64>().unwrap(), z.re);
            assert_eq!(rows[k][3].parse::<f64>().unwrap(), z.im);
            k += 1;
        }
    }
}

mod common;

use common::*;
use gaflab::estimate::{
    estimate_event, estimate_range, estimate_sweep, fit_points, fit_rate, EstimatorReport, EventModel, EventSpec,
};
use gaflab::gaf::truncation_degree;
use gaflab::lemmas::{ou_lemma_probe, OuLemma};
use gaflab::{GafSnapshot, RngStream};
use num_complex::Complex64;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Certifies "no zero in the closed disk D_R" by quadtree refinement of the
/// square [−R, R]²: a cell with centre c and half-width s is zero-free when
/// |f(c)| > L·s·√2, with L a bound on |f′| over the square. Cells missing
/// the disk are discarded; a cell that still cannot be certified at
/// half-width `s_min` is taken to contain a zero.
fn min_modulus_hole(s: &GafSnapshot, radius: f64, s_min: f64) -> bool {
    let rho = radius * std::f64::consts::SQRT_2;
    let mut lip = 0.0;
    for (n, a) in s.coeffs().iter().enumerate().skip(1) {
        lip += a.norm() * derivative_weight(n, rho);
    }
    let mut stack = vec![(Complex64::new(0.0, 0.0), radius)];
    while let Some((c, h)) = stack.pop() {
        let diag = h * std::f64::consts::SQRT_2;
        if c.norm() - diag > radius {
            continue;
        }
        let v = s.eval(c).unwrap().norm();
        if v > lip * diag {
            continue;
        }
        if h < s_min {
            return false;
        }
        let q = h / 2.0;
        for (dx, dy) in [(-q, -q), (-q, q), (q, -q), (q, q)] {
            stack.push((c + Complex64::new(dx, dy), q));
        }
    }
    true
}

/// n ρ^{n−1}/√n! = √n · ρ^{n−1}/√(n−1)!
fn derivative_weight(n: usize, rho: f64) -> f64 {
    let mut w = 1.0;
    for k in 1..n {
        w *= rho / (k as f64).sqrt();
    }
    w * (n as f64).sqrt()
}

#[test]
fn lipschitz_weights_match_direct_formula() {
    let rho: f64 = 0.7;
    for n in 1..30usize {
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let direct = n as f64 * rho.powi(n as i32 - 1) / fact.sqrt();
        assert!((derivative_weight(n, rho) - direct).abs() < 1e-12 * direct);
    }
}

#[test]
fn single_time_hole_matches_min_modulus_oracle() {
    let n = 10_000u64;
    let radius = 0.5;
    let spec = EventSpec::hole(EventModel::Gaf, radius, 0.0, 0.02);
    let est = estimate_event(&spec, n, &RngStream::new(200)).unwrap();
    let vr = radius * std::f64::consts::SQRT_2 * 1.01;
    let deg = truncation_degree(vr, 1e-8).unwrap();
    let root = RngStream::new(201);
    let holes = (0..n)
        .into_par_iter()
        .filter(|&i| {
            let s = GafSnapshot::sample(deg, vr, &root.child64(i), 0.0).unwrap();
            min_modulus_hole(&s, radius, 1e-7)
        })
        .count() as u64;
    let z = freq_z(est.successes, n, holes, n);
    assert!(z < 2.0, "estimator {} oracle {} (z = {z})", est.p_hat, holes as f64 / n as f64);
}

#[test]
fn min_modulus_oracle_on_known_functions() {
    let linear = |root: f64| {
        GafSnapshot::from_coeffs(vec![Complex64::new(-root, 0.0), Complex64::new(1.0, 0.0)], 2.0, 0.0).unwrap()
    };
    assert!(min_modulus_hole(&linear(1.0), 0.9, 1e-7));
    assert!(min_modulus_hole(&linear(0.6), 0.5, 1e-7));
    assert!(!min_modulus_hole(&linear(0.3), 0.5, 1e-7));
    assert!(!min_modulus_hole(&linear(-0.49), 0.5, 1e-7));
}

#[test]
fn fit_recovers_noisy_exponential() {
    let t: Vec<f64> = (1..=8).map(|k| k as f64 * 0.5).collect();
    let exact: Vec<f64> = t.iter().map(|t| -3.0 * t).collect();
    let f = fit_points(&t, &exact).unwrap();
    assert!((f.slope + 3.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    let mut rng = RngStream::new(202).rng();
    for _ in 0..50 {
        let noisy: Vec<f64> = t
            .iter()
            .map(|t| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (-3.0 * t).exp() * (1.0 + 0.05 * e)
            })
            .map(f64::ln)
            .collect();
        let f = fit_points(&t, &noisy).unwrap();
        assert!(f.slope >= -3.3 && f.slope <= -2.7, "slope {}", f.slope);
    }
}

#[test]
fn fit_rate_needs_three_reports() {
    let spec = EventSpec::hole(EventModel::PoissonBm, 0.3, 1.0, 0.1);
    let r = EstimatorReport::from_counts(spec.clone(), 10, 100, 1);
    assert!(fit_rate(&[r.clone(), r]).is_err());
}

fn small_spec() -> EventSpec {
    EventSpec::hole(EventModel::PoissonBm, 0.4, 0.4, 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn merging_is_associative(n in 3u64..120, a in 0u64..120, b in 0u64..120, seed in 0u64..1000) {
        let (a, b) = (a % n, b % n);
        let (lo, hi) = (a.min(b), a.max(b));
        let spec = small_spec();
        let s = RngStream::new(seed);
        let x = estimate_range(&spec, 0..lo, &s).unwrap();
        let y = estimate_range(&spec, lo..hi, &s).unwrap();
        let z = estimate_range(&spec, hi..n, &s).unwrap();
        let left = x.merge(&y).unwrap().merge(&z).unwrap();
        let right = x.merge(&y.merge(&z).unwrap()).unwrap();
        let whole = estimate_event(&spec, n, &s).unwrap();
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(&left, &whole);
    }

    #[test]
    fn wilson_interval_brackets_estimate(n in 1u64..10_000, k in 0u64..10_000) {
        let k = k % (n + 1);
        let r = EstimatorReport::from_counts(small_spec(), k, n, 0);
        prop_assert!(r.ci_low() <= r.p_hat && r.p_hat <= r.ci_high());
        prop_assert!(r.ci_low() >= 0.0 && r.ci_high() <= 1.0);
    }
}

#[test]
fn gaf_hole_probability_is_monotone() {
    let n = 4000u64;
    let run = |r: f64, t: f64, seed: u64| {
        estimate_event(&EventSpec::hole(EventModel::Gaf, r, t, 0.05), n, &RngStream::new(seed)).unwrap()
    };
    let small = run(0.3, 1.0, 203);
    let large = run(0.5, 1.0, 204);
    assert!(small.p_hat > large.p_hat);
    assert!(freq_z(small.successes, n, large.successes, n) > 3.0);
    let short = run(0.4, 0.5, 205);
    let long = run(0.4, 2.0, 206);
    assert!(short.p_hat > long.p_hat);
    assert!(freq_z(short.successes, n, long.successes, n) > 3.0);
    // one sweep reads every horizon from the same paths: exactly monotone
    let sweep = estimate_sweep(&EventSpec::hole(EventModel::Gaf, 0.4, 2.0, 0.05), &[0.0, 0.5, 1.0, 1.5, 2.0], 2000, &RngStream::new(207)).unwrap();
    assert!(sweep.windows(2).all(|w| w[0].successes >= w[1].successes));
}

#[test]
fn vanishing_radius_gives_certain_hole() {
    let r = estimate_event(&EventSpec::hole(EventModel::Gaf, 1e-6, 1.0, 0.1), 500, &RngStream::new(208)).unwrap();
    assert_eq!(r.successes, 500);
    for model in [EventModel::PoissonBm, EventModel::PerturbedLattice, EventModel::TriangularCluster] {
        let r = estimate_event(&EventSpec::hole(model, 1e-6, 1.0, 0.1), 200, &RngStream::new(209)).unwrap();
        assert!(r.p_hat > 0.99, "{model}: {}", r.p_hat);
    }
}

#[test]
fn empty_crowd_is_certain() {
    for model in [EventModel::Gaf, EventModel::PoissonBm] {
        let r = estimate_event(&EventSpec::crowd(model, 1.0, 0, 1.0, 0.1), 50, &RngStream::new(210)).unwrap();
        assert_eq!(r.p_hat, 1.0);
    }
}

#[test]
fn lemma_probe_stationary_entries() {
    let n = 100_000;
    let p = ou_lemma_probe(OuLemma::SmallBall, 1.0, None, &[0.0, 0.5, 1.0], 0.05, n, &RngStream::new(211)).unwrap();
    let exact = 1.0 - (-1f64).exp();
    let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((p.p_hat[0] - exact).abs() < 3.0 * sigma, "{}", p.p_hat[0]);
    let r = 0.4;
    let h = ou_lemma_probe(OuLemma::HalfPlane, r, None, &[0.0, 0.5, 1.0], 0.05, n, &RngStream::new(212)).unwrap();
    let exact = Normal::new(0.0, 1.0).unwrap().cdf(r * 2f64.sqrt());
    let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((h.p_hat[0] - exact).abs() < 3.0 * sigma, "{}", h.p_hat[0]);
}

#[test]
fn reports_round_trip_through_json() {
    let r = estimate_event(&EventSpec::crowd(EventModel::PoissonBm, 1.0, 2, 0.5, 0.1), 300, &RngStream::new(213)).unwrap();
    let back: EstimatorReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let again = estimate_event(&back.spec, back.n_samples, &RngStream::new(back.seed_root)).unwrap();
    assert_eq!(again, r);
}

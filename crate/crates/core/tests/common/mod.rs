#![allow(dead_code)]

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn sem(xs: &[f64]) -> f64 {
    (var(xs) / xs.len() as f64).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic D.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// KS critical value at the 1% level (asymptotic).
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Two-sample chi-squared statistic on histograms over common bins; bins
/// with no mass in either sample are skipped. Returns (statistic, dof).
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> (f64, usize) {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let ka = (nb as f64 / na as f64).sqrt();
    let kb = (na as f64 / nb as f64).sqrt();
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        let d = ka * x as f64 - kb * y as f64;
        stat += d * d / (x + y) as f64;
        bins += 1;
    }
    (stat, bins.saturating_sub(1))
}

/// Histogram of counts with everything ≥ `cap` pooled into the last bin.
pub fn histogram(counts: &[usize], cap: usize) -> Vec<u64> {
    let mut h = vec![0u64; cap + 1];
    for &c in counts {
        h[c.min(cap)] += 1;
    }
    h
}

/// Binomial frequency difference in units of its combined standard error.
pub fn freq_z(s1: u64, n1: u64, s2: u64, n2: u64) -> f64 {
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let se = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
    if se == 0.0 {
        return if p1 == p2 { 0.0 } else { f64::INFINITY };
    }
    (p1 - p2).abs() / se
}

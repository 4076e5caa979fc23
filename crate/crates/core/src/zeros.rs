//! Zeros of snapshots: argument-principle counts, companion-matrix
//! extraction, Jensen's identity and modulus reconstruction from zeros.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaf::{variance_at, Analytic, GafSnapshot};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// First quadrature level of the winding count.
pub const WINDING_START_NODES: usize = 256;
/// Give up once this many nodes fail to settle.
pub const WINDING_MAX_NODES: usize = 1 << 16;
/// Allowed distance of a winding integral from the nearest integer.
pub const WINDING_RESIDUE: f64 = 1e-3;
/// Relative radius perturbation used when a zero sits on the contour.
pub const RADIUS_PERTURBATION: f64 = 1e-3;
/// Retries after the first attempt.
pub const MAX_RADIUS_RETRIES: usize = 3;
/// Zeros closer than this (relative to the disk radius) are merged.
pub const MERGE_DISTANCE: f64 = 1e-8;

const JENSEN_TOL: f64 = 1e-9;
const JENSEN_START_NODES: usize = 64;
const JENSEN_MAX_NODES: usize = 1 << 20;

/// (1/2πi)∮_{|z|=R} f′/f dz by trapezoid quadrature with node doubling.
pub fn count_zeros_winding<F: Analytic + ?Sized>(f: &F, radius: f64) -> Result<i64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::domain("R", format!("must be > 0, got {radius}")));
    }
    let near = || Error::ZeroNearContour {
        radius,
        nodes: WINDING_MAX_NODES,
    };
    let sample = |theta: f64| -> Result<Complex64> {
        let z = Complex64::from_polar(radius, theta);
        let (v, d) = f.value_and_derivative(z);
        let q = z * d / v;
        if !q.re.is_finite() || !q.im.is_finite() {
            return Err(near());
        }
        Ok(q)
    };

    let mut n = WINDING_START_NODES;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        sum += sample(2.0 * PI * j as f64 / n as f64)?;
    }
    let mut prev = sum / n as f64;
    while n < WINDING_MAX_NODES {
        // the new level reuses every old node and adds the midpoints
        for j in 0..n {
            sum += sample(2.0 * PI * (2 * j + 1) as f64 / (2 * n) as f64)?;
        }
        n *= 2;
        let cur = sum / n as f64;
        let k = cur.re.round();
        let residue = Complex64::new(cur.re - k, cur.im).norm();
        if k == prev.re.round() && residue < WINDING_RESIDUE {
            return Ok(k as i64);
        }
        prev = cur;
    }
    Err(near())
}

/// Radii tried in order: R, then R(1 ∓ 10⁻³·j) for j = 1, 2, …, skipping
/// any radius above `max_radius`.
pub fn perturbed_radii(radius: f64, max_radius: f64) -> impl Iterator<Item = f64> {
    let mut out = vec![radius];
    let mut j = 1.0;
    while out.len() <= MAX_RADIUS_RETRIES {
        for sign in [-1.0, 1.0] {
            let r = radius * (1.0 + sign * j * RADIUS_PERTURBATION);
            if r > 0.0 && r <= max_radius && out.len() <= MAX_RADIUS_RETRIES {
                out.push(r);
            }
        }
        j += 1.0;
        if j > 10.0 {
            break;
        }
    }
    out.into_iter()
}

/// Winding count with the radius-perturbation retry. Returns the count and
/// the radius that produced it.
pub fn count_zeros_robust<F: Analytic + ?Sized>(
    f: &F,
    radius: f64,
    max_radius: f64,
) -> Result<(i64, f64)> {
    let mut last = None;
    for r in perturbed_radii(radius, max_radius) {
        match count_zeros_winding(f, r) {
            Ok(k) => return Ok((k, r)),
            Err(e @ Error::ZeroNearContour { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::ZeroNearContour {
        radius,
        nodes: WINDING_MAX_NODES,
    }))
}

/// How the zeros were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    Companion,
    CompanionNewton,
}

impl fmt::Display for ZeroMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroMethod::Companion => write!(f, "companion"),
            ZeroMethod::CompanionNewton => write!(f, "companion+newton"),
        }
    }
}

/// Zeros of one snapshot inside an open disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub time: f64,
    pub disk_radius: f64,
    pub zeros: Vec<Complex64>,
    /// |f(zero)| for each listed zero
    pub residuals: Vec<f64>,
    pub method: ZeroMethod,
    pub max_residual: f64,
    pub count_check: i64,
}

impl ZeroSet {
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        self.count_check == self.zeros.len() as i64
    }
}

pub const ZERO_CSV_HEADER: &str = "sample_id,time,re,im,disk_radius,method,residual";

/// Writes zero sets as CSV rows, one per zero; `sets` pairs each set with
/// its sample id.
pub fn write_zero_csv<W: Write>(out: &mut W, sets: &[(u64, ZeroSet)]) -> Result<()> {
    writeln!(out, "{ZERO_CSV_HEADER}")?;
    for (id, zs) in sets {
        for (z, res) in zs.zeros.iter().zip(&zs.residuals) {
            writeln!(
                out,
                "{id},{},{},{},{},{},{}",
                zs.time, z.re, z.im, zs.disk_radius, zs.method, res
            )?;
        }
    }
    Ok(())
}

/// Scaled coefficients bₙ = aₙ/√n!, built by the running product of 1/√n.
pub fn scaled_coeffs(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut scale = 1.0;
    coeffs
        .iter()
        .enumerate()
        .map(|(n, a)| {
            if n > 0 {
                scale /= (n as f64).sqrt();
            }
            a * scale
        })
        .collect()
}

/// Parlett–Reinsch balancing with powers of two (in place).
fn balance(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].l1_norm();
                    r += m[(i, j)].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn eig_2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// All roots of Σ cₙ wⁿ (ascending coefficients) from the eigenvalues of
/// the balanced companion matrix. Trailing zero coefficients lower the
/// degree; leading zero coefficients become roots at the origin.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let hi = match coeffs.iter().rposition(|c| *c != zero) {
        Some(h) => h,
        None => return Vec::new(),
    };
    let lo = coeffs.iter().position(|c| *c != zero).unwrap();
    let mut roots = vec![zero; lo];
    let p = &coeffs[lo..=hi];
    let deg = p.len() - 1;
    match deg {
        0 => return roots,
        1 => {
            roots.push(-p[0] / p[1]);
            return roots;
        }
        _ => {}
    }
    let lead = p[deg];
    let mut m = DMatrix::<Complex64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -p[i] / lead;
    }
    balance(&mut m);
    let (_, t) = m.schur().unpack();
    let mut i = 0;
    while i < deg {
        if i + 1 < deg && t[(i + 1, i)].norm() > 0.0 {
            let (x, y) = eig_2x2(t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            roots.push(x);
            roots.push(y);
            i += 2;
        } else {
            roots.push(t[(i, i)]);
            i += 1;
        }
    }
    roots
}

fn newton_polish<F: Analytic + ?Sized>(f: &F, z0: Complex64) -> (Complex64, bool) {
    let mut z = z0;
    let mut best = f.value(z).norm();
    let mut moved = false;
    for _ in 0..12 {
        let (v, d) = f.value_and_derivative(z);
        if v.norm() == 0.0 || d.norm() == 0.0 {
            break;
        }
        let step = v / d;
        let cand = z - step;
        let r = f.value(cand).norm();
        if !(r < best) && step.norm() > 1e-15 * z.norm().max(1e-300) {
            break;
        }
        if r <= best {
            z = cand;
            best = r;
            moved = true;
        }
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1e-300) {
            break;
        }
    }
    (z, moved)
}

/// Merges zeros closer than `tol`; the merged representative is repeated
/// with its multiplicity so that counts stay comparable.
fn merge_close(mut zeros: Vec<Complex64>, tol: f64) -> Vec<Complex64> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    zeros.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    for z in zeros {
        if let Some(slot) = out.iter_mut().find(|(c, _)| (*c - z).norm() < tol) {
            let (c, k) = *slot;
            *slot = ((c * k as f64 + z) / (k + 1) as f64, k + 1);
        } else {
            out.push((z, 1));
        }
    }
    out.into_iter()
        .flat_map(|(z, k)| std::iter::repeat_n(z, k))
        .collect()
}

/// Candidate zeros of the truncated polynomial near D_R, polished.
fn candidate_zeros(s: &GafSnapshot, radius: f64) -> (Vec<Complex64>, bool) {
    // scaling z = ρw puts the disk of interest on |w| ≤ 1
    let rho = s.valid_radius();
    let b = scaled_coeffs(s.coeffs());
    let mut pow = 1.0;
    let scaled: Vec<Complex64> = b
        .iter()
        .map(|c| {
            let v = c * pow;
            pow *= rho;
            v
        })
        .collect();
    let mut any_moved = false;
    let reach = (radius * 1.05).min(s.valid_radius());
    let mut out = Vec::new();
    for w in poly_roots(&scaled) {
        let z = w * rho;
        if !(z.norm() < radius * 1.1) {
            continue;
        }
        let (p, moved) = if z.norm() <= reach { newton_polish(s, z) } else { (z, false) };
        any_moved |= moved;
        out.push(p);
    }
    (merge_close(out, MERGE_DISTANCE * radius), any_moved)
}

/// Zeros of the truncated snapshot inside D_R, cross-checked against the
/// winding count (with radius perturbation on disagreement or contour hits).
pub fn find_zeros(s: &GafSnapshot, radius: f64) -> Result<ZeroSet> {
    if !(radius > 0.0) || radius > s.valid_radius() * (1.0 + 1e-12) {
        return Err(Error::domain(
            "R",
            format!("must lie in (0, {}], got {radius}", s.valid_radius()),
        ));
    }
    let (candidates, moved) = candidate_zeros(s, radius);
    let method = if moved {
        ZeroMethod::CompanionNewton
    } else {
        ZeroMethod::Companion
    };
    let mut mismatch = None;
    for r in perturbed_radii(radius, s.valid_radius()) {
        let winding = match count_zeros_winding(s, r) {
            Ok(k) => k,
            Err(Error::ZeroNearContour { .. }) => continue,
            Err(e) => return Err(e),
        };
        let inside: Vec<Complex64> = candidates.iter().copied().filter(|z| z.norm() < r).collect();
        if inside.len() as i64 == winding {
            let residuals: Vec<f64> = inside.iter().map(|z| s.value(*z).norm()).collect();
            let max_residual = residuals.iter().copied().fold(0.0, f64::max);
            return Ok(ZeroSet {
                time: s.time(),
                disk_radius: r,
                zeros: inside,
                residuals,
                method,
                max_residual,
                count_check: winding,
            });
        }
        mismatch = Some((inside.len(), winding));
    }
    match mismatch {
        Some((eigen, winding)) => Err(Error::CountMismatch {
            radius,
            eigen,
            winding,
        }),
        None => Err(Error::ZeroNearContour {
            radius,
            nodes: WINDING_MAX_NODES,
        }),
    }
}

/// Residual tolerance for a reported zero: 10⁻⁹·√Var f(z).
pub fn residual_tolerance(z: Complex64) -> f64 {
    1e-9 * variance_at(z.norm()).sqrt()
}

/// (1/2π)∫₀^{2π} log|f(re^{iα})| dα by trapezoid quadrature with node
/// doubling until successive levels agree to 10⁻⁹.
pub fn log_modulus_mean<F: Analytic + ?Sized>(f: &F, r: f64) -> Result<f64> {
    let sample = |theta: f64| f.value(Complex64::from_polar(r, theta)).norm().ln();
    let mut n = JENSEN_START_NODES;
    let mut sum: f64 = (0..n).map(|j| sample(2.0 * PI * j as f64 / n as f64)).sum();
    let mut prev = sum / n as f64;
    while n < JENSEN_MAX_NODES {
        sum += (0..n)
            .map(|j| sample(2.0 * PI * (2 * j + 1) as f64 / (2 * n) as f64))
            .sum::<f64>();
        n *= 2;
        let cur = sum / n as f64;
        if !cur.is_finite() {
            return Err(Error::ZeroNearContour { radius: r, nodes: n });
        }
        if (cur - prev).abs() < JENSEN_TOL {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::ZeroNearContour {
        radius: r,
        nodes: JENSEN_MAX_NODES,
    })
}

/// |log|f(0)| − ((1/2π)∫ log|f(re^{iα})| dα + Σ_{|z|<r} log(|z|/r))|.
pub fn jensen_residual(s: &GafSnapshot, r: f64) -> Result<f64> {
    let a0 = s.coeffs()[0];
    if a0.norm() == 0.0 {
        return Err(Error::Degenerate("a0 = 0, log|f(0)| undefined".into()));
    }
    let lhs = a0.norm().ln();
    let mut last = None;
    for rr in perturbed_radii(r, s.valid_radius()) {
        let zs = match find_zeros(s, rr) {
            Ok(zs) => zs,
            Err(e @ (Error::ZeroNearContour { .. } | Error::CountMismatch { .. })) => {
                last = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let rr = zs.disk_radius;
        if zs.zeros.iter().any(|z| (z.norm() - rr).abs() < RADIUS_PERTURBATION * rr) {
            last = Some(Error::ZeroNearContour { radius: rr, nodes: 0 });
            continue;
        }
        let mean = log_modulus_mean(s, rr)?;
        let sum: f64 = zs.zeros.iter().map(|z| (z.norm() / rr).ln()).sum();
        return Ok((lhs - (mean + sum)).abs());
    }
    Err(last.unwrap_or(Error::ZeroNearContour { radius: r, nodes: 0 }))
}

/// Finite-radius estimate exp[(r² − γ)/2]·Π_{|z|<r}(|z|/r) of |f(0)|.
///
/// This differs from |f(0)| by the boundary fluctuation term, which
/// shrinks as r grows; with no zeros the estimate is just e^{(r²−γ)/2}.
pub fn reconstruct_modulus(zs: &ZeroSet, r: f64) -> f64 {
    let mut log_est = 0.5 * (r * r - EULER_GAMMA);
    for z in zs.zeros.iter().filter(|z| z.norm() < r) {
        if z.norm() == 0.0 {
            return 0.0;
        }
        log_est += (z.norm() / r).ln();
    }
    log_est.exp()
}

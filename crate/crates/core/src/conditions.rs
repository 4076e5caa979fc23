//! Deterministic sufficient conditions on the coefficients that force a
//! hole (no zeros in D_R) or overcrowding (at least N zeros in D_R), and
//! samplers for coefficient paths that satisfy them.
//!
//! Hole box at radius R, with L = R² + log(48R²):
//!   |a₀| ≥ 1 + e^{L/4};  |a_k| ≤ e^{−L/4} for 1 ≤ k ≤ 48R²;  |a_k| ≤ 2^k beyond.
//! Overcrowding box with B = (e^{R²} N·N!)^{1/4}:
//!   |a_k| < R^N/B for k < N;  |a_N| ≥ 2B;  |a_k| < 2^{k−N} for k > N.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gaf::{GafEvolution, GafSnapshot, CHECKER_TAIL_MARGIN};
use crate::ou::{sample_stationary, time_grid, transition_factors};
use crate::rng::RngStream;

/// Rejection attempts per coefficient path before giving up.
pub const MAX_REJECTION_TRIES: usize = 100_000;

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Thresholds of the hole box at radius R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleBox {
    pub radius: f64,
    /// last index k with k ≤ 48R²
    pub inner_last: usize,
    /// lower bound on |a₀|
    pub a0_min: f64,
    /// upper bound on |a_k|, 1 ≤ k ≤ 48R²
    pub inner_max: f64,
}

impl HoleBox {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain("R", format!("must be > 0, got {radius}")));
        }
        let r2 = radius * radius;
        let l = r2 + (48.0 * r2).ln();
        Ok(HoleBox {
            radius,
            inner_last: (48.0 * r2).floor() as usize,
            a0_min: 1.0 + (l / 4.0).exp(),
            inner_max: (-l / 4.0).exp(),
        })
    }

    /// Degree a snapshot needs before the checker will look at it.
    pub fn min_degree(&self) -> usize {
        (48.0 * self.radius * self.radius).ceil() as usize + CHECKER_TAIL_MARGIN
    }

    /// ln of the bound on |a_k|, k ≥ 1.
    fn ln_bound(&self, k: usize) -> f64 {
        if k <= self.inner_last {
            self.inner_max.ln()
        } else {
            k as f64 * std::f64::consts::LN_2
        }
    }

    pub fn contains(&self, coeffs: &[Complex64]) -> bool {
        if coeffs.is_empty() || !(coeffs[0].norm() >= self.a0_min) {
            return false;
        }
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .all(|(k, a)| a.norm() == 0.0 || a.norm().ln() <= self.ln_bound(k))
    }
}

/// Thresholds of the overcrowding box at radius R with N zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrowdBox {
    pub radius: f64,
    pub n: usize,
    /// ln B, B = (e^{R²} N·N!)^{1/4}
    pub ln_b: f64,
}

impl CrowdBox {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain("R", format!("must be > 0, got {radius}")));
        }
        // the geometric tail bound needs 2R/√(N+1) ≤ 1/2
        if n == 0 || ((n + 1) as f64) < 16.0 * radius * radius {
            return Err(Error::domain(
                "N",
                format!("need N >= 1 and N + 1 >= 16R² = {}, got {n}", 16.0 * radius * radius),
            ));
        }
        let ln_b = (radius * radius + (n as f64).ln() + ln_factorial(n)) / 4.0;
        Ok(CrowdBox { radius, n, ln_b })
    }

    pub fn min_degree(&self) -> usize {
        self.n + (4.0 * self.radius * self.radius).ceil() as usize + CHECKER_TAIL_MARGIN
    }

    /// Upper bound on |a_k| for k < N.
    pub fn head_max(&self) -> f64 {
        (self.n as f64 * self.radius.ln() - self.ln_b).exp()
    }

    /// Lower bound on |a_N|.
    pub fn lead_min(&self) -> f64 {
        2.0 * self.ln_b.exp()
    }

    pub fn contains(&self, coeffs: &[Complex64]) -> bool {
        if coeffs.len() <= self.n {
            return false;
        }
        let ln_head = self.n as f64 * self.radius.ln() - self.ln_b;
        coeffs.iter().enumerate().all(|(k, a)| {
            let m = a.norm();
            if k < self.n {
                m == 0.0 || m.ln() < ln_head
            } else if k == self.n {
                m.ln() >= std::f64::consts::LN_2 + self.ln_b
            } else {
                m == 0.0 || m.ln() < (k - self.n) as f64 * std::f64::consts::LN_2
            }
        })
    }
}

fn check_degree(path: &GafEvolution, need: usize) -> Result<()> {
    if path.trunc_degree() < need {
        return Err(Error::domain(
            "trunc_degree",
            format!("checker needs degree >= {need}, snapshot has {}", path.trunc_degree()),
        ));
    }
    Ok(())
}

/// True iff the hole box holds at every snapshot of `path`.
pub fn check_hole_conditions(path: &GafEvolution, radius: f64) -> Result<bool> {
    let b = HoleBox::new(radius)?;
    check_degree(path, b.min_degree())?;
    Ok(path.snapshots().iter().all(|s| b.contains(s.coeffs())))
}

/// True iff the overcrowding box holds at every snapshot of `path`.
pub fn check_crowd_conditions(path: &GafEvolution, radius: f64, n: usize) -> Result<bool> {
    let b = CrowdBox::new(radius, n)?;
    check_degree(path, b.min_degree())?;
    Ok(path.snapshots().iter().all(|s| b.contains(s.coeffs())))
}

/// Scalar constraint on |a(t)| along a path.
#[derive(Debug, Clone, Copy)]
enum Constraint {
    /// |a| ≤ bound
    Below(f64),
    /// |a| < bound
    StrictlyBelow(f64),
    /// |a| ≥ bound
    Above(f64),
}

/// OU path on `grid` constrained to a box: the path is `scale·U(t)` with U a
/// stationary OU path accepted by rejection only if it stays in the
/// normalised box at every grid time. When the box is reachable by the raw
/// process (scale ≥ 1 for upper bounds) the scale is 1.
fn constrained_path<R: Rng + ?Sized>(
    c: Constraint,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let (scale, ok): (f64, fn(f64) -> bool) = match c {
        Constraint::Below(b) => (b.min(1.0), |m| m <= 1.0),
        Constraint::StrictlyBelow(b) => (b.min(1.0), |m| m < 1.0),
        Constraint::Above(b) => (b, |m| m >= 1.0),
    };
    let unit = match c {
        Constraint::Below(b) | Constraint::StrictlyBelow(b) => b / scale,
        Constraint::Above(_) => 1.0,
    };
    let mut path = Vec::with_capacity(grid.len());
    'outer: for _ in 0..MAX_REJECTION_TRIES {
        path.clear();
        let mut u = sample_stationary(rng);
        for k in 0..grid.len() {
            if k > 0 {
                let (decay, noise) = transition_factors(grid[k] - grid[k - 1]);
                u = u * decay + sample_stationary(rng) * noise;
            }
            if !ok(u.norm() / unit) {
                continue 'outer;
            }
            path.push(u * scale);
        }
        return Ok(path);
    }
    Err(Error::Insufficient(format!(
        "no path accepted in {MAX_REJECTION_TRIES} tries for {c:?}"
    )))
}

fn assemble(
    columns: Vec<Vec<Complex64>>,
    grid: &[f64],
    valid_radius: f64,
    delta: f64,
) -> Result<GafEvolution> {
    let snapshots = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| GafSnapshot::from_coeffs(columns.iter().map(|col| col[i]).collect(), valid_radius, t))
        .collect::<Result<Vec<_>>>()?;
    GafEvolution::from_snapshots(snapshots, delta)
}

/// Coefficient path of degree `degree` that stays inside the hole box at
/// radius R on the δ-grid of [0, T]. Coefficient k uses `stream.child(k)`.
pub fn sample_hole_conditioned_path(
    radius: f64,
    horizon: f64,
    delta: f64,
    degree: usize,
    valid_radius: f64,
    stream: &RngStream,
) -> Result<GafEvolution> {
    let b = HoleBox::new(radius)?;
    let grid = time_grid(horizon, delta)?;
    let columns = (0..=degree)
        .map(|k| {
            let c = if k == 0 {
                Constraint::Above(b.a0_min)
            } else if k <= b.inner_last {
                Constraint::Below(b.inner_max)
            } else {
                Constraint::Below(2f64.powi(k.min(1000) as i32))
            };
            constrained_path(c, &grid, &mut stream.child(k as u32).rng())
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(columns, &grid, valid_radius, delta)
}

/// Coefficient path that stays inside the overcrowding box.
pub fn sample_crowd_conditioned_path(
    radius: f64,
    n: usize,
    horizon: f64,
    delta: f64,
    degree: usize,
    valid_radius: f64,
    stream: &RngStream,
) -> Result<GafEvolution> {
    let b = CrowdBox::new(radius, n)?;
    if degree <= n {
        return Err(Error::domain("degree", "must exceed N"));
    }
    let grid = time_grid(horizon, delta)?;
    let columns = (0..=degree)
        .map(|k| {
            let c = if k < n {
                Constraint::StrictlyBelow(b.head_max())
            } else if k == n {
                Constraint::Above(b.lead_min())
            } else {
                Constraint::StrictlyBelow(2f64.powi((k - n).min(1000) as i32))
            };
            constrained_path(c, &grid, &mut stream.child(k as u32).rng())
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(columns, &grid, valid_radius, delta)
}

/// Constant-in-time path repeating `coeffs` on the δ-grid of [0, T].
pub fn frozen_path(coeffs: Vec<Complex64>, horizon: f64, delta: f64, valid_radius: f64) -> Result<GafEvolution> {
    let grid = time_grid(horizon, delta)?;
    let snapshots = grid
        .iter()
        .map(|&t| GafSnapshot::from_coeffs(coeffs.clone(), valid_radius, t))
        .collect::<Result<Vec<_>>>()?;
    GafEvolution::from_snapshots(snapshots, delta)
}

/// Coefficients on the hole box boundary (|a₀| exact, upper bounds shaved
/// by one part in 10¹² to absorb rounding in the phase factors), with every
/// term of f − a₀ pointing against a₀ at z = R e^{iθ}.
pub fn hole_boundary_fixture(radius: f64, degree: usize, theta: f64) -> Result<Vec<Complex64>> {
    let b = HoleBox::new(radius)?;
    let shave = 1.0 - 1e-12;
    Ok((0..=degree)
        .map(|k| {
            if k == 0 {
                Complex64::new(b.a0_min, 0.0)
            } else {
                let m = shave * if k <= b.inner_last { b.inner_max } else { 2f64.powi(k.min(1000) as i32) };
                -Complex64::from_polar(m, -(k as f64) * theta)
            }
        })
        .collect())
}

/// Coefficients on the overcrowding box boundary (strict bounds shaved by
/// one part in 10¹²), with every other term opposing a_N z^N at z = R e^{iθ}.
pub fn crowd_boundary_fixture(radius: f64, n: usize, degree: usize, theta: f64) -> Result<Vec<Complex64>> {
    let b = CrowdBox::new(radius, n)?;
    let shave = 1.0 - 1e-12;
    Ok((0..=degree)
        .map(|k| {
            let phase = -(k as f64 - n as f64) * theta;
            if k == n {
                Complex64::new(b.lead_min(), 0.0)
            } else if k < n {
                -Complex64::from_polar(b.head_max() * shave, phase)
            } else {
                -Complex64::from_polar(2f64.powi((k - n).min(1000) as i32) * shave, phase)
            }
        })
        .collect())
}

//! Truncated snapshots of the planar GAF f(z,t) = Σ aₙ(t) zⁿ/√n!.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ou::{ou_transition, sample_stationary, time_grid, transition_factors, OuState};
use crate::rng::RngStream;

/// Default bound on the standard deviation of the truncation tail.
pub const DEFAULT_TAIL_EPS: f64 = 1e-8;

/// Extra degrees kept above ⌈48R²⌉ when the sufficient-condition checkers
/// will inspect a snapshot.
pub const CHECKER_TAIL_MARGIN: usize = 16;

const RADIUS_SLACK: f64 = 1e-12;

/// Something analytic we can evaluate together with its derivative.
pub trait Analytic {
    fn value_and_derivative(&self, z: Complex64) -> (Complex64, Complex64);

    fn value(&self, z: Complex64) -> Complex64 {
        self.value_and_derivative(z).0
    }
}

/// Adapter for closures returning (f(z), f′(z)).
pub struct FnAnalytic<F>(pub F);

impl<F: Fn(Complex64) -> (Complex64, Complex64)> Analytic for FnAnalytic<F> {
    fn value_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        (self.0)(z)
    }
}

fn inv_sqrt_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(4096);
        t.push(1.0);
        t.extend((1..4096).map(|n| 1.0 / (n as f64).sqrt()));
        t
    })
}

#[inline]
fn inv_sqrt(n: usize) -> f64 {
    let t = inv_sqrt_table();
    if n < t.len() {
        t[n]
    } else {
        1.0 / (n as f64).sqrt()
    }
}

/// Terms R^{2k}/k! for k = 0..len, built by the ratio recurrence.
fn poisson_weights(r2: f64, len: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(len);
    let mut term = 1.0;
    for k in 0..len {
        if k > 0 {
            term *= r2 / k as f64;
        }
        w.push(term);
    }
    w
}

/// Σ_{k>M} R^{2k}/k!, i.e. e^{R²}·P(Poisson(R²) > M): the variance of the
/// dropped tail at |z| = R.
pub fn tail_variance(radius: f64, degree: usize) -> f64 {
    let r2 = radius * radius;
    // the terms are decreasing past k = R², so summing far enough past
    // both R² and M captures everything representable
    let upper = degree.max(r2.ceil() as usize) + 64 + (8.0 * r2.sqrt()) as usize * 4;
    let w = poisson_weights(r2, upper + 1);
    w[degree + 1..].iter().rev().sum()
}

/// Smallest M whose truncation tail has standard deviation below `eps`
/// on |z| ≤ R, and at least ⌈R²⌉.
pub fn truncation_degree(radius: f64, eps: f64) -> Result<usize> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::domain("R", format!("must be > 0, got {radius}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain("eps", format!("must lie in (0,1), got {eps}")));
    }
    let r2 = radius * radius;
    let target = eps * eps;
    let upper = r2.ceil() as usize + 64 + (8.0 * radius) as usize * 8;
    let w = poisson_weights(r2, upper + 2);
    // suffix[m] = Σ_{k ≥ m} w[k], summed smallest-first
    let mut suffix = vec![0.0; w.len() + 1];
    for k in (0..w.len()).rev() {
        suffix[k] = suffix[k + 1] + w[k];
    }
    let modal = r2.ceil() as usize;
    let m = (0..w.len() - 1)
        .find(|&m| suffix[m + 1] < target)
        .ok_or_else(|| Error::domain("R", format!("radius {radius} too large for tail search")))?;
    Ok(m.max(modal))
}

/// Truncation degree suitable for the hole/overcrowding condition checkers
/// at radius R: the tail rule plus M ≥ ⌈48R²⌉ + margin.
pub fn checker_truncation_degree(radius: f64, eps: f64) -> Result<usize> {
    let base = truncation_degree(radius, eps)?;
    Ok(base.max((48.0 * radius * radius).ceil() as usize + CHECKER_TAIL_MARGIN))
}

/// Var f(z,t) at |z| = r.
pub fn variance_at(r: f64) -> f64 {
    (r * r).exp()
}

/// Coefficients a₀..a_M of f(·,t) at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GafSnapshot {
    time: f64,
    coeffs: Vec<Complex64>,
    valid_radius: f64,
    tail_eps: f64,
}

impl GafSnapshot {
    /// Wraps explicit coefficients. The vector is zero-padded so that the
    /// degree reaches ⌈R_max²⌉.
    pub fn from_coeffs(mut coeffs: Vec<Complex64>, valid_radius: f64, time: f64) -> Result<Self> {
        if !(valid_radius > 0.0) || !valid_radius.is_finite() {
            return Err(Error::domain("valid_radius", format!("must be > 0, got {valid_radius}")));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("coeffs", "non-finite coefficient"));
        }
        let modal = (valid_radius * valid_radius).ceil() as usize;
        if coeffs.len() < modal + 1 {
            coeffs.resize(modal + 1, Complex64::new(0.0, 0.0));
        }
        let degree = coeffs.len() - 1;
        Ok(GafSnapshot {
            time,
            coeffs,
            valid_radius,
            tail_eps: tail_variance(valid_radius, degree).sqrt(),
        })
    }

    /// Stationary snapshot: coefficients i.i.d. ℂN(0,1).
    pub fn sample(degree: usize, valid_radius: f64, stream: &RngStream, time: f64) -> Result<Self> {
        let mut rng = stream.rng();
        Self::sample_with(degree, valid_radius, &mut rng, time)
    }

    pub fn sample_with<R: Rng + ?Sized>(
        degree: usize,
        valid_radius: f64,
        rng: &mut R,
        time: f64,
    ) -> Result<Self> {
        let coeffs = (0..=degree).map(|_| sample_stationary(rng)).collect();
        Self::from_coeffs(coeffs, valid_radius, time)
    }

    /// Stationary snapshot with degree chosen by [`truncation_degree`].
    pub fn sample_for_radius(radius: f64, eps: f64, stream: &RngStream, time: f64) -> Result<Self> {
        let m = truncation_degree(radius, eps)?;
        Self::sample(m, radius, stream, time)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn trunc_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn valid_radius(&self) -> f64 {
        self.valid_radius
    }

    pub fn tail_eps(&self) -> f64 {
        self.tail_eps
    }

    fn check_radius(&self, z: Complex64) -> Result<()> {
        if z.norm() > self.valid_radius * (1.0 + RADIUS_SLACK) {
            return Err(Error::domain(
                "z",
                format!("|z| = {} exceeds valid radius {}", z.norm(), self.valid_radius),
            ));
        }
        Ok(())
    }

    /// f(z) by the term recurrence termₙ₊₁ = termₙ·z/√(n+1).
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_radius(z)?;
        Ok(self.eval_unchecked(z))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for (n, a) in self.coeffs.iter().enumerate() {
            sum += a * term;
            term *= z * inv_sqrt(n + 1);
        }
        sum
    }

    /// f(z) and f′(z) of the truncated series.
    pub fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        self.check_radius(z)?;
        Ok(self.value_and_derivative(z))
    }

    /// Exact evolution by `dt`: every coefficient takes an OU step driven by
    /// its own sub-stream `stream.child(n)`.
    pub fn evolve(&self, dt: f64, stream: &RngStream) -> Result<GafSnapshot> {
        let mut next = self.clone();
        if dt < 0.0 || !dt.is_finite() {
            return Err(Error::domain("dt", format!("must be finite and >= 0, got {dt}")));
        }
        for (n, c) in next.coeffs.iter_mut().enumerate() {
            let mut rng = stream.child(n as u32).rng();
            *c = ou_transition(OuState::new(*c, self.time), dt, &mut rng)?.value;
        }
        next.time = self.time + dt;
        Ok(next)
    }

    /// In-place exact evolution drawing all innovations from one generator,
    /// in coefficient order. Used on hot paths where one stream per
    /// replicate is enough.
    pub fn evolve_in_place<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<()> {
        if dt < 0.0 || !dt.is_finite() {
            return Err(Error::domain("dt", format!("must be finite and >= 0, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let (decay, noise) = transition_factors(dt);
        for c in self.coeffs.iter_mut() {
            *c = *c * decay + sample_stationary(rng) * noise;
        }
        self.time += dt;
        Ok(())
    }

    /// Σ_{n≥1} |aₙ| Rⁿ/√n!, the sup of |f − a₀| bound on |z| ≤ R.
    pub fn nonconstant_bound(&self, radius: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for (n, a) in self.coeffs.iter().enumerate().skip(1) {
            term *= radius * inv_sqrt(n);
            sum += a.norm() * term;
        }
        sum
    }

    /// Evaluator for e^{−ξ̄z − |ξ|²/2} f(z+ξ), valid for |z| ≤ `radius`.
    pub fn translate(&self, xi: Complex64, radius: f64) -> Result<Translated<'_>> {
        if !(radius >= 0.0) || xi.norm() + radius > self.valid_radius * (1.0 + RADIUS_SLACK) {
            return Err(Error::domain(
                "xi",
                format!(
                    "|xi| + radius = {} exceeds valid radius {}",
                    xi.norm() + radius,
                    self.valid_radius
                ),
            ));
        }
        Ok(Translated {
            snapshot: self,
            xi,
            radius,
        })
    }

    pub fn to_record(&self) -> SnapshotRecord {
        SnapshotRecord {
            time: self.time,
            trunc_degree: self.trunc_degree(),
            valid_radius: self.valid_radius,
            tail_eps: self.tail_eps,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_record(rec: SnapshotRecord) -> Result<Self> {
        if rec.coeffs.len() != rec.trunc_degree + 1 {
            return Err(Error::Format(format!(
                "trunc_degree {} does not match {} coefficients",
                rec.trunc_degree,
                rec.coeffs.len()
            )));
        }
        let coeffs: Vec<Complex64> = rec.coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect();
        let mut s = Self::from_coeffs(coeffs, rec.valid_radius, rec.time)?;
        if s.trunc_degree() != rec.trunc_degree {
            return Err(Error::Format("degree below ⌈valid_radius²⌉".into()));
        }
        s.tail_eps = rec.tail_eps;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }
}

impl Analytic for GafSnapshot {
    #[inline]
    fn value_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut term = Complex64::new(1.0, 0.0);
        let mut f = Complex64::new(0.0, 0.0);
        let mut df = Complex64::new(0.0, 0.0);
        let m = self.coeffs.len();
        for n in 0..m {
            f += self.coeffs[n] * term;
            if n + 1 < m {
                // d/dz a_{n+1} z^{n+1}/√(n+1)! = a_{n+1} √(n+1) zⁿ/√n!
                df += self.coeffs[n + 1] * term * ((n + 1) as f64).sqrt();
            }
            term *= z * inv_sqrt(n + 1);
        }
        (f, df)
    }

    fn value(&self, z: Complex64) -> Complex64 {
        self.eval_unchecked(z)
    }
}

/// Wire form of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub time: f64,
    pub trunc_degree: usize,
    pub valid_radius: f64,
    pub tail_eps: f64,
    pub coeffs: Vec<[f64; 2]>,
}

/// Translated evaluator z ↦ e^{−ξ̄z − |ξ|²/2} f(z+ξ).
#[derive(Debug, Clone, Copy)]
pub struct Translated<'a> {
    snapshot: &'a GafSnapshot,
    xi: Complex64,
    radius: f64,
}

impl Translated<'_> {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn xi(&self) -> Complex64 {
        self.xi
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > self.radius * (1.0 + RADIUS_SLACK) {
            return Err(Error::domain("z", format!("|z| = {} exceeds {}", z.norm(), self.radius)));
        }
        Ok(self.value(z))
    }

    #[inline]
    fn weight(&self, z: Complex64) -> Complex64 {
        (-self.xi.conj() * z - 0.5 * self.xi.norm_sqr()).exp()
    }
}

impl Analytic for Translated<'_> {
    fn value_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let w = self.weight(z);
        let (f, df) = self.snapshot.value_and_derivative(z + self.xi);
        (w * f, w * (df - self.xi.conj() * f))
    }
}

/// Snapshots of one realisation on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GafEvolution {
    snapshots: Vec<GafSnapshot>,
    grid_step: f64,
}

impl GafEvolution {
    pub fn from_snapshots(snapshots: Vec<GafSnapshot>, grid_step: f64) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Insufficient("evolution needs at least one snapshot".into()));
        }
        if !(grid_step > 0.0) {
            return Err(Error::domain("grid_step", format!("must be > 0, got {grid_step}")));
        }
        let first = &snapshots[0];
        for w in snapshots.windows(2) {
            if w[1].trunc_degree() != first.trunc_degree() || w[1].valid_radius != first.valid_radius {
                return Err(Error::domain("snapshots", "degree/radius differ between snapshots"));
            }
            if !(w[1].time > w[0].time) {
                return Err(Error::domain("snapshots", "times must be strictly increasing"));
            }
        }
        Ok(GafEvolution {
            snapshots,
            grid_step,
        })
    }

    /// Evolves `initial` across the δ-grid of [0, T] (times relative to the
    /// initial snapshot). Step `k` uses sub-stream `stream.child(k)`.
    pub fn simulate(initial: GafSnapshot, horizon: f64, delta: f64, stream: &RngStream) -> Result<Self> {
        let grid = time_grid(horizon, delta)?;
        let t0 = initial.time;
        let mut snapshots = Vec::with_capacity(grid.len());
        snapshots.push(initial);
        for (k, w) in grid.windows(2).enumerate() {
            let prev = snapshots.last().unwrap();
            let mut next = prev.evolve(w[1] - w[0], &stream.child(k as u32))?;
            next.time = t0 + w[1];
            snapshots.push(next);
        }
        Ok(GafEvolution {
            snapshots,
            grid_step: delta,
        })
    }

    pub fn snapshots(&self) -> &[GafSnapshot] {
        &self.snapshots
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn trunc_degree(&self) -> usize {
        self.snapshots[0].trunc_degree()
    }
}

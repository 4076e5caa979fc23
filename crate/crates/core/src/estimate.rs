//! Monte Carlo estimation of time-interval hole and overcrowding
//! probabilities, Wilson intervals and log-probability rate fits.
//!
//! Every replicate `i` draws from `stream.child64(i)`, and per-replicate
//! outcomes are collected in index order, so results depend only on
//! (seed, spec, n) and never on the number of worker threads.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaf::{truncation_degree, GafSnapshot, DEFAULT_TAIL_EPS};
use crate::ou::time_grid;
use crate::rng::{RngStream, StreamRng};
use crate::toy::{default_margin, LatticeSpec, ToyModel, ToySimulator, DEFAULT_PERTURB_SCALE};
use crate::zeros::{count_zeros_robust, MAX_RADIUS_RETRIES, RADIUS_PERTURBATION};

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Hole,
    Crowd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Hole => "hole",
            EventKind::Crowd => "crowd",
        })
    }
}

impl FromStr for EventKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hole" => Ok(EventKind::Hole),
            "crowd" => Ok(EventKind::Crowd),
            _ => Err(Error::domain("kind", format!("unknown event kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventModel {
    Gaf,
    PoissonBm,
    PerturbedLattice,
    TriangularCluster,
}

impl EventModel {
    pub fn toy(self) -> Option<ToyModel> {
        match self {
            EventModel::Gaf => None,
            EventModel::PoissonBm => Some(ToyModel::PoissonBm),
            EventModel::PerturbedLattice => Some(ToyModel::PerturbedLattice),
            EventModel::TriangularCluster => Some(ToyModel::TriangularCluster),
        }
    }
}

impl fmt::Display for EventModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.toy() {
            Some(m) => write!(f, "{m}"),
            None => write!(f, "gaf"),
        }
    }
}

impl FromStr for EventModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaf" => Ok(EventModel::Gaf),
            other => Ok(match other.parse::<ToyModel>()? {
                ToyModel::PoissonBm => EventModel::PoissonBm,
                ToyModel::PerturbedLattice => EventModel::PerturbedLattice,
                ToyModel::TriangularCluster => EventModel::TriangularCluster,
            }),
        }
    }
}

fn default_c() -> f64 {
    DEFAULT_PERTURB_SCALE
}

fn default_eps() -> f64 {
    DEFAULT_TAIL_EPS
}

/// Event "D_R has no points (hole) / at least N points (crowd) at every
/// grid time of [0, T]".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "N", default)]
    pub n_points: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "delta")]
    pub grid_step: f64,
    pub model: EventModel,
    /// perturbation scale c of the lattice models
    #[serde(default = "default_c")]
    pub perturb_scale: f64,
    /// truncation tail bound for the GAF
    #[serde(default = "default_eps")]
    pub eps_tail: f64,
}

impl EventSpec {
    pub fn hole(model: EventModel, radius: f64, horizon: f64, grid_step: f64) -> Self {
        EventSpec {
            kind: EventKind::Hole,
            radius,
            n_points: 0,
            horizon,
            grid_step,
            model,
            perturb_scale: DEFAULT_PERTURB_SCALE,
            eps_tail: DEFAULT_TAIL_EPS,
        }
    }

    pub fn crowd(model: EventModel, radius: f64, n_points: usize, horizon: f64, grid_step: f64) -> Self {
        EventSpec {
            kind: EventKind::Crowd,
            n_points,
            ..Self::hole(model, radius, horizon, grid_step)
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        EventSpec {
            horizon,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::domain("R", format!("must be > 0, got {}", self.radius)));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain("T", format!("must be >= 0, got {}", self.horizon)));
        }
        if !(self.grid_step > 0.0) || !self.grid_step.is_finite() {
            return Err(Error::domain("delta", format!("must be > 0, got {}", self.grid_step)));
        }
        if !(self.eps_tail > 0.0 && self.eps_tail < 1.0) {
            return Err(Error::domain("eps_tail", format!("must lie in (0,1), got {}", self.eps_tail)));
        }
        if self.model != EventModel::Gaf && self.model != EventModel::PoissonBm && !(self.perturb_scale >= 0.0) {
            return Err(Error::domain("c", format!("must be >= 0, got {}", self.perturb_scale)));
        }
        Ok(())
    }

    /// Crowd events with N = 0 hold trivially.
    fn is_trivial(&self) -> bool {
        self.kind == EventKind::Crowd && self.n_points == 0
    }
}

/// Wilson score interval at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0).min(p) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0).max(p) };
    (lo, hi)
}

/// Binomial standard error √(p(1−p)/n) of a proportion.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Result of one Monte Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub spec: EventSpec,
    pub n_samples: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci: [f64; 2],
    /// log p̂, or log of the upper CI bound when no replicate succeeded
    pub log_p_hat: f64,
    /// true when `log_p_hat` is only an upper bound
    #[serde(default)]
    pub one_sided: bool,
    pub seed_root: u64,
    pub delta: f64,
    pub software_version: String,
}

impl EstimatorReport {
    pub fn from_counts(spec: EventSpec, successes: u64, n_samples: u64, seed_root: u64) -> Self {
        let p_hat = if n_samples == 0 {
            0.0
        } else {
            successes as f64 / n_samples as f64
        };
        let (lo, hi) = wilson_interval(successes, n_samples, Z95);
        let one_sided = successes == 0;
        let log_p_hat = if one_sided { hi.ln() } else { p_hat.ln() };
        EstimatorReport {
            delta: spec.grid_step,
            spec,
            n_samples,
            successes,
            p_hat,
            ci: [lo, hi],
            log_p_hat,
            one_sided,
            seed_root,
            software_version: SOFTWARE_VERSION.to_string(),
        }
    }

    pub fn ci_low(&self) -> f64 {
        self.ci[0]
    }

    pub fn ci_high(&self) -> f64 {
        self.ci[1]
    }

    pub fn sigma(&self) -> f64 {
        binomial_sigma(self.p_hat, self.n_samples.max(1))
    }

    /// Pools two reports over disjoint replicate ranges of the same campaign.
    pub fn merge(&self, other: &EstimatorReport) -> Result<EstimatorReport> {
        if self.spec != other.spec || self.seed_root != other.seed_root {
            return Err(Error::domain("spec", "reports from different campaigns cannot be merged"));
        }
        Ok(EstimatorReport::from_counts(
            self.spec.clone(),
            self.successes + other.successes,
            self.n_samples + other.n_samples,
            self.seed_root,
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Simulates replicates and reports, for each, the index of the first grid
/// time at which the event fails (`None` if it holds on the whole grid).
struct Replicator {
    spec: EventSpec,
    grid: Vec<f64>,
    gaf_degree: usize,
    gaf_radius: f64,
    lattice: Option<LatticeSpec>,
}

impl Replicator {
    fn new(spec: &EventSpec, horizon: f64) -> Result<Self> {
        spec.validate()?;
        let grid = time_grid(horizon, spec.grid_step)?;
        // room for the radius-perturbation retries of the winding count
        let gaf_radius = spec.radius * (1.0 + (MAX_RADIUS_RETRIES as f64 + 1.0) * RADIUS_PERTURBATION);
        let gaf_degree = match spec.model {
            EventModel::Gaf => truncation_degree(gaf_radius, spec.eps_tail)?,
            _ => 0,
        };
        let lattice = spec.model.toy().map(|m| {
            let c = spec.perturb_scale;
            LatticeSpec {
                model: m,
                perturb_scale: c,
                window_radius: spec.radius,
                margin: default_margin(m, c, spec.radius, horizon, spec.grid_step),
                grid_step: spec.grid_step,
                horizon,
                independent_drivers: false,
            }
        });
        Ok(Replicator {
            spec: spec.clone(),
            grid,
            gaf_degree,
            gaf_radius,
            lattice,
        })
    }

    fn holds(&self, count: usize) -> bool {
        match self.spec.kind {
            EventKind::Hole => count == 0,
            EventKind::Crowd => count >= self.spec.n_points,
        }
    }

    fn gaf_holds(&self, s: &GafSnapshot) -> Result<bool> {
        let r = self.spec.radius;
        if self.spec.kind == EventKind::Hole && s.coeffs()[0].norm() > s.nonconstant_bound(r) {
            // |a₀| > sup_{D_R} |f − a₀| certifies an empty disk
            return Ok(true);
        }
        let (k, _) = count_zeros_robust(s, r, self.gaf_radius)?;
        Ok(self.holds(k.max(0) as usize))
    }

    fn first_failure(&self, stream: &RngStream) -> Result<Option<usize>> {
        if self.spec.is_trivial() {
            return Ok(None);
        }
        let mut rng: StreamRng = stream.rng();
        match &self.lattice {
            None => {
                let mut s = GafSnapshot::sample_with(self.gaf_degree, self.gaf_radius, &mut rng, 0.0)?;
                for (i, &t) in self.grid.iter().enumerate() {
                    if i > 0 {
                        s.evolve_in_place(t - self.grid[i - 1], &mut rng)?;
                    }
                    if !self.gaf_holds(&s)? {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            }
            Some(ls) => {
                let mut sim = ToySimulator::new(ls, stream)?;
                for (i, &t) in self.grid.iter().enumerate() {
                    if i > 0 {
                        sim.step(t - self.grid[i - 1]);
                    }
                    if !self.holds(sim.count_within(self.spec.radius)) {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            }
        }
    }

    fn run(&self, range: Range<u64>, stream: &RngStream) -> Result<Vec<Option<usize>>> {
        range
            .into_par_iter()
            .map(|i| self.first_failure(&stream.child64(i)))
            .collect()
    }
}

/// Estimates P(event) with `n` replicates.
pub fn estimate_event(spec: &EventSpec, n: u64, stream: &RngStream) -> Result<EstimatorReport> {
    if n == 0 {
        return Err(Error::domain("n", "need at least one replicate"));
    }
    estimate_range(spec, 0..n, stream)
}

/// Estimate over the replicate index range `range`; reports over disjoint
/// ranges merge into the report of their union.
pub fn estimate_range(spec: &EventSpec, range: Range<u64>, stream: &RngStream) -> Result<EstimatorReport> {
    let rep = Replicator::new(spec, spec.horizon)?;
    let n = range.end - range.start;
    let outcomes = rep.run(range, stream)?;
    let successes = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    Ok(EstimatorReport::from_counts(spec.clone(), successes, n, stream.root_seed()))
}

fn grid_index(grid: &[f64], t: f64, delta: f64) -> Result<usize> {
    grid.iter()
        .position(|&g| (g - t).abs() <= 1e-9 * delta.max(t))
        .ok_or_else(|| Error::domain("T", format!("T = {t} is not on the δ-grid")))
}

/// One set of replicates simulated to the largest horizon, read off at
/// every requested T (each T must be a multiple of δ). Returns one report
/// per horizon, in the given order.
pub fn estimate_sweep(
    spec: &EventSpec,
    horizons: &[f64],
    n: u64,
    stream: &RngStream,
) -> Result<Vec<EstimatorReport>> {
    sweep_range(spec, horizons, 0..n, stream)
}

fn sweep_range(
    spec: &EventSpec,
    horizons: &[f64],
    range: Range<u64>,
    stream: &RngStream,
) -> Result<Vec<EstimatorReport>> {
    let t_max = horizons
        .iter()
        .copied()
        .fold(f64::NAN, f64::max);
    if horizons.is_empty() || !t_max.is_finite() {
        return Err(Error::Insufficient("empty horizon list".into()));
    }
    let rep = Replicator::new(&spec.with_horizon(t_max), t_max)?;
    let idx: Vec<usize> = horizons
        .iter()
        .map(|&t| grid_index(&rep.grid, t, spec.grid_step))
        .collect::<Result<_>>()?;
    let n = range.end - range.start;
    let outcomes = rep.run(range, stream)?;
    Ok(horizons
        .iter()
        .zip(&idx)
        .map(|(&t, &k)| {
            let successes = outcomes.iter().filter(|o| o.is_none_or(|f| f > k)).count() as u64;
            EstimatorReport::from_counts(spec.with_horizon(t), successes, n, stream.root_seed())
        })
        .collect())
}

/// Sweep whose replicate count doubles (from `start_n`, capped at `max_n`)
/// until every horizon has at least `min_successes` successes. Replicate
/// indices are reused across rounds, so the result is deterministic.
pub fn estimate_sweep_adaptive(
    spec: &EventSpec,
    horizons: &[f64],
    min_successes: u64,
    start_n: u64,
    max_n: u64,
    stream: &RngStream,
) -> Result<Vec<EstimatorReport>> {
    let mut done = 0u64;
    let mut next = start_n.max(1).min(max_n);
    let mut acc: Option<Vec<EstimatorReport>> = None;
    loop {
        let part = sweep_range(spec, horizons, done..next, stream)?;
        acc = Some(match acc {
            None => part,
            Some(prev) => prev
                .iter()
                .zip(&part)
                .map(|(a, b)| a.merge(b))
                .collect::<Result<_>>()?,
        });
        done = next;
        let reports = acc.as_ref().unwrap();
        if reports.iter().all(|r| r.successes >= min_successes) || done >= max_n {
            return Ok(acc.unwrap());
        }
        next = (done * 2).min(max_n);
    }
}

/// Least-squares line through (T, log p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    #[serde(rename = "T_values")]
    pub t_values: Vec<f64>,
    pub log_p: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    /// Decay rate λ̂ = −slope.
    pub fn rate(&self) -> f64 {
        -self.slope
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

/// Ordinary least squares of `log_p` on `t_values`.
pub fn fit_points(t_values: &[f64], log_p: &[f64]) -> Result<RateFit> {
    if t_values.len() != log_p.len() {
        return Err(Error::domain("log_p", "length differs from T_values"));
    }
    if t_values.len() < 3 {
        return Err(Error::Insufficient(format!(
            "rate fit needs >= 3 points, got {}",
            t_values.len()
        )));
    }
    if log_p.iter().chain(t_values).any(|v| !v.is_finite()) {
        return Err(Error::domain("log_p", "non-finite value"));
    }
    let n = t_values.len() as f64;
    let mt = t_values.iter().sum::<f64>() / n;
    let my = log_p.iter().sum::<f64>() / n;
    let sxx: f64 = t_values.iter().map(|t| (t - mt) * (t - mt)).sum();
    let sxy: f64 = t_values.iter().zip(log_p).map(|(t, y)| (t - mt) * (y - my)).sum();
    let syy: f64 = log_p.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient("all T values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let sse: f64 = t_values
        .iter()
        .zip(log_p)
        .map(|(t, y)| {
            let e = y - (intercept + slope * t);
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(RateFit {
        t_values: t_values.to_vec(),
        log_p: log_p.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// Rate fit over reports that differ only in T.
pub fn fit_rate(reports: &[EstimatorReport]) -> Result<RateFit> {
    if reports.len() < 3 {
        return Err(Error::Insufficient(format!(
            "rate fit needs >= 3 reports, got {}",
            reports.len()
        )));
    }
    let base = reports[0].spec.with_horizon(0.0);
    for r in reports {
        if r.spec.with_horizon(0.0) != base {
            return Err(Error::domain("spec", "reports differ in more than T"));
        }
        if !(r.p_hat > 0.0) {
            return Err(Error::Insufficient(format!(
                "p_hat = 0 at T = {}; log p undefined",
                r.spec.horizon
            )));
        }
    }
    let t: Vec<f64> = reports.iter().map(|r| r.spec.horizon).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.p_hat.ln()).collect();
    fit_points(&t, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for &(k, n) in &[(0u64, 10u64), (3, 10), (10, 10), (500, 1000), (1, 100000)] {
            let (lo, hi) = wilson_interval(k, n, Z95);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}: [{lo}, {hi}]");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
        // textbook value: 5/10 → [0.2366, 0.7634]
        let (lo, hi) = wilson_interval(5, 10, Z95);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
    }

    #[test]
    fn zero_successes_flagged() {
        let spec = EventSpec::hole(EventModel::PoissonBm, 1.0, 1.0, 0.1);
        let r = EstimatorReport::from_counts(spec, 0, 100, 1);
        assert!(r.one_sided);
        assert_eq!(r.p_hat, 0.0);
        assert_eq!(r.log_p_hat, r.ci_high().ln());
    }

    #[test]
    fn exact_exponential_fit() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = t.iter().map(|t| -3.0 * t).collect();
        let f = fit_points(&t, &y).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_points(&t[..2], &y[..2]).is_err());
    }

    #[test]
    fn trivial_crowd() {
        let spec = EventSpec::crowd(EventModel::Gaf, 1.0, 0, 1.0, 0.1);
        let r = estimate_event(&spec, 50, &RngStream::new(3)).unwrap();
        assert_eq!(r.p_hat, 1.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = EventSpec::hole(EventModel::Gaf, 1.0, 1.0, 0.1);
        spec.grid_step = 0.0;
        assert_eq!(spec.validate().unwrap_err().field(), Some("delta"));
        spec.grid_step = 0.1;
        spec.radius = -1.0;
        assert_eq!(spec.validate().unwrap_err().field(), Some("R"));
    }

    #[test]
    fn sweep_matches_individual_runs() {
        let spec = EventSpec::hole(EventModel::Gaf, 0.5, 1.0, 0.05);
        let stream = RngStream::new(17);
        let sweep = estimate_sweep(&spec, &[0.5, 1.0], 200, &stream).unwrap();
        for r in &sweep {
            let single = estimate_event(&spec.with_horizon(r.spec.horizon), 200, &stream).unwrap();
            assert_eq!(single.successes, r.successes);
        }
        assert!(sweep[0].successes >= sweep[1].successes);
        assert!(estimate_sweep(&spec, &[0.525], 10, &stream).is_ok());
        assert!(estimate_sweep(&spec, &[0.53, 1.0], 10, &stream).is_err());
    }

    #[test]
    fn spec_json_field_names() {
        let spec = EventSpec::crowd(EventModel::PerturbedLattice, 1.5, 3, 2.0, 0.05);
        let v: serde_json::Value = serde_json::to_value(&spec).unwrap();
        for key in ["kind", "R", "N", "T", "delta", "model"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["model"], "perturbed_lattice");
        let back: EventSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
    }
}

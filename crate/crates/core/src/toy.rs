//! Evolving comparison point processes with intensity π⁻¹: Poisson points
//! driven by Brownian motion, the perturbed lattice √π(k+iℓ) + cζ_{k,ℓ}(t)
//! and the triangular cluster √(3π)(k+iℓ) + c e^{2πim/3} ζ_{k,ℓ}(t).

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ou::{bm_increment, sample_stationary, time_grid, transition_factors};
use crate::rng::{RngStream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyModel {
    PoissonBm,
    PerturbedLattice,
    TriangularCluster,
}

impl ToyModel {
    pub fn name(self) -> &'static str {
        match self {
            ToyModel::PoissonBm => "poisson_bm",
            ToyModel::PerturbedLattice => "perturbed_lattice",
            ToyModel::TriangularCluster => "triangular_cluster",
        }
    }
}

impl fmt::Display for ToyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson_bm" => Ok(ToyModel::PoissonBm),
            "perturbed_lattice" => Ok(ToyModel::PerturbedLattice),
            "triangular_cluster" => Ok(ToyModel::TriangularCluster),
            _ => Err(Error::domain("model", format!("unknown toy model `{s}`"))),
        }
    }
}

/// Default perturbation scale.
pub const DEFAULT_PERTURB_SCALE: f64 = 1.0;

/// Parameters of one toy-model simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub model: ToyModel,
    pub perturb_scale: f64,
    pub window_radius: f64,
    pub margin: f64,
    pub grid_step: f64,
    pub horizon: f64,
    /// Triangular cluster only: drive the three satellites of a site by
    /// independent OU processes instead of rotations of one.
    #[serde(default)]
    pub independent_drivers: bool,
}

fn lattice_spacing(model: ToyModel) -> f64 {
    match model {
        ToyModel::TriangularCluster => (3.0 * PI).sqrt(),
        _ => PI.sqrt(),
    }
}

/// Padding around the counting window so that points entering from
/// outside are negligible.
pub fn default_margin(model: ToyModel, c: f64, window_radius: f64, horizon: f64, delta: f64) -> f64 {
    match model {
        ToyModel::PoissonBm => 3.0 * horizon.sqrt() + 3.0,
        _ => {
            let h = lattice_spacing(model);
            let reach = window_radius + 4.0 * c;
            let sites = (PI * reach * reach / (h * h)).max(1.0);
            let steps = (horizon / delta).max(1.0);
            c * (4.0 + (2.0 * (steps * sites).max(1.0).ln()).sqrt()) + h
        }
    }
}

impl LatticeSpec {
    /// Spec with the default margin rule.
    pub fn new(model: ToyModel, c: f64, window_radius: f64, delta: f64, horizon: f64) -> Self {
        LatticeSpec {
            model,
            perturb_scale: c,
            window_radius,
            margin: default_margin(model, c, window_radius, horizon, delta),
            grid_step: delta,
            horizon,
            independent_drivers: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_radius > 0.0) {
            return Err(Error::domain("window_radius", "must be > 0"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::domain("margin", "must be > 0"));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::domain("delta", "must be > 0"));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain("T", "must be finite and >= 0"));
        }
        if self.model != ToyModel::PoissonBm && !(self.perturb_scale >= 0.0) {
            return Err(Error::domain("c", "must be >= 0"));
        }
        Ok(())
    }

    pub fn padded_radius(&self) -> f64 {
        self.window_radius + self.margin
    }
}

/// Labelled points at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub time: f64,
    pub window_radius: f64,
    pub points: Vec<(u64, Complex64)>,
}

impl PointConfiguration {
    pub fn empty(time: f64, window_radius: f64) -> Self {
        PointConfiguration {
            time,
            window_radius,
            points: Vec::new(),
        }
    }
}

/// Number of points with |p| ≤ R.
pub fn count_in_disk(cfg: &PointConfiguration, radius: f64) -> Result<usize> {
    if radius > cfg.window_radius {
        return Err(Error::domain(
            "R",
            format!("R = {radius} exceeds the simulated window {}", cfg.window_radius),
        ));
    }
    Ok(cfg.points.iter().filter(|(_, p)| p.norm() <= radius).count())
}

/// True iff D_R is empty at every reported time.
pub fn hole_path_indicator(cfgs: &[PointConfiguration], radius: f64) -> Result<bool> {
    for cfg in cfgs {
        if count_in_disk(cfg, radius)? > 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff D_R holds at least N points at every reported time.
pub fn crowd_path_indicator(cfgs: &[PointConfiguration], radius: f64, n: usize) -> Result<bool> {
    for cfg in cfgs {
        if count_in_disk(cfg, radius)? < n {
            return Ok(false);
        }
    }
    Ok(true)
}

enum Dynamics {
    Brownian {
        positions: Vec<Complex64>,
    },
    Lattice {
        sites: Vec<Complex64>,
        /// one OU value per driver
        drivers: Vec<Complex64>,
        /// (site index, driver index, rotation)
        points: Vec<(usize, usize, Complex64)>,
    },
}

/// Steps one toy-model realisation through time.
pub struct ToySimulator {
    spec: LatticeSpec,
    rng: StreamRng,
    time: f64,
    dynamics: Dynamics,
}

fn uniform_in_annulus<R: Rng + ?Sized>(inner: f64, outer: f64, rng: &mut R) -> Complex64 {
    let u: f64 = rng.random();
    let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Complex64::from_polar(r, theta)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

impl ToySimulator {
    pub fn new(spec: &LatticeSpec, stream: &RngStream) -> Result<Self> {
        Self::build(spec, stream, 0.0)
    }

    /// Poisson model started from its law conditioned on D_R being empty at
    /// time 0 (points uniform in the annulus R < |z| < window + margin).
    pub fn with_initial_hole(spec: &LatticeSpec, hole_radius: f64, stream: &RngStream) -> Result<Self> {
        if spec.model != ToyModel::PoissonBm {
            return Err(Error::domain("model", "initial hole conditioning is for poisson_bm"));
        }
        if !(hole_radius >= 0.0 && hole_radius < spec.padded_radius()) {
            return Err(Error::domain("R", "hole radius must lie inside the padded window"));
        }
        Self::build(spec, stream, hole_radius)
    }

    fn build(spec: &LatticeSpec, stream: &RngStream, hole: f64) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream.rng();
        let outer = spec.padded_radius();
        let dynamics = match spec.model {
            ToyModel::PoissonBm => {
                // intensity π⁻¹ times area π(outer² − hole²)
                let n = poisson_count(outer * outer - hole * hole, &mut rng);
                let positions = (0..n).map(|_| uniform_in_annulus(hole, outer, &mut rng)).collect();
                Dynamics::Brownian { positions }
            }
            model => {
                let h = lattice_spacing(model);
                let kmax = (outer / h).ceil() as i64;
                let mut sites = Vec::new();
                for k in -kmax..=kmax {
                    for l in -kmax..=kmax {
                        let s = Complex64::new(k as f64, l as f64) * h;
                        if s.norm() <= outer {
                            sites.push(s);
                        }
                    }
                }
                let mut points = Vec::new();
                let mut n_drivers = 0;
                for i in 0..sites.len() {
                    if model == ToyModel::PerturbedLattice {
                        points.push((i, n_drivers, Complex64::new(1.0, 0.0)));
                        n_drivers += 1;
                    } else {
                        for m in 0..3 {
                            let rot = Complex64::from_polar(1.0, 2.0 * PI * m as f64 / 3.0);
                            let d = if spec.independent_drivers { n_drivers + m } else { n_drivers };
                            points.push((i, d, rot));
                        }
                        n_drivers += if spec.independent_drivers { 3 } else { 1 };
                    }
                }
                let drivers = (0..n_drivers).map(|_| sample_stationary(&mut rng)).collect();
                Dynamics::Lattice {
                    sites,
                    drivers,
                    points,
                }
            }
        };
        Ok(ToySimulator {
            spec: spec.clone(),
            rng,
            time: 0.0,
            dynamics,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        match &self.dynamics {
            Dynamics::Brownian { positions } => positions.len(),
            Dynamics::Lattice { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Current positions in label order.
    pub fn positions(&self) -> impl Iterator<Item = Complex64> + '_ {
        let (brownian, lattice) = match &self.dynamics {
            Dynamics::Brownian { positions } => (Some(positions.iter().copied()), None),
            Dynamics::Lattice {
                sites,
                drivers,
                points,
            } => {
                let c = self.spec.perturb_scale;
                (
                    None,
                    Some(points.iter().map(move |&(s, d, rot)| sites[s] + rot * drivers[d] * c)),
                )
            }
        };
        brownian.into_iter().flatten().chain(lattice.into_iter().flatten())
    }

    /// Points with |p| ≤ R right now.
    pub fn count_within(&self, radius: f64) -> usize {
        self.positions().filter(|p| p.norm() <= radius).count()
    }

    pub fn configuration(&self) -> PointConfiguration {
        PointConfiguration {
            time: self.time,
            window_radius: self.spec.window_radius,
            points: self.positions().enumerate().map(|(i, p)| (i as u64, p)).collect(),
        }
    }

    /// Advances every point by `dt` (exact in law for both BM and OU).
    pub fn step(&mut self, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        match &mut self.dynamics {
            Dynamics::Brownian { positions } => {
                for p in positions.iter_mut() {
                    *p += bm_increment(dt, &mut self.rng);
                }
            }
            Dynamics::Lattice { drivers, .. } => {
                let (decay, noise) = transition_factors(dt);
                for z in drivers.iter_mut() {
                    *z = *z * decay + sample_stationary(&mut self.rng) * noise;
                }
            }
        }
        self.time += dt;
    }
}

/// Configurations of one realisation on the δ-grid of [0, T].
pub fn simulate_toy(spec: &LatticeSpec, stream: &RngStream) -> Result<Vec<PointConfiguration>> {
    let grid = time_grid(spec.horizon, spec.grid_step)?;
    let mut sim = ToySimulator::new(spec, stream)?;
    let mut out = Vec::with_capacity(grid.len());
    out.push(sim.configuration());
    for w in grid.windows(2) {
        sim.step(w[1] - w[0]);
        sim.time = w[1];
        out.push(sim.configuration());
    }
    Ok(out)
}

pub const POINT_CSV_HEADER: &str = "sample_id,time,label,re,im,model";

pub fn write_point_csv<W: Write>(
    out: &mut W,
    model: ToyModel,
    samples: &[(u64, Vec<PointConfiguration>)],
) -> Result<()> {
    writeln!(out, "{POINT_CSV_HEADER}")?;
    for (id, cfgs) in samples {
        for cfg in cfgs {
            for (label, p) in &cfg.points {
                writeln!(out, "{id},{},{label},{},{},{model}", cfg.time, p.re, p.im)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_lattice_geometry() {
        let spec = LatticeSpec::new(ToyModel::PerturbedLattice, 0.0, 3.0, 0.1, 1.0);
        let cfgs = simulate_toy(&spec, &RngStream::new(1)).unwrap();
        assert_eq!(cfgs.len(), 11);
        let first = &cfgs[0];
        assert_eq!(count_in_disk(first, 1.0).unwrap(), 1);
        assert_eq!(count_in_disk(first, 2.0).unwrap(), 5);
        for cfg in &cfgs {
            assert_eq!(cfg.points, first.points);
        }
        assert!(!hole_path_indicator(&cfgs, 0.01).unwrap());
        assert!(crowd_path_indicator(&cfgs, 2.0, 5).unwrap());
        assert!(!crowd_path_indicator(&cfgs, 2.0, 6).unwrap());
        assert!(crowd_path_indicator(&cfgs, 2.0, 0).unwrap());
    }

    #[test]
    fn count_guard_and_empty() {
        let cfg = PointConfiguration::empty(0.0, 1.0);
        assert_eq!(count_in_disk(&cfg, 0.5).unwrap(), 0);
        assert!(count_in_disk(&cfg, 1.5).is_err());
    }

    #[test]
    fn hole_fails_with_point_at_start() {
        let mut a = PointConfiguration::empty(0.0, 2.0);
        a.points.push((0, Complex64::new(0.1, 0.0)));
        let b = PointConfiguration::empty(1.0, 2.0);
        assert!(!hole_path_indicator(&[a, b.clone()], 0.5).unwrap());
        assert!(hole_path_indicator(&[b], 0.5).unwrap());
    }

    #[test]
    fn labels_unique_and_cluster_triads() {
        let spec = LatticeSpec::new(ToyModel::TriangularCluster, 0.5, 2.0, 0.1, 0.2);
        let cfgs = simulate_toy(&spec, &RngStream::new(4)).unwrap();
        let cfg = &cfgs[0];
        assert_eq!(cfg.points.len() % 3, 0);
        let mut labels: Vec<u64> = cfg.points.iter().map(|p| p.0).collect();
        labels.dedup();
        assert_eq!(labels.len(), cfg.points.len());
        // shared driver: the triad's displacements sum to zero
        for triad in cfg.points.chunks(3) {
            let centroid = (triad[0].1 + triad[1].1 + triad[2].1) / 3.0;
            let h = (3.0 * PI).sqrt();
            let k = (centroid.re / h).round();
            let l = (centroid.im / h).round();
            assert!((centroid - Complex64::new(k, l) * h).norm() < 1e-12);
        }
    }

    #[test]
    fn deterministic_replay() {
        let spec = LatticeSpec::new(ToyModel::PoissonBm, 0.0, 2.0, 0.05, 0.5);
        let a = simulate_toy(&spec, &RngStream::new(9)).unwrap();
        let b = simulate_toy(&spec, &RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_names_round_trip() {
        for m in [ToyModel::PoissonBm, ToyModel::PerturbedLattice, ToyModel::TriangularCluster] {
            assert_eq!(m.name().parse::<ToyModel>().unwrap(), m);
        }
        assert!("lattice".parse::<ToyModel>().is_err());
    }
}

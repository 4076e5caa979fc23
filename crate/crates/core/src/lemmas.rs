//! Survival probabilities of a single stationary OU process, used to probe
//! the small-ball, large-ball, near-point and half-plane decay rates.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_points, RateFit};
use crate::ou::{sample_stationary, time_grid, transition_factors};
use crate::rng::RngStream;

/// Successes below this count at a horizon mean the estimate is starved.
pub const MIN_SUCCESSES: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuLemma {
    /// |W(t)| < R
    SmallBall,
    /// |W(t)| > R
    LargeBall,
    /// |W(t) − R| < ρ
    NearPoint,
    /// Re W(t) < R
    HalfPlane,
}

impl fmt::Display for OuLemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OuLemma::SmallBall => "small_ball",
            OuLemma::LargeBall => "large_ball",
            OuLemma::NearPoint => "near_point",
            OuLemma::HalfPlane => "half_plane",
        })
    }
}

impl FromStr for OuLemma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small_ball" => Ok(OuLemma::SmallBall),
            "large_ball" => Ok(OuLemma::LargeBall),
            "near_point" => Ok(OuLemma::NearPoint),
            "half_plane" => Ok(OuLemma::HalfPlane),
            _ => Err(Error::domain("lemma", format!("unknown lemma `{s}`"))),
        }
    }
}

/// Survival region of one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    lemma: OuLemma,
    radius: f64,
    rho: f64,
}

impl Region {
    pub fn new(lemma: OuLemma, radius: f64, rho: Option<f64>) -> Result<Self> {
        if !radius.is_finite() || (lemma != OuLemma::HalfPlane && !(radius > 0.0)) {
            return Err(Error::domain("R", format!("must be > 0, got {radius}")));
        }
        let rho = match (lemma, rho) {
            (OuLemma::NearPoint, Some(r)) if r > 0.0 => r,
            (OuLemma::NearPoint, _) => return Err(Error::domain("rho", "near_point needs rho > 0")),
            (_, _) => 0.0,
        };
        Ok(Region { lemma, radius, rho })
    }

    #[inline]
    pub fn contains(&self, w: Complex64) -> bool {
        match self.lemma {
            OuLemma::SmallBall => w.norm_sqr() < self.radius * self.radius,
            OuLemma::LargeBall => w.norm_sqr() > self.radius * self.radius,
            OuLemma::NearPoint => (w - self.radius).norm_sqr() < self.rho * self.rho,
            OuLemma::HalfPlane => w.re < self.radius,
        }
    }
}

/// Probe output: per-horizon survival counts and the rate fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaProbe {
    pub lemma: OuLemma,
    #[serde(rename = "R")]
    pub radius: f64,
    pub rho: Option<f64>,
    pub delta: f64,
    pub n_samples: u64,
    #[serde(rename = "T_values")]
    pub t_values: Vec<f64>,
    pub successes: Vec<u64>,
    pub p_hat: Vec<f64>,
    /// horizons dropped because they had fewer than `MIN_SUCCESSES` successes
    pub dropped: Vec<f64>,
    pub starved: bool,
    pub fit: RateFit,
    pub seed_root: u64,
}

/// Number of grid steps each replicate survives inside `region` (capped
/// at the grid length). Replicate `i` uses `stream.child64(i)`.
pub fn survival_steps(region: Region, grid: &[f64], n: u64, stream: &RngStream) -> Vec<usize> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child64(i).rng();
            let mut w = sample_stationary(&mut rng);
            if !region.contains(w) {
                return 0;
            }
            for k in 1..grid.len() {
                let (decay, noise) = transition_factors(grid[k] - grid[k - 1]);
                w = w * decay + sample_stationary(&mut rng) * noise;
                if !region.contains(w) {
                    return k;
                }
            }
            grid.len()
        })
        .collect()
}

/// Survival probabilities P(W(t) ∈ region on the δ-grid of [0,T]) for every
/// T in `t_grid` (from one set of paths) and the fit of log p against T.
pub fn ou_lemma_probe(
    lemma: OuLemma,
    radius: f64,
    rho: Option<f64>,
    t_grid: &[f64],
    delta: f64,
    n: u64,
    stream: &RngStream,
) -> Result<LemmaProbe> {
    let region = Region::new(lemma, radius, rho)?;
    if t_grid.len() < 3 {
        return Err(Error::Insufficient(format!("T_grid needs >= 3 points, got {}", t_grid.len())));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] >= 0.0) {
        return Err(Error::domain("T_grid", "must be non-negative and strictly increasing"));
    }
    if n == 0 {
        return Err(Error::domain("n", "need at least one replicate"));
    }
    let t_max = *t_grid.last().unwrap();
    let grid = time_grid(t_max, delta)?;
    let idx: Vec<usize> = t_grid
        .iter()
        .map(|&t| {
            grid.iter()
                .position(|&g| (g - t).abs() <= 1e-9 * delta.max(t))
                .ok_or_else(|| Error::domain("T_grid", format!("T = {t} is not a multiple of delta")))
        })
        .collect::<Result<_>>()?;
    let steps = survival_steps(region, &grid, n, stream);
    let mut t_values = Vec::new();
    let mut successes = Vec::new();
    let mut dropped = Vec::new();
    for (&t, &k) in t_grid.iter().zip(&idx) {
        let s = steps.iter().filter(|&&m| m > k).count() as u64;
        if s < MIN_SUCCESSES {
            dropped.push(t);
        } else {
            t_values.push(t);
            successes.push(s);
        }
    }
    let p_hat: Vec<f64> = successes.iter().map(|&s| s as f64 / n as f64).collect();
    let log_p: Vec<f64> = p_hat.iter().map(|p| p.ln()).collect();
    let fit = fit_points(&t_values, &log_p).map_err(|e| match e {
        Error::Insufficient(_) => Error::Insufficient(format!(
            "only {} horizons kept >= {MIN_SUCCESSES} successes; shrink T_grid or raise n",
            t_values.len()
        )),
        other => other,
    })?;
    Ok(LemmaProbe {
        lemma,
        radius,
        rho,
        delta,
        n_samples: n,
        t_values,
        successes,
        p_hat,
        starved: !dropped.is_empty(),
        dropped,
        fit,
        seed_root: stream.root_seed(),
    })
}

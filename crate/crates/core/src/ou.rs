//! Complex Gaussian sampling, exact Ornstein–Uhlenbeck transitions and
//! Brownian utilities.
//!
//! Convention: ℂN(0,1) has independent real and imaginary parts, each
//! N(0, 1/2), so |z|² ~ Exp(1). A complex Brownian motion B(t) has
//! E|B(t)|² = t. The OU process is W(t) = e^{-t/2} B(e^t), stationary with
//! covariance E W(t) conj W(s) = e^{-|t-s|/2}.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One draw from the stationary law ℂN(0,1).
#[inline]
pub fn sample_stationary<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Value of a coefficient process at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuState {
    pub value: Complex64,
    pub time: f64,
}

impl OuState {
    pub fn new(value: Complex64, time: f64) -> Self {
        OuState { value, time }
    }

    pub fn stationary<R: Rng + ?Sized>(time: f64, rng: &mut R) -> Self {
        OuState {
            value: sample_stationary(rng),
            time,
        }
    }
}

/// Decay and noise factors (e^{-dt/2}, √(1-e^{-dt})) of an OU step.
#[inline]
pub fn transition_factors(dt: f64) -> (f64, f64) {
    let decay = (-0.5 * dt).exp();
    // -expm1(-dt) keeps precision for small dt
    let noise = (-(-dt).exp_m1()).sqrt();
    (decay, noise)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::domain("dt", format!("must be finite and >= 0, got {dt}")));
    }
    Ok(())
}

/// Exact transition W(t+dt) = e^{-dt/2} W(t) + √(1-e^{-dt}) X with fresh X ~ ℂN(0,1).
///
/// A zero step returns the state unchanged and consumes no randomness.
pub fn ou_transition<R: Rng + ?Sized>(state: OuState, dt: f64, rng: &mut R) -> Result<OuState> {
    check_dt(dt)?;
    if dt == 0.0 {
        return Ok(state);
    }
    let (decay, noise) = transition_factors(dt);
    Ok(OuState {
        value: state.value * decay + sample_stationary(rng) * noise,
        time: state.time + dt,
    })
}

/// Grid 0, δ, 2δ, … up to `horizon`, with `horizon` appended when it is not
/// a whole number of steps.
pub fn time_grid(horizon: f64, delta: f64) -> Result<Vec<f64>> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::domain("T", format!("must be finite and >= 0, got {horizon}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain("delta", format!("must be > 0, got {delta}")));
    }
    let tol = 1e-9 * delta;
    let steps = ((horizon + tol) / delta).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * delta).collect();
    let last = *grid.last().unwrap();
    if horizon - last > tol {
        grid.push(horizon);
    } else if let Some(l) = grid.last_mut() {
        // snap the endpoint so that reported horizons are exact
        if steps > 0 {
            *l = horizon;
        }
    }
    Ok(grid)
}

/// OU path sampled on the δ-grid of [0, T], chained through exact transitions.
///
/// `initial` defaults to a stationary draw taken from the same stream.
pub fn ou_path(
    horizon: f64,
    delta: f64,
    stream: &RngStream,
    initial: Option<Complex64>,
) -> Result<Vec<OuState>> {
    if !(delta > 0.0) {
        return Err(Error::domain("delta", format!("must be > 0, got {delta}")));
    }
    let grid = time_grid(horizon, delta)?;
    let mut rng = stream.rng();
    let start = initial.unwrap_or_else(|| sample_stationary(&mut rng));
    let mut path = Vec::with_capacity(grid.len());
    let mut state = OuState::new(start, 0.0);
    path.push(state);
    for w in grid.windows(2) {
        state = ou_transition(state, w[1] - w[0], &mut rng)?;
        state.time = w[1];
        path.push(state);
    }
    Ok(path)
}

/// Increment of a complex Brownian motion over `dt` (E|ΔB|² = dt).
#[inline]
pub fn bm_increment<R: Rng + ?Sized>(dt: f64, rng: &mut R) -> Complex64 {
    sample_stationary(rng) * dt.sqrt()
}

/// Probability that planar Brownian motion started on |z| = r2 reaches
/// |z| = r3 before |z| = r1.
pub fn bm_annulus_exit_prob(r1: f64, r2: f64, r3: f64) -> Result<f64> {
    if !(r1 > 0.0) {
        return Err(Error::domain("r1", format!("must be > 0, got {r1}")));
    }
    if !(r1 < r3) || !r3.is_finite() {
        return Err(Error::domain("r3", format!("need r1 < r3, got r1={r1}, r3={r3}")));
    }
    if !(r1 <= r2 && r2 <= r3) {
        return Err(Error::domain("r2", format!("need r1 <= r2 <= r3, got {r1}, {r2}, {r3}")));
    }
    Ok((r2.ln() - r1.ln()) / (r3.ln() - r1.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_is_identity() {
        let mut rng = RngStream::new(1).rng();
        let s = OuState::new(Complex64::new(0.3, -1.2), 2.0);
        assert_eq!(ou_transition(s, 0.0, &mut rng).unwrap(), s);
    }

    #[test]
    fn negative_step_rejected() {
        let mut rng = RngStream::new(1).rng();
        let s = OuState::new(Complex64::new(0.0, 0.0), 0.0);
        assert_eq!(ou_transition(s, -0.1, &mut rng).unwrap_err().field(), Some("dt"));
        assert!(ou_transition(s, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn grid_includes_endpoint() {
        assert_eq!(time_grid(0.0, 0.1).unwrap(), vec![0.0]);
        let g = time_grid(1.0, 0.3).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = time_grid(1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = time_grid(10.0, 0.02).unwrap();
        assert_eq!(g.len(), 501);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(time_grid(1.0, 0.0).is_err());
    }

    #[test]
    fn path_at_zero_horizon() {
        let p = ou_path(0.0, 0.1, &RngStream::new(3), None).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].time, 0.0);
        let p = ou_path(1.0, 0.1, &RngStream::new(3), Some(Complex64::new(2.0, 0.0))).unwrap();
        assert_eq!(p[0].value, Complex64::new(2.0, 0.0));
        assert_eq!(p.len(), 11);
        assert!(ou_path(1.0, -0.1, &RngStream::new(3), None).is_err());
    }

    #[test]
    fn annulus_formula() {
        assert_eq!(bm_annulus_exit_prob(1.0, 1.0, 3.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((bm_annulus_exit_prob(1.0, e, e * e).unwrap() - 0.5).abs() < 1e-15);
        assert!((bm_annulus_exit_prob(0.5, 1.0, 4.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(bm_annulus_exit_prob(0.0, 1.0, 2.0).is_err());
        assert!(bm_annulus_exit_prob(1.0, 3.0, 2.0).is_err());
        assert!(bm_annulus_exit_prob(2.0, 1.5, 1.0).is_err());
    }
}

//! Simulation and verification tools for the time-dependent planar Gaussian
//! analytic function
//!
//! ```text
//! f(z, t) = Σ aₙ(t) zⁿ / √n!
//! ```
//!
//! whose coefficients are i.i.d. stationary complex Ornstein–Uhlenbeck
//! processes, together with three evolving comparison point processes
//! (Brownian Poisson points, perturbed lattice, triangular clusters).
//!
//! * [`rng`]: hierarchically addressable deterministic random streams.
//! * [`ou`]: complex Gaussians, exact OU transitions, Brownian helpers.
//! * [`gaf`]: truncated snapshots, stable evaluation, exact evolution.
//! * [`zeros`]: winding counts, zero extraction, Jensen checks.
//! * [`toy`]: the comparison point processes.
//! * [`estimate`], [`conditions`], [`lemmas`]: Monte Carlo event
//!   probabilities, the coefficient boxes forcing holes/overcrowding, and
//!   OU survival-rate probes.

pub mod conditions;
pub mod error;
pub mod estimate;
pub mod gaf;
pub mod lemmas;
pub mod ou;
pub mod rng;
pub mod toy;
pub mod zeros;

pub use error::{Error, Result};
pub use gaf::{Analytic, GafEvolution, GafSnapshot};
pub use rng::RngStream;
pub use zeros::ZeroSet;

//! Simulation laboratory for percolation of excursion sets of smooth
//! stationary Gaussian fields.
//!
//! * [`fieldgen`]: kernels, truncations and grid samplers.
//! * [`excursion`]: thresholding and connected-component labeling.
//! * [`events`]: crossing, arm, slab and good-point detectors.
//! * [`estimate`]: Monte Carlo estimation, level sweeps, bisection and validators.
//! * [`renorm`]: multiscale renormalization arithmetic and black-vertex lattices.

pub mod error;
pub mod estimate;
pub mod events;
pub mod excursion;
pub mod fieldgen;
pub mod io;
mod quad;
pub mod renorm;
pub mod rng;

pub use error::{Error, Result};

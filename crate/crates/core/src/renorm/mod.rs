//! Multiscale renormalization.
//!
//! [`verify_recursion`] iterates the union bound for `q_n = P[G_{n,0}^c]`
//! in exact dyadic arithmetic. [`simulate_black_lattice`] builds a synthetic
//! lattice of independent base events and scale events, evaluates the
//! cascading events `G_{n,x}` and the black vertices, and [`check_geometry`]
//! tests black connectivity between two sets.

mod geometry;
mod hbounds;
mod lattice;
mod recursion;
mod scheme;

pub use geometry::{
    black_components, check_geometry, diameter, geometry_trials, random_connected_set,
    Counterexample, GeometryReport,
};
pub use hbounds::{make_h_bounds, HBoundReport};
pub use lattice::{
    g_event, is_black, simulate_black_lattice, BlackLattice, LatticeConfig, LatticeInputs, Site,
    SyntheticInputs,
};
pub use recursion::{verify_recursion, RecursionRow, RecursionTrace, EXACT_MAX_N};
pub use scheme::{scale_string, HBounds, ProbBound, RenormScheme, ScaleParams};

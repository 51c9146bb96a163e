//! Percolation events as functionals of a sampled field.
//!
//! Every detector reads an immutable [`FieldSample`](crate::fieldgen::FieldSample)
//! and returns a boolean or a count. Excursion sets use face connectivity;
//! complements use face-and-diagonal connectivity, so that in the plane a box
//! is crossed by `{f >= l}` in one direction exactly when it is not crossed
//! by `{f < l}` in the other.

mod annulus;
mod crossing;
mod detector;
mod good;
mod slab;
mod window;

pub use annulus::{annulus_event, two_arms, AnnulusMode, AnnulusSpec, HalfPlane};
pub use crossing::{complement_crossing, crossing, CrossingSpec, Face};
pub use detector::{component_count, Detector};
pub use good::{
    contact_points, densify, good_pair_exists, good_point, ContactCount, GoodPointSpec, GoodVariant,
};
pub use slab::{
    orthogonal_squares_crossing, sprouts, uniqueness_in_slab, SlabEventSpec, SproutsSpec,
};
pub use window::{connects, node_at, Window};

/// One line of a detector output stream.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Record {
    pub replicate: u64,
    pub seed: u64,
    pub value: f64,
}

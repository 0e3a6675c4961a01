//! Markov jump processes on finite lattices: state indexing, generators, stationary
//! distributions and time reversal.

mod generator;
pub(crate) mod solve;
mod space;
mod stationary;

pub use generator::Generator;
pub use space::{GridAxis, StateSpace};
pub use stationary::{closed_classes, reversed_generator, stationary_distribution, StationaryDist, MASS_FLOOR};

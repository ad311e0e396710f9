//! Bridging-based note scoring.
//!
//! Takes raw note/rating data, fits a regularized one-dimensional matrix
//! factorization twice (with a rater-reputation filter in between), and
//! labels each note Currently Rated Helpful / Not Helpful / Needs More
//! Ratings. Also ships a supermajority baseline, a seeded synthetic
//! polarized-community generator, and two-proportion A/B statistics.
//!
//! The numeric core is generic over [`Scalar`] (any `num_traits::Float`);
//! the aliases below pin the default double-precision build.

pub mod abstats;
pub mod error;
pub mod helpfulness;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use model::ScoringConfig;
pub use scalar::Scalar;

/// Default-precision aliases.
pub type Model = model::ModelParameters<f64>;
pub type Matrix = model::RatingsMatrix<f64>;
pub type Score = model::NoteScore<f64>;
pub type Run = pipeline::ScoringRun<f64>;
pub type Delta = abstats::DeltaReport<f64>;

/// Single-precision aliases for memory-constrained runs.
pub type Model32 = model::ModelParameters<f32>;
pub type Matrix32 = model::RatingsMatrix<f32>;

//! Willmore energy minimization for genus-1 surfaces under a fixed conformal class.

pub mod correction;
pub mod minimizer;
pub mod error;
pub mod geometry;
pub mod grid;
mod scalar;
pub mod surfaces;
pub mod tensor;
pub mod variations;
pub mod uniformization;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete instantiations at the two supported precisions.
pub type Immersion64 = geometry::Immersion<f64>;
pub type Immersion32 = geometry::Immersion<f32>;
pub type MinimizeResult64 = minimizer::MinimizeResult<f64>;
pub type MinimizeResult32 = minimizer::MinimizeResult<f32>;
pub type TeichmullerPoint64 = uniformization::TeichmullerPoint<f64>;
pub type TeichmullerPoint32 = uniformization::TeichmullerPoint<f32>;

//! Copositive reformulations of multi-stage robust linear programs under
//! linear, quadratic and lifted decision rules, with semidefinite inner
//! approximations solved as conic programs.

pub mod bench;
pub mod cones;
pub mod conic;
pub mod error;
pub mod lifting;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod reformulate;
pub mod verify;

pub use error::{Error, Result};

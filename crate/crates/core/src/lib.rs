//! Local minimax analysis for smooth two-player zero-sum objectives
//! `min_x max_y f(x, y)`.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod classifier;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod linalg;
pub mod mixed;
pub mod oracle;
pub mod problems;
pub mod verify;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{lit, to_f64, Real};

pub type Matrix64 = linalg::Matrix<f64>;
pub type Point64 = problems::Point<f64>;
pub type HessianBlocks64 = problems::HessianBlocks<f64>;
pub type BoxDomain64 = problems::BoxDomain<f64>;

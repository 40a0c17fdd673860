//! Non-rigid image deformation estimation: a 2D cubic B-spline free-form
//! deformation whose control-point displacements are searched by a binary
//! genetic algorithm driven by probabilistic bitwise inversion and an
//! annealed selection rate, coarse to fine over an image pyramid.

pub mod error;
pub mod ffd;
pub mod fitness;
pub mod genome;
pub mod io;
pub mod pbo;
pub mod pyramid;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// A 2D vector in pixels, `[x, y]`.
pub type Vec2 = [f64; 2];

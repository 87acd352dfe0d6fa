//! Desk-scale laboratory for energy-based models.
//!
//! The numeric core (tensors, gradient tape, finite differences) is generic
//! over its scalar type; the model modules work with the `f64` aliases
//! below, since every tolerance in the test suite is calibrated for 64-bit
//! floats.

pub mod error;
pub mod numerics;

pub mod archive;
pub mod boltzmann;
pub mod contrastive;
pub mod datasets;
pub mod ellipse;
pub mod energy;
pub mod gradcheck;
pub mod grid;
pub mod hopfield;
pub mod jepa;
pub mod mlp;
pub mod csv;
pub mod regularized;

pub use error::{EbmError, EbmResult};

/// Dense row-major tensor of 64-bit floats — the universal value carrier.
pub type Tensor = numerics::Tensor<f64>;
/// Gradient tape over 64-bit floats.
pub type Tape = numerics::Tape<f64>;
/// Leaf adjoints produced by a consumed 64-bit tape.
pub type Gradients = numerics::Gradients<f64>;

/// Single-precision variants, for callers that trade precision for space.
pub type Tensor32 = numerics::Tensor<f32>;
pub type Tape32 = numerics::Tape<f32>;

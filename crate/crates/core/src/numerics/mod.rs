//! Dense-tensor arithmetic, reverse-mode gradients, and the
//! finite-difference oracle. Everything here is generic over [`Scalar`];
//! the crate root exports `f64` aliases used by the model modules.

pub mod fdiff;
pub mod logsumexp;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use fdiff::{finite_diff_grad, max_rel_error, rel_error, DEFAULT_STEP};
pub use logsumexp::{logsumexp, softmax_from_logits, weighted_logsumexp};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

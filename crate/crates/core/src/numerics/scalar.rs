//! Scalar abstraction for the numeric core.
//!
//! All tensor arithmetic, the gradient tape, and the finite-difference
//! oracle are generic over [`Scalar`]. The rest of the crate works with the
//! `f64` aliases exported at the crate root.

use num_traits::{Float, NumAssignOps};

pub trait Scalar:
    Float + NumAssignOps + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_usize(v: usize) -> Self;
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {
        $(
            impl Scalar for $t {
                #[inline]
                fn from_f64(v: f64) -> Self {
                    v as $t
                }
                #[inline]
                fn to_f64(self) -> f64 {
                    self as f64
                }
                #[inline]
                fn from_usize(v: usize) -> Self {
                    v as $t
                }
            }
        )*
    };
}

impl_scalar!(f32, f64);

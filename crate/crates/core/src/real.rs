//! Scalar abstraction for the numeric kernels.
//!
//! The density and linear-algebra kernels are generic over [`Real`], a bundle
//! of the `num-traits` capabilities they actually use. Any float type with
//! those capabilities works; the crate ships blanket coverage for `f32` and
//! `f64`, and the rest of the crate pins [`crate::Scalar`] (`f64`) for
//! inference, where serialized output is specified to 17 significant digits.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the numeric kernels.
///
/// Automatically implemented for every type with the listed capabilities,
/// in particular `f32` and `f64`.
pub trait Real: Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into `Self`, rounding if necessary.
    ///
    /// Panics if the value is not representable at all (never the case for
    /// finite constants converted to `f32`/`f64`).
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }

    /// Converts a size into `Self` (exact for the small dimensions used here).
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize must convert to scalar")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
}

//! Generic scalar trait for the numerical core.
//!
//! All signal containers, decompositions, network math, and metrics are
//! written against [`Real`] so the same code instantiates at `f32` or `f64`.
//! The crate root exports `f64` aliases, which is what training and the
//! experiment harness use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
///
/// The `Signed + Debug + Send + Sync + 'static` bounds make every `Real`
/// also satisfy `rustfft::FftNum`, so spectral code stays generic.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Signed
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    /// Conversion back to `f64` for reporting and file formats.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the model can run in. Training uses `f32`; gradient
/// checking runs the same code in `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal. Every `f64` is representable (possibly rounded).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `exp` from the `libm` crate. `Float::exp` switches to the platform
    /// library when another crate enables `num-traits/std`, and the two can
    /// differ in the last bit, which would make outputs depend on the build.
    fn exp_libm(self) -> Self;

    /// `ln(1 + x)` from the `libm` crate, see [`Real::exp_libm`].
    fn ln_1p_libm(self) -> Self;
}

impl Real for f32 {
    #[inline]
    fn exp_libm(self) -> Self {
        libm::expf(self)
    }

    #[inline]
    fn ln_1p_libm(self) -> Self {
        libm::log1pf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn exp_libm(self) -> Self {
        libm::exp(self)
    }

    #[inline]
    fn ln_1p_libm(self) -> Self {
        libm::log1p(self)
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

/// `dst += alpha * src`
#[inline]
pub fn axpy<T: Real>(alpha: T, src: &[T], dst: &mut [T]) {
    debug_assert_eq!(src.len(), dst.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + alpha * s;
    }
}

#[inline]
pub fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

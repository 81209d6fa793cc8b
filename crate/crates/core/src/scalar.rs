//! Scalar abstraction shared by the numeric kernels.
//!
//! Everything that does arithmetic on coefficients, characteristic functions
//! or distribution functions is written against [`Real`], so the same code
//! runs in `f32` (fast, coarse) and `f64` (default). Special functions are
//! evaluated in `f64` through `libm` and narrowed.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// floating point: f32 or f64
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `ln Γ(x)` for `x > 0`.
    fn ln_gamma(self) -> Self {
        Self::lit(libm::lgamma(self.as_f64()))
    }

    fn erf(self) -> Self {
        Self::lit(libm::erf(self.as_f64()))
    }

    fn erfc(self) -> Self {
        Self::lit(libm::erfc(self.as_f64()))
    }

    /// Standard normal distribution function `G_1(x)`.
    ///
    /// Evaluated as `erfc(-x/√2)/2`, which keeps full relative accuracy in
    /// the lower tail where `1 + erf` would cancel.
    fn std_normal_cdf(self) -> Self {
        let z = -self.as_f64() * std::f64::consts::FRAC_1_SQRT_2;
        Self::lit(0.5 * libm::erfc(z))
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(0.0f64.std_normal_cdf(), 0.5);
        // Φ(1.959963984540054) = 0.975
        let err = (1.959963984540054f64.std_normal_cdf() - 0.975).abs();
        assert!(err < 1e-15, "{err:e}");
        // deep lower tail keeps relative accuracy: Φ(-10) = 7.619853024160527e-24
        let lo = (-10.0f64).std_normal_cdf();
        assert!((lo / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_integers_and_f32() {
        assert!((Real::ln_gamma(5.0f64) - 24f64.ln()).abs() < 1e-13);
        assert!((Real::ln_gamma(0.5f64) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-14);
        assert!((Real::ln_gamma(5.0f32) - 24f32.ln()).abs() < 1e-5);
    }
}

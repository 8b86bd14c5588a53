//! Scalar abstraction: the numeric kernel is generic over the floating-point
//! type. `f64` is the default precision used by the CLI and the test suite;
//! `f32` is available through the same API.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Draw one standard-normal variate from `rng`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` constant. Panics only for non-finite inputs, which
    /// never occur for the fixed constants this is used with.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }

    /// Lossy widening to `f64`, used for hashing and report emission.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// Relative tolerance for symmetry checks on input matrices.
///
/// The `f64` value is 1e-12; for wider-epsilon scalars the bound is relaxed
/// to a fixed multiple of the machine epsilon so the same checks remain
/// meaningful in `f32`.
pub fn symmetry_tol<T: Scalar>() -> T {
    let eps_based = T::epsilon() * T::c(512.0);
    eps_based.max(T::c(1e-12))
}

/// Relative tolerance for factor-reconstruction checks (`L·Lᵀ` vs the input).
pub fn reconstruction_tol<T: Scalar>() -> T {
    let eps_based = T::epsilon() * T::c(4096.0);
    eps_based.max(T::c(1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_tolerances_match_contract() {
        assert_eq!(symmetry_tol::<f64>(), 1e-12);
        assert_eq!(reconstruction_tol::<f64>(), 1e-10);
    }

    #[test]
    fn f32_tolerances_scale_with_epsilon() {
        assert!(symmetry_tol::<f32>() > 1e-6);
        assert!(reconstruction_tol::<f32>() > symmetry_tol::<f32>());
    }
}

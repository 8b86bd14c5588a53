//! Weighted Gaussian entropies and weighted determinant inequalities.
//!
//! The crate computes weighted moments and entropies of zero-mean
//! multivariate normal laws, evaluates the integral conditions under which
//! the weighted determinant inequalities hold, and verifies both sides of
//! each inequality with closed forms for the exponential-tilt weight family
//! and a seeded, reproducible Monte Carlo fallback for everything else.
//!
//! The numeric kernel is generic over the scalar type ([`Scalar`], `f32` or
//! `f64`); the concrete `f64` aliases below are what the CLI and most
//! callers use.
//!
//! ```
//! use wde_core::mat::Mat;
//! use wde_core::mc::SampleSpec;
//! use wde_core::moments::gaussian_we;
//! use wde_core::pd::PdMatrix;
//! use wde_core::weights::Weight;
//!
//! let c = PdMatrix::try_new(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]))?;
//! let spec = SampleSpec::new(100_000, 0);
//!
//! // Constant weight: the standard differential entropy, in closed form.
//! let h = gaussian_we(&c, &Weight::constant(2, 1.0), &spec)?;
//! let want = 0.5 * ((std::f64::consts::TAU * std::f64::consts::E).powi(2) * 3.0).ln();
//! assert!((h.value - want).abs() < 1e-12);
//!
//! // Tilted weight: still closed form, exact standard error of zero.
//! let tilted = gaussian_we(&c, &Weight::tilt(1.0, vec![0.3, -0.2]), &spec)?;
//! assert!(tilted.stderr == 0.0 && tilted.value > 0.0);
//! # Ok::<(), wde_core::Error>(())
//! ```

pub mod error;
pub mod mat;
pub mod mc;
pub mod pd;
pub mod scalar;
pub mod weights;

pub mod gaussmix;
pub mod moments;

pub mod conditions;
pub mod inequalities;
pub mod scenario;
pub mod selftest;

pub use error::{Error, Result};
pub use mc::{Direction, Estimate, SampleSpec, Verdict};
pub use scalar::Scalar;

/// Default-precision aliases.
pub type Mat64 = mat::Mat<f64>;
pub type PdMatrix64 = pd::PdMatrix<f64>;
pub type Estimate64 = mc::Estimate<f64>;
pub type WeightFunction64 = weights::WeightFunction<f64>;
pub type Weight64 = weights::Weight<f64>;
pub type Scenario64 = scenario::Scenario<f64>;

/// Single-precision aliases for the same kernel.
pub type Mat32 = mat::Mat<f32>;
pub type PdMatrix32 = pd::PdMatrix<f32>;
pub type Estimate32 = mc::Estimate<f32>;
pub type WeightFunction32 = weights::WeightFunction<f32>;

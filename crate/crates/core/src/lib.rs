//! Expected signatures of fractional Brownian motion with Hurst index above
//! one half, their uniform-grid approximations, and the three-path cubature
//! formula for weak approximation of fBm-driven differential equations.
//!
//! The algebraic layer ([`tensor_algebra`], [`cubature`] paths, [`sde`]
//! integrator) is generic over [`Scalar`]; numerical integration and special
//! functions work in `f64`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod cubature;
pub mod expected_signature;
pub mod grid_approx;
pub mod quadrature;
pub mod scalar;
pub mod sde;
pub mod summation;
pub mod tensor_algebra;

pub use cubature::{CubatureFormula, RootBranch};
pub use quadrature::{Estimate, QuadConfig, QuadScheme};
pub use scalar::Scalar;
pub use tensor_algebra::{PiecewiseLinearPath, TensorError, TruncatedTensor, Word};

/// Double-precision truncated tensor.
pub type Tensor = TruncatedTensor<f64>;
/// Double-precision piecewise-linear path.
pub type Path = PiecewiseLinearPath<f64>;
/// Double-precision cubature formula.
pub type Formula = CubatureFormula<f64>;

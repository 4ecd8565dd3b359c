//! Scalar abstraction shared by the tensor algebra, paths, cubature paths and
//! the ODE integrator.

use num_traits::Num;
use std::fmt::Debug;

/// Any commutative ring element that can be ordered and moved across threads.
///
/// `f32`, `f64` and `num_rational::Ratio<i64>` all qualify, which lets the
/// algebraic identities be tested in exact arithmetic.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {}

/// The integer `n` as a scalar, built by repeated addition so that no
/// conversion trait is required.
pub fn from_count<T: Scalar>(n: usize) -> T {
    let mut acc = T::zero();
    for _ in 0..n {
        acc = acc + T::one();
    }
    acc
}

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the engine computes with.
///
/// Blanket-implemented for every type with the listed bounds, which in
/// practice means `f32` and `f64`. The crate-root aliases fix `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// Converts an `f64` constant into the scalar type.
///
/// Panics only if the scalar type cannot represent ordinary finite
/// constants, which no supported type does.
pub(crate) fn cast<S: Scalar>(value: f64) -> S {
    S::from_f64(value).expect("finite constant must be representable")
}

fn floored<S: Scalar>(nominal: f64, epsilons: f64) -> S {
    let spec = cast::<S>(nominal);
    let floor = S::epsilon() * cast::<S>(epsilons);
    spec.max(floor)
}

/// Absolute tolerance on weight-vector sums. 1e-9 where the type can
/// resolve it (f64); floored at a small multiple of epsilon otherwise.
pub fn weight_sum_tolerance<S: Scalar>() -> S {
    floored(1e-9, 32.0)
}

/// Convergence threshold for the power iteration: the largest allowed
/// max-norm difference between successive normalized iterates.
pub fn power_iteration_tolerance<S: Scalar>() -> S {
    floored(1e-10, 32.0)
}

/// Relative tolerance when checking a_ji against 1/a_ij.
pub fn reciprocity_tolerance<S: Scalar>() -> S {
    floored(1e-9, 64.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_tolerances_match_nominal_values() {
        assert_eq!(weight_sum_tolerance::<f64>(), 1e-9);
        assert_eq!(power_iteration_tolerance::<f64>(), 1e-10);
        assert_eq!(reciprocity_tolerance::<f64>(), 1e-9);
    }

    #[test]
    fn f32_tolerances_are_floored_above_epsilon() {
        assert!(weight_sum_tolerance::<f32>() >= f32::EPSILON);
        assert!(power_iteration_tolerance::<f32>() >= f32::EPSILON);
    }
}

//! Minimal dense-network numeric core: matrices, layers, activations, loss
//! primitives, reverse-mode gradients via an explicit tape, the Adam
//! optimiser, and reparameterized Gaussian sampling.
//!
//! Everything here is generic over the scalar type through [`Real`]; the
//! pipeline instantiates it at `f64`.

pub mod adam;
pub mod gaussian;
pub mod layer;
pub mod loss;
pub mod math;
pub mod tape;

pub use adam::{adam_step, AdamParams, AdamState};
pub use gaussian::{reparameterized_sample, GaussianLatent};
pub use layer::DenseLayer;
pub use loss::{kl_std_normal, mse};
pub use math::Matrix;
pub use tape::Tape;

use num_traits::Float;

/// Scalar bound for the numeric core. Implemented by `f32` and `f64`.
pub trait Real:
    Float + num_traits::NumAssign + num_traits::FromPrimitive + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Default + 'static
{
    /// Lossy conversion from `f64`, used for constants and RNG draws.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from(v).expect("finite f64 converts to any Real")
    }
}

impl<T> Real for T where
    T: Float + num_traits::NumAssign + num_traits::FromPrimitive + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Default + 'static
{
}

/// Exponential linear unit applied elementwise: `x` for `x > 0`, else `exp(x) - 1`.
pub fn elu<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| elu_scalar(v)).collect()
}

#[inline]
pub(crate) fn elu_scalar<F: Real>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        v.exp() - F::one()
    }
}

/// Derivative of ELU expressed through its output: `1` for `x > 0`, else `y + 1`.
#[inline]
pub(crate) fn elu_grad_from_output<F: Real>(y: F) -> F {
    if y > F::zero() {
        F::one()
    } else {
        y + F::one()
    }
}

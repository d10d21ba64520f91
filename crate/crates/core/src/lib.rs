//! Core library: a minimal dense-network numeric stack, a deterministic
//! kinematic pick-and-place environment, the behaviour-based control stack
//! (feature extractor, reactive heads, actor-critic), activation capture with
//! a latent-state VAE, and analysis utilities for convergence and
//! latent-structure reporting.
//!
//! The numeric core (`nn`) is generic over the scalar type via `num-traits`;
//! the rest of the pipeline is pinned to `f64` through the [`Scalar`] alias so
//! that training runs and persisted artifacts are bit-reproducible.

pub mod analysis;
pub mod bbrl;
pub mod env;
pub mod introspection;
pub mod nn;
pub mod params;
pub mod rng;

/// Scalar type used by the full training pipeline and all persisted artifacts.
pub type Scalar = f64;

/// Concrete aliases over the generic numeric core.
pub type Matrix = nn::math::Matrix<Scalar>;
pub type DenseLayer = nn::layer::DenseLayer<Scalar>;
pub type GaussianLatent = nn::gaussian::GaussianLatent<Scalar>;
pub type Tape = nn::tape::Tape<Scalar>;
pub type AdamState = nn::adam::AdamState<Scalar>;
pub type AdamParams = nn::adam::AdamParams<Scalar>;

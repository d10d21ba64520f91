//! Bias-corrected Adam on flat parameter blocks.

use super::Real;

/// Optimiser hyperparameters, shared across parameter blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams<F> {
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Real> Default for AdamParams<F> {
    fn default() -> Self {
        AdamParams {
            learning_rate: F::from_f64_lossy(1e-3),
            beta1: F::from_f64_lossy(0.9),
            beta2: F::from_f64_lossy(0.999),
            epsilon: F::from_f64_lossy(1e-8),
        }
    }
}

impl<F: Real> AdamParams<F> {
    pub fn with_learning_rate(lr: F) -> Self {
        AdamParams { learning_rate: lr, ..Default::default() }
    }

    pub fn validate(&self) {
        assert!(self.learning_rate > F::zero(), "learning_rate must be positive");
        assert!(self.beta1 > F::zero() && self.beta1 < F::one(), "beta1 must lie in (0,1)");
        assert!(self.beta2 > F::zero() && self.beta2 < F::one(), "beta2 must lie in (0,1)");
        assert!(self.epsilon > F::zero(), "epsilon must be positive");
    }
}

/// Per-block moment estimates. `step_count` increases by one per update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub first_moment: Vec<F>,
    pub second_moment: Vec<F>,
    pub step_count: u64,
    pub params: AdamParams<F>,
}

impl<F: Real> AdamState<F> {
    pub fn new(len: usize, params: AdamParams<F>) -> Self {
        params.validate();
        AdamState {
            first_moment: vec![F::zero(); len],
            second_moment: vec![F::zero(); len],
            step_count: 0,
            params,
        }
    }
}

/// One bias-corrected Adam update applied in place.
///
/// Panics on shape mismatches and on non-finite gradients, naming `block` so
/// the failing parameter block is identifiable.
pub fn adam_step<F: Real>(block: &str, params: &mut [F], grads: &[F], state: &mut AdamState<F>) {
    assert_eq!(params.len(), grads.len(), "adam_step({block}): params/grads length mismatch");
    assert_eq!(params.len(), state.first_moment.len(), "adam_step({block}): state length mismatch");
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        panic!("adam_step({block}): non-finite gradient at index {i}");
    }

    state.step_count += 1;
    let hp = state.params;
    let t = state.step_count as i32;
    let bias1 = F::one() - hp.beta1.powi(t);
    let bias2 = F::one() - hp.beta2.powi(t);
    let one = F::one();

    for i in 0..params.len() {
        let g = grads[i];
        let m = &mut state.first_moment[i];
        *m = hp.beta1 * *m + (one - hp.beta1) * g;
        let v = &mut state.second_moment[i];
        *v = hp.beta2 * *v + (one - hp.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        params[i] = params[i] - hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
    debug_assert!(params.iter().all(|p| p.is_finite()), "adam_step({block}): non-finite parameter after update");
}

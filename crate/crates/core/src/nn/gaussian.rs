//! Diagonal Gaussian latent parameters and the reparameterization trick.

use rand::Rng;
use rand_distr::StandardNormal;

use super::Real;

/// Bounds applied to log-variances before exponentiation.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

/// Mean and log-variance of a diagonal Gaussian `q(z|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent<F> {
    pub mu: Vec<F>,
    pub logvar: Vec<F>,
}

impl<F: Real> GaussianLatent<F> {
    pub fn new(mu: Vec<F>, logvar: Vec<F>) -> Self {
        assert_eq!(mu.len(), logvar.len(), "mu/logvar length mismatch: {} vs {}", mu.len(), logvar.len());
        debug_assert!(mu.iter().chain(&logvar).all(|v| v.is_finite()), "non-finite latent parameters");
        GaussianLatent { mu, logvar }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Clamp a log-variance into `[LOGVAR_MIN, LOGVAR_MAX]`.
#[inline]
pub fn clamp_logvar<F: Real>(lv: F) -> F {
    let lo = F::from_f64_lossy(LOGVAR_MIN);
    let hi = F::from_f64_lossy(LOGVAR_MAX);
    lv.max(lo).min(hi)
}

/// Draw `z = mu + exp(0.5·logvar) ⊙ ε` with `ε ~ N(0, I)` from `rng`.
pub fn reparameterized_sample<F: Real, R: Rng>(latent: &GaussianLatent<F>, rng: &mut R) -> Vec<F> {
    let eps: Vec<F> = (0..latent.dim()).map(|_| F::from_f64_lossy(rng.sample(StandardNormal))).collect();
    reparameterize(latent, &eps)
}

/// The deterministic half of the trick, split out so training can record `ε`.
pub fn reparameterize<F: Real>(latent: &GaussianLatent<F>, eps: &[F]) -> Vec<F> {
    assert_eq!(eps.len(), latent.dim());
    let half = F::from_f64_lossy(0.5);
    latent
        .mu
        .iter()
        .zip(&latent.logvar)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + (half * clamp_logvar(lv)).exp() * e)
        .collect()
}

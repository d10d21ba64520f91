//! Loss primitives: mean-squared error and the closed-form KL divergence of a
//! diagonal Gaussian against the standard normal.

use super::gaussian::GaussianLatent;
use super::Real;

/// Mean over elements of squared differences.
pub fn mse<F: Real>(x_real: &[F], x_recons: &[F]) -> F {
    assert_eq!(
        x_real.len(),
        x_recons.len(),
        "mse dimension mismatch: {} vs {}",
        x_real.len(),
        x_recons.len()
    );
    assert!(!x_real.is_empty(), "mse of empty vectors");
    let n = F::from_f64_lossy(x_real.len() as f64);
    let sum: F = x_real
        .iter()
        .zip(x_recons)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum();
    sum / n
}

/// `KL(N(mu, diag(exp(logvar))) || N(0, I))`, summed over dimensions:
/// `Σ_i 0.5·(exp(logvar_i) + mu_i² − 1 − logvar_i)`. Always ≥ 0.
pub fn kl_std_normal<F: Real>(latent: &GaussianLatent<F>) -> F {
    let half = F::from_f64_lossy(0.5);
    latent
        .mu
        .iter()
        .zip(&latent.logvar)
        .map(|(&m, &lv)| half * (lv.exp() + m * m - F::one() - lv))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_identical_vectors_is_zero() {
        let v = vec![0.3, -1.2, 4.5];
        assert_eq!(mse(&v, &v), 0.0);
    }

    #[test]
    fn mse_unit_offsets() {
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn mse_hand_computed() {
        // ((1-1)^2 + (2-1)^2 + (3-1)^2) / 3 = 5/3
        let got: f64 = mse(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        assert!((got - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "mse dimension mismatch")]
    fn mse_length_mismatch_panics() {
        mse(&[1.0], &[1.0, 2.0]);
    }

    #[test]
    fn kl_of_standard_normal_is_zero() {
        for dim in [1, 5, 50] {
            let latent = GaussianLatent::new(vec![0.0; dim], vec![0.0; dim]);
            assert_eq!(kl_std_normal(&latent), 0.0);
        }
    }

    #[test]
    fn kl_unit_mean_closed_form() {
        let latent = GaussianLatent::new(vec![1.0f64], vec![0.0]);
        assert!((kl_std_normal(&latent) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_scaled_variance_closed_form() {
        // mu = (0,0), logvar = (ln 2, ln 2): 2 * 0.5 * (2 - 1 - ln 2)
        let lv = 2.0f64.ln();
        let latent = GaussianLatent::new(vec![0.0, 0.0], vec![lv, lv]);
        let expected = 2.0 * 0.5 * (2.0 - 1.0 - lv);
        assert!((kl_std_normal(&latent) - expected).abs() < 1e-12);
        assert!((expected - 0.3068528194400547).abs() < 1e-12);
    }
}

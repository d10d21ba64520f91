//! Fully connected layer with variance-preserving initialisation.

use rand::Rng;

use super::math::{affine_vec, Matrix};
use super::Real;

/// A dense layer: `weights` is `(out_features × in_features)` row-major.
/// Dimensions are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F> {
    pub weights: Matrix<F>,
    pub biases: Vec<F>,
}

impl<F: Real> DenseLayer<F> {
    /// Zero-initialised layer of the given shape.
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        DenseLayer { weights: Matrix::zeros(out_features, in_features), biases: vec![F::zero(); out_features] }
    }

    /// Weights drawn uniformly from `±gain·sqrt(6/(fan_in+fan_out))`, biases zero.
    pub fn init<R: Rng>(in_features: usize, out_features: usize, gain: f64, rng: &mut R) -> Self {
        let bound = gain * (6.0 / (in_features + out_features) as f64).sqrt();
        let mut weights = Matrix::zeros(out_features, in_features);
        for w in weights.data_mut() {
            *w = F::from_f64_lossy(rng.gen_range(-bound..bound));
        }
        DenseLayer { weights, biases: vec![F::zero(); out_features] }
    }

    pub fn in_features(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_features(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.biases.len()
    }

    /// `weights · input + biases`. Panics on a dimension mismatch.
    pub fn forward(&self, input: &[F]) -> Vec<F> {
        affine_vec(&self.weights, &self.biases, input)
    }

    /// True when every weight and bias is finite.
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite()) && self.biases.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_forward_returns_biases() {
        let mut layer = DenseLayer::<f64>::zeros(3, 2);
        layer.biases = vec![0.5, -1.5];
        assert_eq!(layer.forward(&[7.0, -2.0, 3.0]), vec![0.5, -1.5]);
    }

    #[test]
    fn identity_weights_forward_is_identity() {
        let mut layer = DenseLayer::<f64>::zeros(3, 3);
        for i in 0..3 {
            layer.weights[(i, i)] = 1.0;
        }
        let x = vec![1.0, -2.0, 0.25];
        assert_eq!(layer.forward(&x), x);
    }

    #[test]
    fn forward_matches_hand_computed_matvec() {
        // 3x2 layer applied to (1, 0) selects the first weight column + biases.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = DenseLayer::<f64>::init(2, 3, 1.0, &mut rng);
        let out = layer.forward(&[1.0, 0.0]);
        let expected: Vec<f64> =
            (0..3).map(|i| layer.weights[(i, 0)] + layer.biases[i]).collect();
        assert_eq!(out, expected);
    }

    #[test]
    #[should_panic(expected = "affine input length")]
    fn forward_dimension_mismatch_panics() {
        DenseLayer::<f64>::zeros(3, 2).forward(&[1.0, 2.0]);
    }

    #[test]
    fn init_respects_bound_and_seed() {
        let bound = (6.0f64 / (13.0 + 128.0)).sqrt();
        let a = DenseLayer::<f64>::init(13, 128, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let b = DenseLayer::<f64>::init(13, 128, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!(a.weights.iter().all(|w| w.abs() < bound));
        assert!(a.biases.iter().all(|&b| b == 0.0));
    }
}

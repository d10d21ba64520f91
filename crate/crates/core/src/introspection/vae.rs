//! The activation VAE: a four-layer encoder producing latent mean and log
//! variance, a three-layer decoder, and the training loop over collected
//! activation datasets.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::dataset::{split_dataset, ActivationDataset};
use crate::nn::gaussian::clamp_logvar;
use crate::nn::{elu, kl_std_normal, mse};
use crate::params::{layer_grads, register_layers, LayerOptimizer, ParamLayers};
use crate::rng::{substream_rng, Stream};
use crate::{AdamParams, DenseLayer, GaussianLatent, Matrix, Scalar, Tape};

/// Encoder `input → h1 → h2 → (latent, latent)`, decoder `latent → h2 → h1 →
/// input`. ELU after every hidden layer; the heads and the reconstruction
/// output are linear.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub enc1: DenseLayer,
    pub enc2: DenseLayer,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
    pub dec1: DenseLayer,
    pub dec2: DenseLayer,
    pub dec3: DenseLayer,
}

impl VaeModel {
    pub fn new<R: Rng>(
        input_dim: usize,
        hidden1: usize,
        hidden2: usize,
        latent_dim: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        VaeModel {
            enc1: DenseLayer::init(input_dim, hidden1, gain, rng),
            enc2: DenseLayer::init(hidden1, hidden2, gain, rng),
            mu_head: DenseLayer::init(hidden2, latent_dim, gain, rng),
            logvar_head: DenseLayer::init(hidden2, latent_dim, gain, rng),
            dec1: DenseLayer::init(latent_dim, hidden2, gain, rng),
            dec2: DenseLayer::init(hidden2, hidden1, gain, rng),
            dec3: DenseLayer::init(hidden1, input_dim, gain, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc1.in_features()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.out_features()
    }

    /// Encoder hidden widths `(h1, h2)`.
    pub fn encoder_widths(&self) -> (usize, usize) {
        (self.enc1.out_features(), self.enc2.out_features())
    }

    /// Decoder layer widths `(h2, h1, output)`.
    pub fn decoder_widths(&self) -> (usize, usize, usize) {
        (self.dec1.out_features(), self.dec2.out_features(), self.dec3.out_features())
    }
}

impl ParamLayers for VaeModel {
    fn layer_names(&self) -> Vec<String> {
        ["enc1", "enc2", "mu", "logvar", "dec1", "dec2", "dec3"].map(String::from).to_vec()
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        vec![&self.enc1, &self.enc2, &self.mu_head, &self.logvar_head, &self.dec1, &self.dec2, &self.dec3]
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        vec![
            &mut self.enc1,
            &mut self.enc2,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.dec1,
            &mut self.dec2,
            &mut self.dec3,
        ]
    }
}

/// Deterministic encoder pass; log variances are clamped.
pub fn vae_encode(vae: &VaeModel, x_real: &[Scalar]) -> GaussianLatent {
    assert_eq!(
        x_real.len(),
        vae.input_dim(),
        "vae_encode: input length {} != {}",
        x_real.len(),
        vae.input_dim()
    );
    let h1 = elu(&vae.enc1.forward(x_real));
    let h2 = elu(&vae.enc2.forward(&h1));
    let mu = vae.mu_head.forward(&h2);
    let logvar = vae.logvar_head.forward(&h2).into_iter().map(clamp_logvar).collect();
    GaussianLatent::new(mu, logvar)
}

/// Decoder pass from a latent sample to a reconstruction.
pub fn vae_decode(vae: &VaeModel, z: &[Scalar]) -> Vec<Scalar> {
    assert_eq!(z.len(), vae.latent_dim(), "vae_decode: input length {} != {}", z.len(), vae.latent_dim());
    let h1 = elu(&vae.dec1.forward(z));
    let h2 = elu(&vae.dec2.forward(&h1));
    vae.dec3.forward(&h2)
}

/// Reconstruction error plus latent regulariser: `mse + kl`, KL weighted 1.
pub fn vae_loss(x_real: &[Scalar], x_recons: &[Scalar], latent: &GaussianLatent) -> Scalar {
    mse(x_real, x_recons) + kl_std_normal(latent)
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub epoch: u32,
    pub train: Scalar,
    pub validation: Scalar,
}

#[derive(Debug, Error)]
pub enum VaeTrainError {
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: u32, batch: usize },
}

/// Training hyperparameters and architecture sizes.
#[derive(Debug, Clone)]
pub struct TrainVaeConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub hidden1: usize,
    pub hidden2: usize,
    pub latent_dim: usize,
    pub init_gain: f64,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for TrainVaeConfig {
    fn default() -> Self {
        TrainVaeConfig {
            epochs: 100,
            batch_size: 128,
            train_fraction: 0.8,
            hidden1: 400,
            hidden2: 128,
            latent_dim: 50,
            init_gain: 1.0,
            adam: AdamParams::default(),
            seed: 0,
        }
    }
}

fn batch_matrix(ds: &ActivationDataset, indices: &[usize]) -> Matrix {
    let dim = ds.activation_dim();
    let mut flat = Vec::with_capacity(indices.len() * dim);
    for &i in indices {
        flat.extend_from_slice(&ds.records[i].activations);
    }
    Matrix::from_vec(indices.len(), dim, flat)
}

fn noise_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut flat = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let e: Scalar = rng.sample(StandardNormal);
        flat.push(e);
    }
    Matrix::from_vec(rows, cols, flat)
}

/// One taped forward over a batch. Returns the scalar loss node and the tape.
fn batch_loss(vae: &VaeModel, x: Matrix, eps: Matrix) -> (Tape, crate::nn::tape::Node, Vec<crate::nn::tape::LayerRef>) {
    let mut tape = Tape::new();
    let refs = register_layers(&mut tape, vae);
    let (enc1, enc2, mu_head, logvar_head, dec1, dec2, dec3) =
        (refs[0], refs[1], refs[2], refs[3], refs[4], refs[5], refs[6]);
    let target = x.clone();
    let input = tape.constant(x);
    let h = tape.affine(input, enc1);
    let h = tape.elu(h);
    let h = tape.affine(h, enc2);
    let h = tape.elu(h);
    let mu = tape.affine(h, mu_head);
    let logvar = tape.affine(h, logvar_head);
    let logvar = tape.clamp_logvar(logvar);
    let z = tape.reparam(mu, logvar, eps);
    let d = tape.affine(z, dec1);
    let d = tape.elu(d);
    let d = tape.affine(d, dec2);
    let d = tape.elu(d);
    let recon = tape.affine(d, dec3);
    let recon_loss = tape.mean_squared_error(recon, target);
    let kl = tape.kl_to_std_normal(mu, logvar);
    let loss = tape.add_scaled(&[(recon_loss, 1.0), (kl, 1.0)]);
    (tape, loss, refs)
}

/// Train a fresh VAE on the dataset. Returns the model and per-epoch loss
/// curves; the reconstruction path samples the latent via reparameterization
/// throughout.
pub fn train_vae(
    ds: &ActivationDataset,
    cfg: &TrainVaeConfig,
) -> Result<(VaeModel, Vec<EpochLoss>), VaeTrainError> {
    let mut init_rng = substream_rng(cfg.seed, Stream::Init, 100);
    let mut vae =
        VaeModel::new(ds.activation_dim(), cfg.hidden1, cfg.hidden2, cfg.latent_dim, cfg.init_gain, &mut init_rng);

    let mut split_rng = substream_rng(cfg.seed, Stream::DataOrder, 0);
    let (train_idx, val_idx) = split_dataset(ds, cfg.train_fraction, &mut split_rng);

    let mut opt = LayerOptimizer::new(&vae, cfg.adam);
    let mut curves = Vec::with_capacity(cfg.epochs as usize);

    for epoch in 0..cfg.epochs {
        let mut order_rng = substream_rng(cfg.seed, Stream::DataOrder, 1 + epoch as u64);
        let mut eps_rng = substream_rng(cfg.seed, Stream::LatentSample, epoch as u64);
        let mut order = train_idx.clone();
        use rand::seq::SliceRandom;
        order.shuffle(&mut order_rng);

        let mut train_loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let x = batch_matrix(ds, chunk);
            let eps = noise_matrix(chunk.len(), cfg.latent_dim, &mut eps_rng);
            let (mut tape, loss, refs) = batch_loss(&vae, x, eps);
            let loss_value = tape.scalar(loss);
            if !loss_value.is_finite() {
                return Err(VaeTrainError::NonFiniteLoss { epoch, batch: batch_no });
            }
            train_loss_sum += loss_value * chunk.len() as f64;
            tape.backward(loss);
            let grads = layer_grads(&tape, &refs);
            opt.step(&mut vae, &grads);
        }

        let mut val_loss_sum = 0.0;
        for chunk in val_idx.chunks(cfg.batch_size) {
            let x = batch_matrix(ds, chunk);
            let eps = noise_matrix(chunk.len(), cfg.latent_dim, &mut eps_rng);
            let (tape, loss, _refs) = batch_loss(&vae, x, eps);
            val_loss_sum += tape.scalar(loss) * chunk.len() as f64;
        }

        curves.push(EpochLoss {
            epoch,
            train: train_loss_sum / train_idx.len() as f64,
            validation: val_loss_sum / val_idx.len().max(1) as f64,
        });
    }
    Ok((vae, curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::introspection::collect_activation_dataset;
    use crate::bbrl::FeatureExtractor;
    use crate::env::PickPlaceEnv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_vae() -> VaeModel {
        VaeModel::new(256, 400, 128, 50, 1.0, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn architecture_widths() {
        let vae = paper_vae();
        assert_eq!(vae.input_dim(), 256);
        assert_eq!(vae.encoder_widths(), (400, 128));
        assert_eq!(vae.latent_dim(), 50);
        assert_eq!(vae.decoder_widths(), (128, 400, 256));
    }

    #[test]
    fn encode_shapes_and_determinism() {
        let vae = paper_vae();
        let x: Vec<Scalar> = (0..256).map(|i| (i as f64 * 0.01).sin()).collect();
        let a = vae_encode(&vae, &x);
        let b = vae_encode(&vae, &x);
        assert_eq!(a.mu.len(), 50);
        assert_eq!(a.logvar.len(), 50);
        assert_eq!(a, b, "encode has no stochastic path");
    }

    #[test]
    fn zero_encoder_weights_give_bias_means() {
        let mut vae = paper_vae();
        vae.enc1 = DenseLayer::zeros(256, 400);
        vae.enc2 = DenseLayer::zeros(400, 128);
        vae.mu_head = DenseLayer::zeros(128, 50);
        vae.mu_head.biases = (0..50).map(|i| i as f64 * 0.1).collect();
        let latent = vae_encode(&vae, &vec![1.0; 256]);
        assert_eq!(latent.mu, vae.mu_head.biases);
    }

    #[test]
    fn decode_shapes_and_zero_weights() {
        let vae = paper_vae();
        let z = vec![0.3; 50];
        assert_eq!(vae_decode(&vae, &z).len(), 256);

        let mut zeroed = paper_vae();
        zeroed.dec1 = DenseLayer::zeros(50, 128);
        zeroed.dec2 = DenseLayer::zeros(128, 400);
        zeroed.dec3 = DenseLayer::zeros(400, 256);
        zeroed.dec3.biases = (0..256).map(|i| i as f64).collect();
        assert_eq!(vae_decode(&zeroed, &z), zeroed.dec3.biases);
    }

    #[test]
    #[should_panic(expected = "vae_encode: input length")]
    fn encode_rejects_wrong_dimension() {
        vae_encode(&paper_vae(), &vec![0.0; 255]);
    }

    #[test]
    fn loss_is_additive_and_bounded_below_by_kl() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng as _;
        for _ in 0..100 {
            let x: Vec<Scalar> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<Scalar> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let latent = GaussianLatent::new(
                (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let total = vae_loss(&x, &y, &latent);
            assert_eq!(total, mse(&x, &y) + kl_std_normal(&latent));
            assert!(total >= kl_std_normal(&latent));
        }
    }

    #[test]
    fn perfect_reconstruction_standard_latent_is_zero_loss() {
        let x = vec![0.5; 8];
        let latent = GaussianLatent::new(vec![0.0; 4], vec![0.0; 4]);
        assert_eq!(vae_loss(&x, &x, &latent), 0.0);
    }

    fn tiny_dataset() -> ActivationDataset {
        let env = PickPlaceEnv::default();
        let fe = FeatureExtractor::new(13, 8, 8, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        collect_activation_dataset(&env, &fe, 30, 0.0, "fe-test", 7)
    }

    fn tiny_cfg() -> TrainVaeConfig {
        TrainVaeConfig {
            epochs: 10,
            batch_size: 64,
            hidden1: 16,
            hidden2: 8,
            latent_dim: 4,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn training_records_one_entry_per_epoch_and_improves() {
        let ds = tiny_dataset();
        let (_vae, curves) = train_vae(&ds, &tiny_cfg()).unwrap();
        assert_eq!(curves.len(), 10);
        for (i, c) in curves.iter().enumerate() {
            assert_eq!(c.epoch, i as u32);
            assert!(c.train.is_finite() && c.validation.is_finite());
        }
        assert!(
            curves[9].validation < curves[0].validation,
            "validation did not improve: {} -> {}",
            curves[0].validation,
            curves[9].validation
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_dataset();
        let (vae_a, curves_a) = train_vae(&ds, &tiny_cfg()).unwrap();
        let (vae_b, curves_b) = train_vae(&ds, &tiny_cfg()).unwrap();
        assert_eq!(vae_a, vae_b);
        assert_eq!(curves_a, curves_b);
    }
}

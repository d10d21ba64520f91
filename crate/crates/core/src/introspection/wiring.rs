//! The wiring variants: how the actor-critic input is assembled from FE
//! features and/or the VAE latent statistics.

use rand::Rng;

use crate::nn::reparameterized_sample;
use crate::{GaussianLatent, Scalar};

/// The five input wirings. Each value fixes the actor-critic input length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WiringVariant {
    /// FE features only (the unmodified stack).
    Baseline,
    /// FE features concatenated with the latent means.
    ConcatFeaturesMeans,
    /// Latent means only.
    MeansOnly,
    /// Latent means concatenated with log variances.
    MeansLogvar,
    /// A reparameterized sample from the latent distribution.
    SampledLatent,
}

impl WiringVariant {
    pub const ALL: [WiringVariant; 5] = [
        WiringVariant::Baseline,
        WiringVariant::ConcatFeaturesMeans,
        WiringVariant::MeansOnly,
        WiringVariant::MeansLogvar,
        WiringVariant::SampledLatent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WiringVariant::Baseline => "baseline",
            WiringVariant::ConcatFeaturesMeans => "concat-features-means",
            WiringVariant::MeansOnly => "means-only",
            WiringVariant::MeansLogvar => "means-logvar",
            WiringVariant::SampledLatent => "sampled-latent",
        }
    }

    pub fn parse(s: &str) -> Option<WiringVariant> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn needs_vae(self) -> bool {
        !matches!(self, WiringVariant::Baseline)
    }

    /// Actor-critic input length for the given feature and latent sizes.
    pub fn input_dim(self, feature_dim: usize, latent_dim: usize) -> usize {
        match self {
            WiringVariant::Baseline => feature_dim,
            WiringVariant::ConcatFeaturesMeans => feature_dim + latent_dim,
            WiringVariant::MeansOnly => latent_dim,
            WiringVariant::MeansLogvar => 2 * latent_dim,
            WiringVariant::SampledLatent => latent_dim,
        }
    }
}

/// An assembled actor-critic input, tagged with the wiring that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AcInput {
    pub values: Vec<Scalar>,
    pub variant: WiringVariant,
}

impl AcInput {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Assemble the actor-critic input for one timestep.
///
/// `latent` is required for every variant except Baseline (hard error when
/// missing); `rng` is consumed only by SampledLatent.
pub fn build_ac_input<R: Rng>(
    variant: WiringVariant,
    features: &[Scalar],
    latent: Option<&GaussianLatent>,
    rng: &mut R,
) -> AcInput {
    let latent_for = |v: WiringVariant| -> &GaussianLatent {
        latent.unwrap_or_else(|| panic!("missing latent for variant {}", v.name()))
    };
    let values = match variant {
        WiringVariant::Baseline => features.to_vec(),
        WiringVariant::ConcatFeaturesMeans => {
            let l = latent_for(variant);
            let mut v = features.to_vec();
            v.extend_from_slice(&l.mu);
            v
        }
        WiringVariant::MeansOnly => latent_for(variant).mu.clone(),
        WiringVariant::MeansLogvar => {
            let l = latent_for(variant);
            let mut v = l.mu.clone();
            v.extend_from_slice(&l.logvar);
            v
        }
        WiringVariant::SampledLatent => reparameterized_sample(latent_for(variant), rng),
    };
    AcInput { values, variant }
}

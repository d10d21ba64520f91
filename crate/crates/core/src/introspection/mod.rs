//! Activation dataset collection, the VAE that learns internal states, and
//! assembly of the actor-critic input for the wiring variants.

mod dataset;
mod vae;
mod wiring;

pub use dataset::{
    collect_activation_dataset, read_jsonl, split_dataset, write_jsonl, ActivationDataset,
    ActivationRecord, DatasetError, DatasetProvenance,
};
pub use vae::{
    train_vae, vae_decode, vae_encode, vae_loss, EpochLoss, TrainVaeConfig, VaeModel, VaeTrainError,
};
pub use wiring::{build_ac_input, AcInput, WiringVariant};

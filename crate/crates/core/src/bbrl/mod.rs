//! The behaviour-based control stack: feature extractor with activation
//! capture, per-behaviour reactive heads, and the actor-critic behaviour
//! chooser, plus their training procedures.

mod log;
mod networks;
mod training;

pub use log::{EpisodeRecord, TrainingLog};
pub use networks::{
    actor_critic_forward, fe_forward, reactive_forward, select_behaviour, softmax, ActorCritic,
    FeatureExtractor, ReactiveNetwork, SelectMode,
};
pub use training::{train_actor_critic, train_behaviour_stage, AcTrainConfig, StageConfig, StageProgress, StageResult};

//! Per-episode training records for actor-critic runs.

use crate::introspection::WiringVariant;
use crate::Scalar;

/// One episode of actor-critic training: outcome, losses, and the critic's
/// per-behaviour mean value over the timesteps where each behaviour was
/// chosen (absent when never chosen).
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub success: bool,
    pub episode_return: Scalar,
    pub steps: u32,
    pub actor_loss: Scalar,
    pub critic_loss: Scalar,
    pub entropy: Scalar,
    /// Indexed by `BehaviourId::index()`.
    pub behaviour_values: [Option<Scalar>; 3],
    pub behaviour_counts: [u32; 3],
}

/// A full run's log plus its identifying metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub seed: u64,
    pub variant: WiringVariant,
    pub noise_level: Scalar,
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub fn success_flags(&self) -> Vec<bool> {
        self.episodes.iter().map(|e| e.success).collect()
    }
}

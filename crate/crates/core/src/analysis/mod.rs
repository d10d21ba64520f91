//! Latent-space embedding and labelling, success/convergence metrics,
//! per-behaviour state-value curves, and cross-variant comparison reports.

mod embed;
mod metrics;

pub use embed::{embed_latents, label_structure_score, EmbedMethod, EmbeddedPoint, TsneParams};
pub use metrics::{
    compare_runs, episodes_to_threshold, moving_average_success, state_value_summary, ComparisonRow,
    ConvergenceReport, RunStatus,
};

//! Success curves, convergence thresholds, state-value summaries, and the
//! cross-run comparison table.

use crate::bbrl::TrainingLog;
use crate::introspection::WiringVariant;
use crate::Scalar;

/// Trailing-window moving average of success flags, in percent. Episodes
/// before the window fills use the running mean over the available prefix.
pub fn moving_average_success(log: &TrainingLog, window: usize) -> Vec<(u32, Scalar)> {
    assert!(window >= 1, "window must be at least 1");
    let flags = log.success_flags();
    let mut curve = Vec::with_capacity(flags.len());
    let mut in_window = 0usize;
    for i in 0..flags.len() {
        if flags[i] {
            in_window += 1;
        }
        if i >= window && flags[i - window] {
            in_window -= 1;
        }
        let denom = (i + 1).min(window);
        curve.push((i as u32, 100.0 * in_window as Scalar / denom as Scalar));
    }
    curve
}

/// First episode at which the curve meets or exceeds the threshold.
pub fn episodes_to_threshold(curve: &[(u32, Scalar)], threshold_percent: Scalar) -> Option<u32> {
    curve.iter().find(|(_, v)| *v >= threshold_percent).map(|(e, _)| *e)
}

/// Mean critic value per behaviour over the final `tail_episodes`, skipping
/// episodes where a behaviour was never chosen; behaviours absent from the
/// whole tail report `None`.
pub fn state_value_summary(log: &TrainingLog, tail_episodes: usize) -> [Option<Scalar>; 3] {
    assert!(
        tail_episodes <= log.episodes.len(),
        "tail {} exceeds logged episodes {}",
        tail_episodes,
        log.episodes.len()
    );
    let tail = &log.episodes[log.episodes.len() - tail_episodes..];
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for e in tail {
        for (b, value) in e.behaviour_values.iter().enumerate() {
            if let Some(v) = value {
                sums[b] += v;
                counts[b] += 1;
            }
        }
    }
    std::array::from_fn(|b| (counts[b] > 0).then(|| sums[b] / counts[b] as Scalar))
}

/// Whether a run produced a usable log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Convergence summary of one `(variant, noise level, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub variant: WiringVariant,
    pub noise_level: Scalar,
    pub seed: u64,
    pub status: RunStatus,
    pub episodes_to_threshold: Option<u32>,
    pub final_success: Scalar,
    pub behaviour_values: [Option<Scalar>; 3],
}

impl ConvergenceReport {
    /// Summarise a completed run.
    pub fn from_log(log: &TrainingLog, window: usize, threshold_percent: Scalar, tail: usize) -> Self {
        let curve = moving_average_success(log, window);
        let episodes = episodes_to_threshold(&curve, threshold_percent);
        if let Some(e) = episodes {
            debug_assert!((e as usize) < log.episodes.len());
        }
        ConvergenceReport {
            variant: log.variant,
            noise_level: log.noise_level,
            seed: log.seed,
            status: RunStatus::Ok,
            episodes_to_threshold: episodes,
            final_success: curve.last().map_or(0.0, |(_, v)| *v),
            behaviour_values: state_value_summary(log, tail.min(log.episodes.len())),
        }
    }

    /// Placeholder for a run that failed to produce a log.
    pub fn failed(variant: WiringVariant, noise_level: Scalar, seed: u64) -> Self {
        ConvergenceReport {
            variant,
            noise_level,
            seed,
            status: RunStatus::Failed,
            episodes_to_threshold: None,
            final_success: 0.0,
            behaviour_values: [None; 3],
        }
    }
}

/// One aggregated row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variant: WiringVariant,
    pub noise_level: Scalar,
    pub seeds: usize,
    pub reached: usize,
    pub mean_episodes_to_threshold: Option<Scalar>,
    pub std_episodes_to_threshold: Option<Scalar>,
    pub mean_final_success: Scalar,
    pub std_final_success: Scalar,
    pub failed_seeds: Vec<u64>,
}

fn mean_std(values: &[Scalar]) -> (Scalar, Scalar) {
    let n = values.len() as Scalar;
    let mean = values.iter().sum::<Scalar>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<Scalar>() / n;
    (mean, var.sqrt())
}

/// Aggregate reports per `(variant, noise level)`: mean and population
/// standard deviation of episodes-to-threshold (over seeds that reached it)
/// and of final success. Rows sort by variant then noise; failed runs are
/// excluded from statistics and listed in `failed_seeds`.
pub fn compare_runs(reports: &[ConvergenceReport]) -> Vec<ComparisonRow> {
    assert!(!reports.is_empty(), "compare_runs needs at least one report");
    let mut keys: Vec<(usize, Scalar)> = Vec::new();
    for r in reports {
        let variant_idx = WiringVariant::ALL.iter().position(|v| *v == r.variant).unwrap();
        let key = (variant_idx, r.noise_level);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));

    keys.into_iter()
        .map(|(variant_idx, noise)| {
            let variant = WiringVariant::ALL[variant_idx];
            let group: Vec<&ConvergenceReport> =
                reports.iter().filter(|r| r.variant == variant && r.noise_level == noise).collect();
            let ok: Vec<&&ConvergenceReport> = group.iter().filter(|r| r.status == RunStatus::Ok).collect();
            let reached: Vec<Scalar> =
                ok.iter().filter_map(|r| r.episodes_to_threshold).map(|e| e as Scalar).collect();
            let finals: Vec<Scalar> = ok.iter().map(|r| r.final_success).collect();
            let (mean_e, std_e) = if reached.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&reached);
                (Some(m), Some(s))
            };
            let (mean_f, std_f) = if finals.is_empty() { (0.0, 0.0) } else { mean_std(&finals) };
            ComparisonRow {
                variant,
                noise_level: noise,
                seeds: group.len(),
                reached: reached.len(),
                mean_episodes_to_threshold: mean_e,
                std_episodes_to_threshold: std_e,
                mean_final_success: mean_f,
                std_final_success: std_f,
                failed_seeds: group
                    .iter()
                    .filter(|r| r.status == RunStatus::Failed)
                    .map(|r| r.seed)
                    .collect(),
            }
        })
        .collect()
}

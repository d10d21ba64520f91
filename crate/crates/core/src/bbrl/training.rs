//! Staged behaviour-cloning of the reactive heads and episodic advantage
//! actor-critic training of the behaviour chooser.

use super::log::{EpisodeRecord, TrainingLog};
use super::networks::{
    actor_critic_forward, fe_forward, reactive_forward, select_behaviour, ActorCritic, FeatureExtractor,
    ReactiveNetwork, SelectMode,
};
use crate::env::{BehaviourId, LowLevelAction, PickPlaceEnv};
use crate::introspection::{build_ac_input, vae_encode, VaeModel, WiringVariant};
use crate::params::{layer_grads, register_layers, LayerOptimizer};
use crate::rng::{stream_rng, Stream};
use crate::{AdamParams, Matrix, Scalar, Tape};

/// Tracks which behaviour stages completed, enforcing the training order
/// Approach → Grasp → Retract.
#[derive(Debug, Clone, Default)]
pub struct StageProgress {
    completed: [bool; 3],
}

impl StageProgress {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_complete(&self, behaviour: BehaviourId) -> bool {
        self.completed[behaviour.index()]
    }

    pub fn all_complete(&self) -> bool {
        self.completed.iter().all(|&c| c)
    }

    fn assert_ready_for(&self, behaviour: BehaviourId) {
        let idx = behaviour.index();
        let expected: usize = self.completed.iter().filter(|&&c| c).count();
        assert_eq!(
            idx, expected,
            "stage order violation: {} trained out of order (stages completed: {})",
            behaviour.label(),
            expected
        );
    }
}

/// Stage-training hyperparameters.
#[derive(Debug, Clone)]
pub struct StageConfig {
    pub episodes: u32,
    /// Minibatch gradient steps per episode, drawn from the replay of all
    /// pairs collected so far in the stage.
    pub updates_per_episode: u32,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            episodes: 500,
            updates_per_episode: 4,
            batch_size: 256,
            adam: AdamParams::default(),
            seed: 0,
        }
    }
}

/// Per-episode behaviour-cloning losses for one stage.
#[derive(Debug, Clone)]
pub struct StageResult {
    pub behaviour: BehaviourId,
    pub losses: Vec<Scalar>,
}

/// Regression target for one behaviour's head, in head-output layout.
fn expert_target(action: &LowLevelAction, behaviour: BehaviourId) -> Vec<Scalar> {
    match behaviour {
        BehaviourId::Grasp => {
            vec![action.delta_pos[0], action.delta_pos[1], action.delta_pos[2], action.rotation, action.gripper_cmd]
        }
        _ => action.delta_pos.to_vec(),
    }
}

/// Behaviour-clone one head onto the scripted expert.
///
/// During the stage, the trained behaviour executes its current head while
/// every other behaviour executes the expert; the head (and, only in the
/// Approach stage, the feature extractor) is regressed onto the expert's
/// actions with one Adam update per episode.
pub fn train_behaviour_stage(
    behaviour: BehaviourId,
    env: &PickPlaceEnv,
    fe: &mut FeatureExtractor,
    rn: &mut ReactiveNetwork,
    cfg: &StageConfig,
    progress: &mut StageProgress,
) -> StageResult {
    progress.assert_ready_for(behaviour);
    let train_fe = behaviour == BehaviourId::Approach;
    let stage_tag = behaviour.index() as u64;
    let mut reset_rng = crate::rng::substream_rng(cfg.seed, Stream::EnvReset, stage_tag);
    let mut order_rng = crate::rng::substream_rng(cfg.seed, Stream::DataOrder, stage_tag);

    let mut fe_opt = LayerOptimizer::new(fe, cfg.adam);
    let mut head_opt = LayerOptimizer::new(rn.head(behaviour), cfg.adam);
    let (scales, shifts) = rn.squash(behaviour);
    let obs_dim = fe.obs_dim();
    let out_dim = ReactiveNetwork::head_outputs(behaviour);

    // replay of every (observation, expert action) pair seen this stage
    let mut buffer_obs: Vec<Vec<Scalar>> = Vec::new();
    let mut buffer_target: Vec<Vec<Scalar>> = Vec::new();

    let mut losses = Vec::with_capacity(cfg.episodes as usize);
    for _ in 0..cfg.episodes {
        let (mut state, mut obs) = env.reset(&mut reset_rng);
        let mut fresh: Vec<usize> = Vec::new();
        loop {
            let scheduled = env.scripted_behaviour_schedule(&state);
            let expert = env.expert_action(&state, scheduled);
            let executed = if scheduled == behaviour {
                fresh.push(buffer_obs.len());
                buffer_obs.push(obs.0.clone());
                buffer_target.push(expert_target(&expert, behaviour));
                let (features, _) = fe_forward(fe, &obs);
                reactive_forward(rn, &features, scheduled)
            } else {
                expert
            };
            let (next, next_obs, _reward, done) = env.step(&state, scheduled, &executed);
            state = next;
            obs = next_obs;
            if done {
                break;
            }
        }

        if fresh.is_empty() {
            losses.push(Scalar::NAN);
            continue;
        }

        // loss on this episode's fresh pairs under the current parameters
        let fresh_loss: Scalar = fresh
            .iter()
            .map(|&i| {
                let (features, _) = fe_forward(fe, &crate::env::Observation(buffer_obs[i].clone()));
                let raw = rn.head(behaviour).forward_raw(&features);
                let pred: Vec<Scalar> = raw
                    .iter()
                    .zip(scales.iter().zip(&shifts))
                    .map(|(&u, (&s, &c))| s * u.tanh() + c)
                    .collect();
                crate::nn::mse(&pred, &buffer_target[i])
            })
            .sum::<Scalar>()
            / fresh.len() as Scalar;
        losses.push(fresh_loss);

        for _ in 0..cfg.updates_per_episode {
            let batch: Vec<usize> = if buffer_obs.len() <= cfg.batch_size {
                (0..buffer_obs.len()).collect()
            } else {
                rand::seq::index::sample(&mut order_rng, buffer_obs.len(), cfg.batch_size).into_vec()
            };
            let n = batch.len();
            let mut flat_obs = Vec::with_capacity(n * obs_dim);
            let mut flat_target = Vec::with_capacity(n * out_dim);
            for &i in &batch {
                flat_obs.extend_from_slice(&buffer_obs[i]);
                flat_target.extend_from_slice(&buffer_target[i]);
            }
            let x = Matrix::from_vec(n, obs_dim, flat_obs);
            let target = Matrix::from_vec(n, out_dim, flat_target);

            let mut tape = Tape::new();
            let fe_refs = if train_fe { register_layers(&mut tape, fe) } else { Vec::new() };
            let head_refs = register_layers(&mut tape, rn.head(behaviour));

            let features_node = if train_fe {
                let h = tape.constant(x);
                let h = tape.affine(h, fe_refs[0]);
                let h = tape.elu(h);
                let h = tape.affine(h, fe_refs[1]);
                tape.elu(h)
            } else {
                // FE frozen: features computed off-tape and fed as constants.
                let mut flat = Vec::with_capacity(n * fe.feature_dim());
                for i in 0..n {
                    let row = crate::env::Observation(x.row(i).to_vec());
                    let (features, _) = fe_forward(fe, &row);
                    flat.extend_from_slice(&features);
                }
                tape.constant(Matrix::from_vec(n, fe.feature_dim(), flat))
            };
            let h = tape.affine(features_node, head_refs[0]);
            let h = tape.elu(h);
            let raw = tape.affine(h, head_refs[1]);
            let squashed = tape.tanh(raw);
            let action = tape.col_scale_shift(squashed, scales.clone(), shifts.clone());
            let loss = tape.mean_squared_error(action, target);
            tape.backward(loss);

            if train_fe {
                let fe_grads = layer_grads(&tape, &fe_refs);
                fe_opt.step(fe, &fe_grads);
            }
            let head_grads = layer_grads(&tape, &head_refs);
            head_opt.step(rn.head_mut(behaviour), &head_grads);
        }
    }

    progress.completed[behaviour.index()] = true;
    StageResult { behaviour, losses }
}

/// Actor-critic training hyperparameters.
#[derive(Debug, Clone)]
pub struct AcTrainConfig {
    pub episodes: u32,
    pub gamma: Scalar,
    pub entropy_coef: Scalar,
    pub value_coef: Scalar,
    pub adam: AdamParams,
    pub noise_level: Scalar,
    pub seed: u64,
}

impl Default for AcTrainConfig {
    fn default() -> Self {
        AcTrainConfig {
            episodes: 2000,
            gamma: 0.99,
            entropy_coef: 0.01,
            value_coef: 1.0,
            adam: AdamParams::default(),
            noise_level: 0.0,
            seed: 0,
        }
    }
}

/// Episodic advantage actor-critic over frozen FE/reactive networks.
///
/// Per episode: roll out with sampled behaviours, compute discounted returns,
/// and apply exactly one Adam update from the episode batch. The actor loss
/// is `-log π(b)·(G - V)` with the advantage treated as a constant, the
/// critic loss is the squared advantage, and an entropy bonus encourages
/// exploration.
pub fn train_actor_critic(
    env: &PickPlaceEnv,
    fe: &FeatureExtractor,
    rn: &ReactiveNetwork,
    ac: &mut ActorCritic,
    variant: WiringVariant,
    vae: Option<&VaeModel>,
    cfg: &AcTrainConfig,
) -> TrainingLog {
    if variant.needs_vae() {
        assert!(vae.is_some(), "missing VAE for variant {}", variant.name());
    } else {
        assert!(vae.is_none(), "variant {} does not take a VAE", variant.name());
    }
    let latent_dim = vae.map_or(0, |v| v.latent_dim());
    assert_eq!(
        ac.input_dim(),
        variant.input_dim(fe.feature_dim(), latent_dim),
        "actor-critic input_dim does not match variant {}",
        variant.name()
    );

    let mut reset_rng = stream_rng(cfg.seed, Stream::EnvReset);
    let mut noise_rng = stream_rng(cfg.seed, Stream::Noise);
    let mut policy_rng = stream_rng(cfg.seed, Stream::Policy);
    let mut latent_rng = stream_rng(cfg.seed, Stream::LatentSample);
    let mut opt = LayerOptimizer::new(ac, cfg.adam);

    let input_dim = ac.input_dim();
    let mut log = TrainingLog {
        seed: cfg.seed,
        variant,
        noise_level: cfg.noise_level,
        episodes: Vec::with_capacity(cfg.episodes as usize),
    };

    for episode in 0..cfg.episodes {
        let (mut state, mut obs) = env.reset(&mut reset_rng);
        let mut inputs: Vec<Scalar> = Vec::new();
        let mut chosen: Vec<usize> = Vec::new();
        let mut rewards: Vec<Scalar> = Vec::new();
        let mut values: Vec<Scalar> = Vec::new();
        loop {
            let noisy = env.inject_noise(&obs, cfg.noise_level, &mut noise_rng);
            let (features, activations) = fe_forward(fe, &noisy);
            let latent = vae.map(|v| vae_encode(v, &activations));
            let input = build_ac_input(variant, &features, latent.as_ref(), &mut latent_rng);
            let (logits, value) = actor_critic_forward(ac, &input);
            let behaviour = select_behaviour(&logits, SelectMode::Sample, &mut policy_rng);
            let action = reactive_forward(rn, &features, behaviour);
            let (next, next_obs, reward, done) = env.step(&state, behaviour, &action);

            inputs.extend_from_slice(&input.values);
            chosen.push(behaviour.index());
            rewards.push(reward);
            values.push(value);
            state = next;
            obs = next_obs;
            if done {
                break;
            }
        }

        let steps = rewards.len();
        let mut returns = vec![0.0; steps];
        let mut g = 0.0;
        for t in (0..steps).rev() {
            g = rewards[t] + cfg.gamma * g;
            returns[t] = g;
        }
        let advantages: Vec<Scalar> = returns.iter().zip(&values).map(|(g, v)| g - v).collect();

        let x = Matrix::from_vec(steps, input_dim, inputs);
        let mut tape = Tape::new();
        let refs = register_layers(&mut tape, &*ac);
        let input_node = tape.constant(x);
        let h = tape.affine(input_node, refs[0]);
        let h = tape.elu(h);
        let logits = tape.affine(h, refs[1]);
        let value_preds = tape.affine(h, refs[2]);
        let log_probs = tape.log_softmax(logits);
        let t_inv = 1.0 / steps as Scalar;
        let pg_weights: Vec<Scalar> = advantages.iter().map(|a| -a * t_inv).collect();
        let actor_loss = tape.select_weighted_sum(log_probs, chosen.clone(), pg_weights);
        let critic_loss = tape.mean_squared_error(value_preds, Matrix::from_vec(steps, 1, returns));
        let entropy = tape.entropy_mean(log_probs);
        let total = tape.add_scaled(&[
            (actor_loss, 1.0),
            (critic_loss, cfg.value_coef),
            (entropy, -cfg.entropy_coef),
        ]);

        let actor_loss_v = tape.scalar(actor_loss);
        let critic_loss_v = tape.scalar(critic_loss);
        let entropy_v = tape.scalar(entropy);
        tape.backward(total);
        let grads = layer_grads(&tape, &refs);
        opt.step(ac, &grads);

        let mut behaviour_counts = [0u32; 3];
        let mut value_sums = [0.0; 3];
        for (&b, &v) in chosen.iter().zip(&values) {
            behaviour_counts[b] += 1;
            value_sums[b] += v;
        }
        let behaviour_values = std::array::from_fn(|i| {
            (behaviour_counts[i] > 0).then(|| value_sums[i] / behaviour_counts[i] as Scalar)
        });

        log.episodes.push(EpisodeRecord {
            episode,
            success: env.success(&state),
            episode_return: rewards.iter().sum(),
            steps: steps as u32,
            actor_loss: actor_loss_v,
            critic_loss: critic_loss_v,
            entropy: entropy_v,
            behaviour_values,
            behaviour_counts,
        });
    }
    log
}

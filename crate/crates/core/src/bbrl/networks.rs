//! Network definitions and inference paths for the control stack.

use rand::Rng;

use crate::env::{BehaviourId, LowLevelAction, Observation};
use crate::introspection::AcInput;
use crate::nn::elu;
use crate::params::ParamLayers;
use crate::{DenseLayer, Scalar};

/// Two fully connected layers extracting features from the observation.
/// The concatenated post-activation outputs of both layers form the
/// activation vector that downstream introspection consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub layer1: DenseLayer,
    pub layer2: DenseLayer,
}

impl FeatureExtractor {
    pub fn new<R: Rng>(obs_dim: usize, hidden1: usize, hidden2: usize, gain: f64, rng: &mut R) -> Self {
        FeatureExtractor {
            layer1: DenseLayer::init(obs_dim, hidden1, gain, rng),
            layer2: DenseLayer::init(hidden1, hidden2, gain, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.layer1.in_features()
    }

    pub fn feature_dim(&self) -> usize {
        self.layer2.out_features()
    }

    /// Total length of the captured activation vector.
    pub fn activation_dim(&self) -> usize {
        self.layer1.out_features() + self.layer2.out_features()
    }
}

impl ParamLayers for FeatureExtractor {
    fn layer_names(&self) -> Vec<String> {
        vec!["fe1".into(), "fe2".into()]
    }
    fn layers(&self) -> Vec<&DenseLayer> {
        vec![&self.layer1, &self.layer2]
    }
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        vec![&mut self.layer1, &mut self.layer2]
    }
}

/// Forward pass capturing both layers' post-activation outputs.
/// Returns `(features, activations)` where `activations = layer1 ++ layer2`.
pub fn fe_forward(fe: &FeatureExtractor, obs: &Observation) -> (Vec<Scalar>, Vec<Scalar>) {
    assert_eq!(
        obs.0.len(),
        fe.obs_dim(),
        "fe_forward: observation length {} != obs_dim {}",
        obs.0.len(),
        fe.obs_dim()
    );
    let h1 = elu(&fe.layer1.forward(&obs.0));
    let features = elu(&fe.layer2.forward(&h1));
    let mut activations = h1;
    activations.extend_from_slice(&features);
    (features, activations)
}

/// One reactive head: features -> hidden -> raw action outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveHead {
    pub hidden: DenseLayer,
    pub out: DenseLayer,
}

impl ReactiveHead {
    fn new<R: Rng>(feature_dim: usize, hidden_dim: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        // The output layer starts at zero so squashed actions begin at the
        // midpoint of their range regardless of the feature scale.
        ReactiveHead {
            hidden: DenseLayer::init(feature_dim, hidden_dim, gain, rng),
            out: DenseLayer::zeros(hidden_dim, outputs),
        }
    }

    /// Raw (pre-squash) outputs.
    pub fn forward_raw(&self, features: &[Scalar]) -> Vec<Scalar> {
        self.out.forward(&elu(&self.hidden.forward(features)))
    }
}

impl ParamLayers for ReactiveHead {
    fn layer_names(&self) -> Vec<String> {
        vec!["hidden".into(), "out".into()]
    }
    fn layers(&self) -> Vec<&DenseLayer> {
        vec![&self.hidden, &self.out]
    }
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        vec![&mut self.hidden, &mut self.out]
    }
}

/// Per-behaviour action heads. Approach and Retract emit 3 outputs
/// (delta position); Grasp emits 5 (delta + rotation + gripper command).
/// Outputs are tanh-squashed into the action bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveNetwork {
    pub approach: ReactiveHead,
    pub grasp: ReactiveHead,
    pub retract: ReactiveHead,
    /// Positional components are scaled to `[-max_step, max_step]`.
    pub max_step: Scalar,
}

impl ReactiveNetwork {
    pub fn new<R: Rng>(feature_dim: usize, hidden_dim: usize, max_step: Scalar, gain: f64, rng: &mut R) -> Self {
        ReactiveNetwork {
            approach: ReactiveHead::new(feature_dim, hidden_dim, 3, gain, rng),
            grasp: ReactiveHead::new(feature_dim, hidden_dim, 5, gain, rng),
            retract: ReactiveHead::new(feature_dim, hidden_dim, 3, gain, rng),
            max_step,
        }
    }

    pub fn head(&self, behaviour: BehaviourId) -> &ReactiveHead {
        match behaviour {
            BehaviourId::Approach => &self.approach,
            BehaviourId::Grasp => &self.grasp,
            BehaviourId::Retract => &self.retract,
        }
    }

    pub fn head_mut(&mut self, behaviour: BehaviourId) -> &mut ReactiveHead {
        match behaviour {
            BehaviourId::Approach => &mut self.approach,
            BehaviourId::Grasp => &mut self.grasp,
            BehaviourId::Retract => &mut self.retract,
        }
    }

    /// Output dimensionality of one behaviour's head.
    pub fn head_outputs(behaviour: BehaviourId) -> usize {
        match behaviour {
            BehaviourId::Grasp => 5,
            _ => 3,
        }
    }

    /// Per-column squash scales and shifts applied after tanh.
    pub fn squash(&self, behaviour: BehaviourId) -> (Vec<Scalar>, Vec<Scalar>) {
        let ms = self.max_step;
        match behaviour {
            BehaviourId::Grasp => (vec![ms, ms, ms, 1.0, 0.5], vec![0.0, 0.0, 0.0, 0.0, 0.5]),
            _ => (vec![ms, ms, ms], vec![0.0, 0.0, 0.0]),
        }
    }
}

impl ParamLayers for ReactiveNetwork {
    fn layer_names(&self) -> Vec<String> {
        BehaviourId::ALL
            .iter()
            .flat_map(|b| [format!("{}.hidden", b.label()), format!("{}.out", b.label())])
            .collect()
    }
    fn layers(&self) -> Vec<&DenseLayer> {
        BehaviourId::ALL.iter().flat_map(|&b| self.head(b).layers()).collect()
    }
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        vec![
            &mut self.approach.hidden,
            &mut self.approach.out,
            &mut self.grasp.hidden,
            &mut self.grasp.out,
            &mut self.retract.hidden,
            &mut self.retract.out,
        ]
    }
}

/// Squashed action for one behaviour. Approach keeps the gripper open,
/// Retract keeps it closed; only Grasp controls rotation and aperture.
pub fn reactive_forward(rn: &ReactiveNetwork, features: &[Scalar], behaviour: BehaviourId) -> LowLevelAction {
    let raw = rn.head(behaviour).forward_raw(features);
    let (scales, shifts) = rn.squash(behaviour);
    let squashed: Vec<Scalar> =
        raw.iter().zip(scales.iter().zip(&shifts)).map(|(&u, (&s, &c))| s * u.tanh() + c).collect();
    match behaviour {
        BehaviourId::Approach => LowLevelAction {
            delta_pos: [squashed[0], squashed[1], squashed[2]],
            rotation: 0.0,
            gripper_cmd: 1.0,
        },
        BehaviourId::Grasp => LowLevelAction {
            delta_pos: [squashed[0], squashed[1], squashed[2]],
            rotation: squashed[3],
            gripper_cmd: squashed[4],
        },
        BehaviourId::Retract => LowLevelAction {
            delta_pos: [squashed[0], squashed[1], squashed[2]],
            rotation: 0.0,
            gripper_cmd: 0.0,
        },
    }
}

/// Behaviour chooser: a shared trunk feeding an actor head (3 behaviour
/// logits) and a critic head (scalar state value).
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub trunk: DenseLayer,
    pub actor: DenseLayer,
    pub critic: DenseLayer,
}

impl ActorCritic {
    pub fn new<R: Rng>(input_dim: usize, hidden_dim: usize, gain: f64, rng: &mut R) -> Self {
        // Zero heads: the policy starts exactly uniform and the value at 0,
        // independent of the input scale.
        ActorCritic {
            trunk: DenseLayer::init(input_dim, hidden_dim, gain, rng),
            actor: DenseLayer::zeros(hidden_dim, 3),
            critic: DenseLayer::zeros(hidden_dim, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.in_features()
    }

    pub fn forward_raw(&self, input: &[Scalar]) -> (Vec<Scalar>, Scalar) {
        let h = elu(&self.trunk.forward(input));
        (self.actor.forward(&h), self.critic.forward(&h)[0])
    }
}

impl ParamLayers for ActorCritic {
    fn layer_names(&self) -> Vec<String> {
        vec!["trunk".into(), "actor".into(), "critic".into()]
    }
    fn layers(&self) -> Vec<&DenseLayer> {
        vec![&self.trunk, &self.actor, &self.critic]
    }
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        vec![&mut self.trunk, &mut self.actor, &mut self.critic]
    }
}

/// Logits and state value for an assembled actor-critic input. Panics on a
/// dimension mismatch, naming the active wiring variant.
pub fn actor_critic_forward(ac: &ActorCritic, input: &AcInput) -> (Vec<Scalar>, Scalar) {
    assert_eq!(
        input.values.len(),
        ac.input_dim(),
        "actor_critic_forward: input length {} != input_dim {} (variant {})",
        input.values.len(),
        ac.input_dim(),
        input.variant.name()
    );
    ac.forward_raw(&input.values)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[Scalar]) -> Vec<Scalar> {
    let max = logits.iter().cloned().fold(Scalar::NEG_INFINITY, Scalar::max);
    let exps: Vec<Scalar> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: Scalar = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// How a behaviour is drawn from the logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    Sample,
    Greedy,
}

/// Draw from softmax(logits) or take the argmax (lowest index wins ties).
pub fn select_behaviour<R: Rng>(logits: &[Scalar], mode: SelectMode, rng: &mut R) -> BehaviourId {
    assert_eq!(logits.len(), 3);
    assert!(logits.iter().all(|l| l.is_finite()), "non-finite logits: {logits:?}");
    match mode {
        SelectMode::Greedy => {
            let mut best = 0;
            for i in 1..3 {
                if logits[i] > logits[best] {
                    best = i;
                }
            }
            BehaviourId::from_index(best)
        }
        SelectMode::Sample => {
            let probs = softmax(logits);
            let u: Scalar = rng.gen();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return BehaviourId::from_index(i);
                }
            }
            BehaviourId::Retract
        }
    }
}

//! Named parameter-block access shared by every model: checkpointing walks
//! the same layer lists that training registers on the tape, so block order
//! is defined exactly once per model.

use crate::nn::tape::LayerRef;
use crate::{AdamParams, AdamState, DenseLayer, Scalar, Tape};

/// Models expose their dense layers in a fixed, documented order.
pub trait ParamLayers {
    /// Stable block names, one per layer, e.g. `"enc1"`.
    fn layer_names(&self) -> Vec<String>;
    fn layers(&self) -> Vec<&DenseLayer>;
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer>;

    fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    fn all_finite(&self) -> bool {
        self.layers().iter().all(|l| l.is_finite())
    }
}

/// Register every layer of a model on a tape, in model order.
pub fn register_layers<M: ParamLayers>(tape: &mut Tape, model: &M) -> Vec<LayerRef> {
    model
        .layer_names()
        .iter()
        .zip(model.layers())
        .map(|(name, layer)| tape.layer(name, layer))
        .collect()
}

/// Weight and bias gradients per registered layer, in registration order.
pub fn layer_grads(tape: &Tape, refs: &[LayerRef]) -> Vec<(Vec<Scalar>, Vec<Scalar>)> {
    refs.iter().map(|r| (tape.param_grad(r.weights), tape.param_grad(r.biases))).collect()
}

/// Adam moment state for every layer of one model.
#[derive(Debug, Clone)]
pub struct LayerOptimizer {
    states: Vec<(AdamState, AdamState)>,
}

impl LayerOptimizer {
    pub fn new<M: ParamLayers>(model: &M, hp: AdamParams) -> Self {
        let states = model
            .layers()
            .iter()
            .map(|l| {
                (AdamState::new(l.weights.data().len(), hp), AdamState::new(l.biases.len(), hp))
            })
            .collect();
        LayerOptimizer { states }
    }

    /// Apply one Adam step per block from tape gradients.
    pub fn step<M: ParamLayers>(&mut self, model: &mut M, grads: &[(Vec<Scalar>, Vec<Scalar>)]) {
        let names = model.layer_names();
        let layers = model.layers_mut();
        assert_eq!(layers.len(), grads.len(), "gradient count mismatch");
        assert_eq!(layers.len(), self.states.len(), "optimizer state count mismatch");
        for (((layer, (gw, gb)), (sw, sb)), name) in
            layers.into_iter().zip(grads).zip(self.states.iter_mut()).zip(&names)
        {
            crate::nn::adam_step(&format!("{name}.w"), layer.weights.data_mut(), gw, sw);
            crate::nn::adam_step(&format!("{name}.b"), &mut layer.biases, gb, sb);
        }
    }
}

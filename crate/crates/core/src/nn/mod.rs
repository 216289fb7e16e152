//! Encoder building blocks: dense and convolutional layers, pooling,
//! dropout, activations, losses and the Adam optimizer.
//!
//! A [`Model`] owns its parameter tensors. For every training step the
//! caller binds the model onto a fresh tape ([`Model::bind`]), runs the
//! forward pass, backpropagates a loss, and hands the collected gradients to
//! [`Adam::step`].

mod adam;
mod layers;

pub use adam::Adam;
pub use layers::{
    avg_pool_1d, avg_pool_2d, dropout, max_pool_1d, max_pool_2d, Conv1dLayer, Conv2dLayer,
    DenseLayer, Layer,
};

use alloc::vec::Vec;

use rand::RngCore;

use crate::tape::{Tape, Var};
use crate::{Error, Result, Tensor};

/// Activation applied inside a layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    /// lo + (hi - lo) * sigmoid(x); bounds a bottleneck output to a known
    /// physical range.
    ScaledSigmoid { lo: f64, hi: f64 },
}

impl Activation {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match *self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::ScaledSigmoid { lo, hi } => tape.scaled_sigmoid(x, lo, hi),
        }
    }
}

/// Training loss over equal-shaped prediction and target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Mae,
}

/// Mean squared or mean absolute error, averaged over all elements.
pub fn loss(tape: &mut Tape, kind: LossKind, pred: Var, target: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(target) {
        return Err(Error::ShapeMismatch {
            op: "loss",
            lhs: tape.shape(pred).to_vec(),
            rhs: tape.shape(target).to_vec(),
        });
    }
    let diff = tape.sub(pred, target)?;
    let pointwise = match kind {
        LossKind::Mse => tape.square(diff)?,
        LossKind::Mae => tape.abs(diff)?,
    };
    tape.mean(pointwise)
}

/// Uniform Glorot sample in +-sqrt(6 / (fan_in + fan_out)).
pub(crate) fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut dyn RngCore, n: usize) -> Vec<f64> {
    use rand::Rng;
    let limit = crate::fmath::sqrt(6.0 / (fan_in + fan_out) as f64);
    (0..n)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
        .collect()
}

/// Feed-forward stack of layers.
#[derive(Clone, Debug)]
pub struct Model {
    pub layers: Vec<Layer>,
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Self {
        Model { layers }
    }

    /// Parameter tensors in deterministic (layer, weight-then-bias) order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.collect_params(&mut out);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            layer.collect_params_mut(&mut out);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Register every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundModel<'_> {
        let vars = self.params().into_iter().map(|t| tape.param(t.clone())).collect();
        BoundModel { model: self, vars }
    }

    /// Inference on a throwaway tape (dropout off).
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let bound = self.bind(&mut tape);
        let y = bound.forward(&mut tape, x)?;
        Ok(tape.tensor(y))
    }
}

/// A model whose parameters live on a specific tape.
pub struct BoundModel<'m> {
    model: &'m Model,
    vars: Vec<Var>,
}

impl BoundModel<'_> {
    /// Tape handles of the parameters, aligned with [`Model::params`].
    pub fn param_vars(&self) -> &[Var] {
        &self.vars
    }

    /// Inference-mode forward pass (dropout is the identity).
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        self.run(tape, input, None)
    }

    /// Training-mode forward pass; `rng` drives dropout masks.
    pub fn forward_train(
        &self,
        tape: &mut Tape,
        input: Var,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        self.run(tape, input, Some(rng))
    }

    fn run(&self, tape: &mut Tape, input: Var, mut rng: Option<&mut dyn RngCore>) -> Result<Var> {
        let mut x = input;
        let mut next_param = 0;
        for layer in &self.model.layers {
            let vars = &self.vars[next_param..next_param + layer.param_tensors()];
            next_param += layer.param_tensors();
            let r: Option<&mut dyn RngCore> = match &mut rng {
                Some(r) => Some(&mut **r),
                None => None,
            };
            x = layer.forward(tape, x, vars, r)?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn losses_on_matching_and_trivial_inputs() {
        let mut t = Tape::new();
        let p = t.constant(Tensor::vector(vec![0.0, 2.0]));
        let z = t.constant(Tensor::vector(vec![0.0, 0.0]));
        let l = loss(&mut t, LossKind::Mse, p, z).unwrap();
        assert_eq!(t.values(l), &[2.0]);
        let p = t.constant(Tensor::vector(vec![1.0, -1.0]));
        let l = loss(&mut t, LossKind::Mae, p, z).unwrap();
        assert_eq!(t.values(l), &[1.0]);
        let l = loss(&mut t, LossKind::Mse, z, z).unwrap();
        assert_eq!(t.values(l), &[0.0]);
    }

    #[test]
    fn loss_requires_equal_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![1.0]));
        let b = t.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(loss(&mut t, LossKind::Mse, a, b).is_err());
    }

    #[test]
    fn scaled_sigmoid_bottleneck_values() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(0.0));
        let y = Activation::ScaledSigmoid { lo: 1.0, hi: 3.0 }
            .apply(&mut t, x)
            .unwrap();
        assert_eq!(t.values(y), &[2.0]);
        // sigma(1) = 0.7310585786300049.
        let x = t.constant(Tensor::scalar(1.0));
        let y = Activation::ScaledSigmoid { lo: 0.0, hi: 1.0 }
            .apply(&mut t, x)
            .unwrap();
        assert!((t.values(y)[0] - 0.7310585786300049).abs() < 1e-15);
        // Large finite inputs stay strictly inside the band.
        let x = t.constant(Tensor::vector(vec![-30.0, 30.0]));
        let y = Activation::ScaledSigmoid { lo: 1.0, hi: 3.0 }
            .apply(&mut t, x)
            .unwrap();
        let v = t.values(y);
        assert!(v[0] > 1.0 && v[0] < 1.0 + 1e-10);
        assert!(v[1] < 3.0 && v[1] > 3.0 - 1e-10);
    }

    #[test]
    fn model_forward_is_deterministic_in_inference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = Model::new(vec![
            Layer::Dense(DenseLayer::glorot(4, 3, Activation::Tanh, &mut rng)),
            Layer::Dense(DenseLayer::glorot(3, 2, Activation::Sigmoid, &mut rng)),
        ]);
        let x = Tensor::vector(vec![0.1, -0.2, 0.3, 0.4]);
        let y1 = model.infer(&x).unwrap();
        let y2 = model.infer(&x).unwrap();
        assert_eq!(y1, y2);
    }
}

//! Shared training machinery for both recovery modes.
//!
//! Direct mode trains raw bottleneck values (no encoder); encoder mode
//! trains a network that maps each sample's solution data to bottleneck
//! outputs. Either way the loss is built per sample on a private tape, the
//! batch gradient is reduced in index order (so multi-threaded runs stay
//! bit-deterministic), and Adam updates the shared parameters.

use bipde_core::nn::{Adam, Model};
use bipde_core::tape::{Tape, Var};
use bipde_core::{Result as CoreResult, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trainable state at the bottleneck.
pub enum Bottleneck {
    /// Raw pre-activation values shared by every sample.
    Direct(Tensor),
    /// Encoder applied to each sample's input.
    Encoder(Model),
}

impl Bottleneck {
    pub fn encoder(&self) -> Option<&Model> {
        match self {
            Bottleneck::Encoder(m) => Some(m),
            Bottleneck::Direct(_) => None,
        }
    }
}

/// A training problem over indexed samples.
pub trait SampleProblem: Sync {
    fn count(&self) -> usize;

    /// Encoder input for sample `idx` (unused in direct mode).
    fn input(&self, idx: usize) -> Tensor;

    /// Build the scalar loss for one sample from the bottleneck output.
    fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, idx: usize) -> CoreResult<Var>;
}

#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Multiplicative per-epoch learning-rate factor (1.0 = constant).
    pub lr_decay: f64,
    /// Fresh zero-mean Gaussian input noise per sample visit (encoder mode
    /// only). Forces the encoder toward an averaging readout when the
    /// per-point signal is weaker than measurement noise.
    pub input_noise_std: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 100,
            batch: 1,
            lr: 1e-3,
            lr_decay: 1.0,
            input_noise_std: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("numerical failure: {0}")]
pub struct NumericalError(pub String);

fn numerical(e: bipde_core::Error) -> NumericalError {
    NumericalError(e.to_string())
}

struct SampleRun {
    loss: f64,
    grads: Vec<Tensor>,
}

fn run_sample(
    bottleneck: &Bottleneck,
    problem: &impl SampleProblem,
    idx: usize,
    train_rng: Option<ChaCha8Rng>,
    input_noise_std: f64,
) -> Result<SampleRun, NumericalError> {
    let mut tape = Tape::new();
    let (bn_var, param_vars): (Var, Vec<Var>) = match bottleneck {
        Bottleneck::Direct(raw) => {
            let v = tape.param(raw.clone());
            (v, vec![v])
        }
        Bottleneck::Encoder(model) => {
            let bound = model.bind(&mut tape);
            let out = match train_rng {
                Some(mut rng) => {
                    let mut input = problem.input(idx);
                    if input_noise_std > 0.0 {
                        use rand_distr::{Distribution, Normal};
                        let normal =
                            Normal::new(0.0, input_noise_std).expect("noise std");
                        for v in input.values_mut() {
                            *v += normal.sample(&mut rng);
                        }
                    }
                    let x = tape.constant(input);
                    bound
                        .forward_train(&mut tape, x, &mut rng)
                        .map_err(numerical)?
                }
                None => {
                    let x = tape.constant(problem.input(idx));
                    bound.forward(&mut tape, x).map_err(numerical)?
                }
            };
            (out, bound.param_vars().to_vec())
        }
    };
    let loss = problem
        .sample_loss(&mut tape, bn_var, idx)
        .map_err(numerical)?;
    let loss_val = tape.values(loss)[0];
    if !loss_val.is_finite() {
        return Err(NumericalError("loss became non-finite".into()));
    }
    let grads = tape.backward(loss).map_err(numerical)?;
    Ok(SampleRun {
        loss: loss_val,
        grads: param_vars.iter().map(|&v| grads.of(v)).collect(),
    })
}

/// Train the bottleneck in place; returns the per-epoch mean loss history.
///
/// Aborts (never silently continues) if any sample loss stops being finite.
pub fn train(
    bottleneck: &mut Bottleneck,
    problem: &impl SampleProblem,
    opts: &TrainOptions,
) -> Result<Vec<f64>, NumericalError> {
    let n = problem.count();
    if n == 0 {
        return Err(NumericalError("no training samples".into()));
    }
    let batch = opts.batch.clamp(1, n);
    let mut adam = Adam::new(opts.lr);
    let mut history = Vec::with_capacity(opts.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..opts.epochs {
        adam.lr = opts.lr * opts.lr_decay.powi(epoch as i32);
        // Deterministic epoch shuffle on its own RNG stream.
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        shuffle_rng.set_stream(u64::MAX - epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let runs: Vec<Result<SampleRun, NumericalError>> = chunk
                .par_iter()
                .map(|&idx| {
                    let rng = match bottleneck {
                        Bottleneck::Encoder(_) => {
                            let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
                            r.set_stream(((epoch as u64) << 32) | idx as u64);
                            Some(r)
                        }
                        Bottleneck::Direct(_) => None,
                    };
                    run_sample(bottleneck, problem, idx, rng, opts.input_noise_std)
                })
                .collect();

            // Reduce in batch order: bit-identical regardless of scheduling.
            let mut total: Option<Vec<Tensor>> = None;
            for run in runs {
                let run = run?;
                epoch_loss += run.loss;
                match &mut total {
                    None => total = Some(run.grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&run.grads) {
                            for (av, gv) in a.values_mut().iter_mut().zip(g.values()) {
                                *av += gv;
                            }
                        }
                    }
                }
            }
            let mut total = total.expect("non-empty batch");
            let scale = 1.0 / chunk.len() as f64;
            for g in &mut total {
                for v in g.values_mut() {
                    *v *= scale;
                }
            }

            let mut params: Vec<&mut Tensor> = match bottleneck {
                Bottleneck::Direct(raw) => vec![raw],
                Bottleneck::Encoder(model) => model.params_mut(),
            };
            adam.step(&mut params, &total).map_err(numerical)?;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

/// Inference-mode bottleneck outputs for a list of inputs.
pub fn encoder_predictions(
    model: &Model,
    inputs: impl IntoIterator<Item = Tensor>,
) -> Result<Vec<Vec<f64>>, NumericalError> {
    inputs
        .into_iter()
        .map(|x| {
            model
                .infer(&x)
                .map(|t| t.values().to_vec())
                .map_err(numerical)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bipde_core::nn::{loss as nn_loss, LossKind};

    /// Scalar quadratic recovered through a scaled sigmoid.
    struct Quadratic {
        target: f64,
    }

    impl SampleProblem for Quadratic {
        fn count(&self) -> usize {
            1
        }

        fn input(&self, _idx: usize) -> Tensor {
            Tensor::scalar(0.0)
        }

        fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, _idx: usize) -> CoreResult<Var> {
            let c = tape.scaled_sigmoid(bottleneck, 0.0, 4.0)?;
            let t = tape.constant(Tensor::scalar(self.target));
            nn_loss(tape, LossKind::Mse, c, t)
        }
    }

    #[test]
    fn direct_mode_converges_on_a_scalar_quadratic() {
        let mut bn = Bottleneck::Direct(Tensor::scalar(0.0));
        let problem = Quadratic { target: 2.7 };
        let history = train(
            &mut bn,
            &problem,
            &TrainOptions {
                epochs: 800,
                batch: 1,
                lr: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(history[history.len() - 1] < 1e-8, "loss {history:?}");
        let raw = match &bn {
            Bottleneck::Direct(t) => t.values()[0],
            _ => unreachable!(),
        };
        let recovered = 4.0 / (1.0 + (-raw).exp());
        assert!((recovered - 2.7).abs() < 1e-3, "recovered {recovered}");
    }

    #[test]
    fn training_is_deterministic_across_runs() {
        let run = || {
            let mut bn = Bottleneck::Direct(Tensor::scalar(0.3));
            let problem = Quadratic { target: 1.2 };
            let h = train(
                &mut bn,
                &problem,
                &TrainOptions {
                    epochs: 50,
                    batch: 1,
                    lr: 0.02,
                    seed: 9,
                    ..Default::default()
                },
            )
            .unwrap();
            let raw = match bn {
                Bottleneck::Direct(t) => t.values()[0],
                _ => unreachable!(),
            };
            (h, raw)
        };
        let (h1, r1) = run();
        let (h2, r2) = run();
        assert_eq!(h1, h2);
        assert_eq!(r1, r2);
    }
}

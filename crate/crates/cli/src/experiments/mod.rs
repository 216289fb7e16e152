//! Experiment runners: one module per problem family, a common output
//! shape, and the kind dispatcher.

mod burgers;
mod poisson;
mod rbf;

use anyhow::Result;
use bipde_core::nn::Model;
use bipde_core::tape::{Tape, Var};
use bipde_core::Tensor;

use crate::config::{Config, ConfigError, Kind};
use crate::formats::Container;
use crate::metrics::MetricsReport;

/// A trained encoder plus the inference-time metadata (bottleneck scaling
/// ranges etc.) that belongs in its checkpoint header.
pub struct Checkpoint {
    pub model: Model,
    pub extra: Config,
}

/// Everything a run produces; the CLI decides what lands on disk.
pub struct RunOutput {
    pub reports: Vec<MetricsReport>,
    pub checkpoint: Option<Checkpoint>,
}

/// Run the experiment described by `cfg`, resolving defaults into it so the
/// written manifest is complete.
pub fn run(cfg: &mut Config) -> Result<RunOutput> {
    match cfg.kind()? {
        Kind::PoissonCase1 => poisson::run_case1(cfg),
        Kind::PoissonCase2 => poisson::run_case2(cfg),
        Kind::PoissonInverse1d => poisson::run_inverse_1d(cfg),
        Kind::PoissonInverse2d => poisson::run_inverse_2d(cfg),
        Kind::BurgersSweep => burgers::run_sweep_cell(cfg),
        Kind::RbfRecover => rbf::run_recover(cfg),
        Kind::RbfInverse => rbf::run_inverse(cfg),
    }
}

/// Produce the dataset container(s) for `bipde generate`.
pub fn generate(cfg: &mut Config) -> Result<Vec<(String, Container)>> {
    match cfg.kind()? {
        Kind::PoissonCase1 | Kind::PoissonCase2 => poisson::generate_case(cfg),
        Kind::PoissonInverse1d => poisson::generate_ensemble_1d(cfg),
        Kind::PoissonInverse2d => poisson::generate_ensemble_2d(cfg),
        Kind::BurgersSweep => burgers::generate_shift_dataset(cfg),
        Kind::RbfRecover => rbf::generate_recover_dataset(cfg),
        Kind::RbfInverse => rbf::generate_inverse_dataset(cfg),
    }
}

/// Elementwise scaled sigmoid with per-component bounds:
/// out_k = lo_k + (hi_k - lo_k) * sigmoid(raw_k).
pub(crate) fn scaled_sigmoid_vec(
    tape: &mut Tape,
    raw: Var,
    lo: &[f64],
    hi: &[f64],
) -> bipde_core::Result<Var> {
    let s = tape.sigmoid(raw)?;
    let span = tape.constant(Tensor::vector(
        lo.iter().zip(hi).map(|(&a, &b)| b - a).collect(),
    ));
    let base = tape.constant(Tensor::vector(lo.to_vec()));
    let scaled = tape.mul(s, span)?;
    tape.add(scaled, base)
}

/// Shape a flat sample to what the model's first layer expects.
pub(crate) fn shape_input(model: &Model, flat: &[f64]) -> Result<Tensor> {
    use bipde_core::nn::Layer;
    let n = flat.len();
    let shape = match model.layers.first() {
        Some(Layer::Dense(l)) => {
            let k = l.w.shape()[1];
            if k != n {
                anyhow::bail!("encoder expects {k} inputs, sample has {n}");
            }
            vec![k]
        }
        Some(Layer::Conv1d(l)) => {
            let ch = l.kernels.shape()[1];
            if n % ch != 0 {
                anyhow::bail!("sample length {n} not divisible by {ch} channels");
            }
            vec![ch, n / ch]
        }
        Some(Layer::Conv2d(l)) => {
            let ch = l.kernels.shape()[1];
            let side = ((n / ch) as f64).sqrt().round() as usize;
            if ch * side * side != n {
                anyhow::bail!("sample length {n} is not a square image with {ch} channels");
            }
            vec![ch, side, side]
        }
        _ => vec![n],
    };
    Ok(Tensor::new(shape, flat.to_vec())?)
}

pub(crate) fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError::new(msg).into()
}

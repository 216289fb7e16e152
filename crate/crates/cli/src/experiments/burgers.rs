//! Scalar-parameter recovery on the dynamic Burgers problem: train against
//! shifted snapshot pairs with the compact-FD stepper as the decoder.

use anyhow::Result;
use bipde_core::burgers::{roll_forward, Cfd6};
use bipde_core::datagen::{gen_burgers, make_shift_pairs, BurgersSpec, ShiftDataset};
use bipde_core::nn::{loss as nn_loss, LossKind};
use bipde_core::tape::{Tape, Var};
use bipde_core::{Result as CoreResult, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{config_err, Checkpoint, RunOutput};
use crate::config::Config;
use crate::encoder_spec::{build_model, parse_spec};
use crate::formats::Container;
use crate::metrics::{mean_std, MetricsReport, ParamStat};
use crate::train::{encoder_predictions, train, Bottleneck, SampleProblem, TrainOptions};

pub(crate) struct CellSettings {
    pub nx: usize,
    pub dt: f64,
    pub t_final: f64,
    pub p: usize,
    pub nu_true: f64,
    pub gamma_true: f64,
    pub two_unknowns: bool,
    pub nu_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub seed: u64,
}

fn resolve_settings(cfg: &mut Config) -> Result<CellSettings> {
    let pi = std::f64::consts::PI;
    let unknowns = cfg.resolve_str("unknowns", "nu_gamma");
    let two_unknowns = match unknowns.as_str() {
        "nu" => false,
        "nu_gamma" => true,
        other => return Err(config_err(format!("unknowns must be nu|nu_gamma, got '{other}'"))),
    };
    Ok(CellSettings {
        nx: cfg.resolve_usize("nx", 160)?,
        dt: cfg.resolve_f64("dt", 0.001)?,
        t_final: cfg.resolve_f64("t_final", 0.2)?,
        p: cfg.resolve_usize("p", 1)?,
        nu_true: cfg.resolve_f64("nu_true", 0.01 / pi)?,
        gamma_true: cfg.resolve_f64("gamma_true", 1.0)?,
        two_unknowns,
        nu_range: (
            cfg.resolve_f64("nu_lo", 0.0)?,
            cfg.resolve_f64("nu_hi", 0.05)?,
        ),
        gamma_range: (
            cfg.resolve_f64("gamma_lo", 0.0)?,
            cfg.resolve_f64("gamma_hi", 2.0)?,
        ),
        seed: cfg.resolve_u64("seed", 5)?,
    })
}

/// Training-side derivative operator.
///
/// The data generator always spaces its nodes as (x_r - x_l)/(nx - 1); the
/// published convergence tables correspond to a solver layer built with
/// spacing (x_r - x_l)/nx, one interval per node ("intervals"). "nodes"
/// makes the solver match the generator exactly, in which case recovery is
/// exact up to optimizer tolerance and no resolution trend remains.
fn model_operator(cfg: &mut Config, s: &CellSettings) -> Result<Cfd6> {
    let spacing = cfg.resolve_str("solver_spacing", "intervals");
    let len = 2.0;
    let h = match spacing.as_str() {
        "intervals" => len / s.nx as f64,
        "nodes" => len / (s.nx - 1) as f64,
        other => {
            return Err(config_err(format!(
                "solver_spacing must be intervals|nodes, got '{other}'"
            )))
        }
    };
    Ok(Cfd6::new(s.nx, h)?)
}

fn bottleneck_params(
    tape: &mut Tape,
    bottleneck: Var,
    s: &CellSettings,
) -> CoreResult<(Var, Var)> {
    let raw_nu = tape.gather(bottleneck, vec![0usize])?;
    let nu = tape.scaled_sigmoid(raw_nu, s.nu_range.0, s.nu_range.1)?;
    let gamma = if s.two_unknowns {
        let raw_gamma = tape.gather(bottleneck, vec![1usize])?;
        tape.scaled_sigmoid(raw_gamma, s.gamma_range.0, s.gamma_range.1)?
    } else {
        tape.constant(Tensor::scalar(s.gamma_true))
    };
    Ok((nu, gamma))
}

/// Direct mode: one shared (nu, gamma) stepping every snapshot pair at once
/// as the columns of a matrix.
struct DirectProblem {
    inputs: Tensor,
    targets: Tensor,
    d1: Tensor,
    settings: CellSettings,
    loss_kind: LossKind,
}

impl SampleProblem for DirectProblem {
    fn count(&self) -> usize {
        1
    }

    fn input(&self, _idx: usize) -> Tensor {
        Tensor::scalar(0.0)
    }

    fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, _idx: usize) -> CoreResult<Var> {
        let (nu, gamma) = bottleneck_params(tape, bottleneck, &self.settings)?;
        let d1 = tape.constant(self.d1.clone());
        let u0 = tape.constant(self.inputs.clone());
        let traj = roll_forward(tape, u0, self.settings.p, d1, nu, gamma, self.settings.dt)?;
        let target = tape.constant(self.targets.clone());
        nn_loss(tape, self.loss_kind, traj[self.settings.p], target)
    }
}

/// Encoder mode: per-pair bottleneck values from the input snapshot.
struct EncoderProblem {
    dataset: ShiftDataset,
    d1: Tensor,
    settings: CellSettings,
    loss_kind: LossKind,
}

impl EncoderProblem {
    fn row(&self, t: &Tensor, idx: usize) -> Vec<f64> {
        let n = self.settings.nx;
        t.values()[idx * n..(idx + 1) * n].to_vec()
    }
}

impl SampleProblem for EncoderProblem {
    fn count(&self) -> usize {
        self.dataset.pair_count()
    }

    fn input(&self, idx: usize) -> Tensor {
        Tensor::new(vec![1, self.settings.nx], self.row(&self.dataset.inputs, idx))
            .expect("input shape")
    }

    fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, idx: usize) -> CoreResult<Var> {
        let (nu, gamma) = bottleneck_params(tape, bottleneck, &self.settings)?;
        let d1 = tape.constant(self.d1.clone());
        let u0 = tape.constant(Tensor::vector(self.row(&self.dataset.inputs, idx)));
        let traj = roll_forward(tape, u0, self.settings.p, d1, nu, gamma, self.settings.dt)?;
        let target = tape.constant(Tensor::vector(self.row(&self.dataset.targets, idx)));
        nn_loss(tape, self.loss_kind, traj[self.settings.p], target)
    }
}

fn subsample_pairs(ds: &ShiftDataset, stride: usize) -> Result<ShiftDataset> {
    let n = ds.state_len();
    let rows: Vec<usize> = (0..ds.pair_count()).step_by(stride).collect();
    let pick = |t: &Tensor| -> Result<Tensor> {
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in &rows {
            out.extend_from_slice(&t.values()[r * n..(r + 1) * n]);
        }
        Ok(Tensor::new(vec![rows.len(), n], out)?)
    };
    Ok(ShiftDataset {
        inputs: pick(&ds.inputs)?,
        targets: pick(&ds.targets)?,
        p: ds.p,
        meta: ds.meta,
    })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Run one (nx, dt) cell of the recovery experiment.
pub fn run_sweep_cell(cfg: &mut Config) -> Result<RunOutput> {
    let settings = resolve_settings(cfg)?;
    let epochs = cfg.resolve_usize("epochs", 400)?;
    let lr = cfg.resolve_f64("lr", 0.1)?;
    let lr_decay = cfg.resolve_f64("lr_decay", 0.985)?;
    let batch = cfg.resolve_usize("batch", 16)?;
    let mode = cfg.resolve_str("mode", "direct");
    let loss_sel = match cfg.resolve_str("loss", "mse").as_str() {
        "mse" => LossKind::Mse,
        "mae" => LossKind::Mae,
        other => return Err(config_err(format!("unknown loss '{other}'"))),
    };

    let spec = BurgersSpec::standard(
        settings.nu_true,
        settings.gamma_true,
        settings.nx,
        settings.dt,
        settings.t_final,
    );
    let traj = gen_burgers(&spec)?;
    let mut dataset = make_shift_pairs(&traj, settings.p)?;
    // Training on every stride-th pair: the loss minimum barely moves (it
    // is an exact interpolation point in the two-unknown case), the epoch
    // cost drops proportionally.
    let stride = cfg.resolve_usize("column_stride", 1)?.max(1);
    if stride > 1 {
        dataset = subsample_pairs(&dataset, stride)?;
    }
    let op = model_operator(cfg, &settings)?;

    let cell = format!("nx={};dt={}", settings.nx, settings.dt);
    let n_raw = if settings.two_unknowns { 2 } else { 1 };
    let init_raw = cfg.resolve_f64("init_raw", -1.0)?;

    let (history, nu_stat, gamma_stat, checkpoint) = match mode.as_str() {
        "direct" => {
            let mut bottleneck = Bottleneck::Direct(Tensor::filled(vec![n_raw], init_raw));
            let problem = DirectProblem {
                inputs: dataset.inputs_columns(),
                targets: dataset.targets_columns(),
                d1: op.d1().clone(),
                settings: resolve_settings(cfg)?,
                loss_kind: loss_sel,
            };
            let history = train(
                &mut bottleneck,
                &problem,
                &TrainOptions {
                    epochs,
                    batch: 1,
                    lr,
                    lr_decay,
                    input_noise_std: 0.0,
                    seed: settings.seed,
                },
            )?;
            let raw = match &bottleneck {
                Bottleneck::Direct(t) => t.values().to_vec(),
                _ => unreachable!(),
            };
            let nu_hat =
                settings.nu_range.0 + (settings.nu_range.1 - settings.nu_range.0) * sigmoid(raw[0]);
            let gamma_hat = if settings.two_unknowns {
                settings.gamma_range.0
                    + (settings.gamma_range.1 - settings.gamma_range.0) * sigmoid(raw[1])
            } else {
                settings.gamma_true
            };
            ((history), (nu_hat, 0.0), (gamma_hat, 0.0), None)
        }
        "encoder" => {
            let default_spec = {
                let flat = 128 * ((settings.nx - 9) / 2);
                format!(
                    "conv1d(1,128,10,tanh) avgpool1d(2) flatten dense({flat},20,sigmoid) dense(20,{n_raw},identity)"
                )
            };
            let spec_text = cfg.resolve_str("encoder", &default_spec);
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            let mut bottleneck = Bottleneck::Encoder(build_model(&parse_spec(&spec_text)?, &mut rng));
            let problem = EncoderProblem {
                dataset: dataset.clone(),
                d1: op.d1().clone(),
                settings: resolve_settings(cfg)?,
                loss_kind: loss_sel,
            };
            let history = train(
                &mut bottleneck,
                &problem,
                &TrainOptions {
                    epochs,
                    batch,
                    lr,
                    lr_decay,
                    input_noise_std: 0.0,
                    seed: settings.seed,
                },
            )?;
            let model = bottleneck.encoder().expect("encoder mode").clone();
            let preds = encoder_predictions(
                &model,
                (0..problem.count()).map(|k| problem.input(k)),
            )?;
            let nus: Vec<f64> = preds
                .iter()
                .map(|p| {
                    settings.nu_range.0
                        + (settings.nu_range.1 - settings.nu_range.0) * sigmoid(p[0])
                })
                .collect();
            let gammas: Vec<f64> = if settings.two_unknowns {
                preds
                    .iter()
                    .map(|p| {
                        settings.gamma_range.0
                            + (settings.gamma_range.1 - settings.gamma_range.0) * sigmoid(p[1])
                    })
                    .collect()
            } else {
                vec![settings.gamma_true]
            };
            let nu_stat = mean_std(&nus);
            let gamma_stat = mean_std(&gammas);
            (history, nu_stat, gamma_stat, Some(model))
        }
        other => return Err(config_err(format!("unknown mode '{other}'"))),
    };

    let mut report = MetricsReport::new("burgers_sweep");
    report.cell = cell;
    report.final_loss = *history.last().unwrap_or(&f64::NAN);
    report.loss_history = history;
    report.params.push(ParamStat {
        name: "nu".into(),
        true_value: Some(settings.nu_true),
        mean: nu_stat.0,
        std: nu_stat.1,
        r2: None,
    });
    if settings.two_unknowns {
        report.params.push(ParamStat {
            name: "gamma".into(),
            true_value: Some(settings.gamma_true),
            mean: gamma_stat.0,
            std: gamma_stat.1,
            r2: None,
        });
    }

    let checkpoint = checkpoint.map(|model| {
        let mut extra = Config::new();
        extra.set("kind", "burgers_sweep");
        extra.set("nu_lo", settings.nu_range.0);
        extra.set("nu_hi", settings.nu_range.1);
        extra.set("gamma_lo", settings.gamma_range.0);
        extra.set("gamma_hi", settings.gamma_range.1);
        extra.set("unknowns", if settings.two_unknowns { "nu_gamma" } else { "nu" });
        Checkpoint { model, extra }
    });
    Ok(RunOutput {
        reports: vec![report],
        checkpoint,
    })
}

/// Shift-pair dataset container for `generate`.
pub fn generate_shift_dataset(cfg: &mut Config) -> Result<Vec<(String, Container)>> {
    let settings = resolve_settings(cfg)?;
    let noise_std = cfg.resolve_f64("noise_std", 0.0)?;
    let spec = BurgersSpec::standard(
        settings.nu_true,
        settings.gamma_true,
        settings.nx,
        settings.dt,
        settings.t_final,
    );
    let traj = gen_burgers(&spec)?;
    let mut ds = make_shift_pairs(&traj, settings.p)?;
    if noise_std > 0.0 {
        ds = ds.with_noise(noise_std, settings.seed.wrapping_add(23));
    }
    let mut header = Config::new();
    header.set("kind", "burgers_shift");
    header.set("nu_true", ds.meta.nu);
    header.set("gamma_true", ds.meta.gamma);
    header.set("nx", ds.meta.nx);
    header.set("dt", ds.meta.dt);
    header.set("p", ds.p);
    header.set("noise_std", ds.meta.noise_std);
    header.set("seed", settings.seed);
    Ok(vec![(
        "burgers_shift.bpds".into(),
        Container {
            header,
            arrays: vec![
                ("inputs".into(), ds.inputs),
                ("targets".into(), ds.targets),
            ],
        },
    )])
}

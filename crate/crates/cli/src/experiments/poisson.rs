//! Poisson-based experiments: single-image hidden-field recovery (cases I
//! and II) and ensemble inverse-transform training in 1D and 2D.

use anyhow::Result;
use bipde_core::datagen::{add_noise, gen_poisson_ensemble_1d, gen_poisson_ensemble_2d,
    Ensemble1dSpec, Ensemble2dSpec, Sample1d, Sample2d};
use bipde_core::nn::{loss as nn_loss, LossKind};
use bipde_core::poisson::{solve_1d, solve_2d, solve_2d_values, Grid2d, PoissonProblem1d,
    PoissonProblem2d};
use bipde_core::tape::{Tape, Var};
use bipde_core::zernike::{Mode, ZernikeBasis};
use bipde_core::{Result as CoreResult, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{config_err, scaled_sigmoid_vec, shape_input, Checkpoint, RunOutput};
use crate::config::Config;
use crate::encoder_spec::{build_model, parse_spec};
use crate::formats::Container;
use crate::metrics::{field_errors, mean_std, r_squared, MetricsReport, ParamStat};
use crate::train::{encoder_predictions, train, Bottleneck, SampleProblem, TrainOptions};

fn loss_kind(cfg: &mut Config, default: &str) -> Result<LossKind> {
    match cfg.resolve_str("loss", default).as_str() {
        "mse" => Ok(LossKind::Mse),
        "mae" => Ok(LossKind::Mae),
        other => Err(config_err(format!("unknown loss '{other}'"))),
    }
}

/// Square domain inscribed in the unit disk.
fn disk_square(n: usize) -> Result<Grid2d> {
    let half = 1.0 / 2.0_f64.sqrt();
    Ok(Grid2d::square(-half, half, n)?)
}

// ── Single-image field recovery (cases I and II) ───────────────────

struct FieldRecovery {
    prob: PoissonProblem2d,
    /// Zernike evaluation matrix over all grid nodes.
    basis: Tensor,
    offset: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Observed interior solution (possibly noisy) the loss compares to.
    data_interior: Tensor,
    /// Full observed field fed to an encoder.
    data_full: Vec<f64>,
    loss_kind: LossKind,
    encoder: Option<bipde_core::nn::Model>,
}

impl FieldRecovery {
    fn coeffs_to_field(&self, tape: &mut Tape, coeffs: Var) -> CoreResult<Var> {
        let b = tape.constant(self.basis.clone());
        let dev = tape.matmul(b, coeffs)?;
        tape.offset(dev, self.offset)
    }
}

impl SampleProblem for FieldRecovery {
    fn count(&self) -> usize {
        1
    }

    fn input(&self, _idx: usize) -> Tensor {
        match &self.encoder {
            Some(model) => shape_input(model, &self.data_full).expect("encoder input"),
            None => Tensor::vector(self.data_full.clone()),
        }
    }

    fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, _idx: usize) -> CoreResult<Var> {
        let coeffs = scaled_sigmoid_vec(tape, bottleneck, &self.lo, &self.hi)?;
        let d = self.coeffs_to_field(tape, coeffs)?;
        let u = solve_2d(tape, &self.prob, d)?;
        let target = tape.constant(self.data_interior.clone());
        nn_loss(tape, self.loss_kind, u, target)
    }
}

struct CaseSetup {
    experiment: &'static str,
    basis: ZernikeBasis,
    offset: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    true_coeffs: Vec<f64>,
    coeff_names: Vec<String>,
    default_loss: &'static str,
    default_epochs: usize,
}

fn run_field_case(
    cfg: &mut Config,
    setup: CaseSetup,
    fields: impl Fn(f64, f64) -> (f64, f64, f64),
) -> Result<RunOutput> {
    let n = cfg.resolve_usize("n", 32)?;
    let seed = cfg.resolve_u64("seed", 7)?;
    let epochs = cfg.resolve_usize("epochs", setup.default_epochs)?;
    let lr = cfg.resolve_f64("lr", 0.05)?;
    let lr_decay = cfg.resolve_f64("lr_decay", 0.99)?;
    let noise_std = cfg.resolve_f64("noise_std", 0.0)?;
    let mode = cfg.resolve_str("mode", "direct");
    let kind = loss_kind(cfg, setup.default_loss)?;

    let grid = disk_square(n)?;
    let nodes = grid.nodes();
    let mut d_true = Vec::with_capacity(n * n);
    let mut f = Vec::with_capacity(n * n);
    let mut bc = Vec::with_capacity(n * n);
    for &(x, y) in &nodes {
        let (dv, fv, bv) = fields(x, y);
        d_true.push(dv);
        f.push(fv);
        bc.push(bv);
    }
    let prob = PoissonProblem2d {
        grid,
        f: Tensor::new(vec![n, n], f)?,
        u_bc: Tensor::new(vec![n, n], bc)?,
    };
    let clean = solve_2d_values(&prob, &Tensor::new(vec![n, n], d_true.clone())?)?;
    let observed = add_noise(&clean, noise_std, seed.wrapping_add(17));
    let mut interior = Vec::with_capacity((n - 2) * (n - 2));
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            interior.push(observed.values()[j * n + i]);
        }
    }

    let basis_matrix = setup.basis.matrix(&nodes)?;
    let mut bottleneck = match mode.as_str() {
        "direct" => Bottleneck::Direct(Tensor::zeros(vec![setup.basis.len()])),
        "encoder" => {
            let flat_pool = |side: usize| (((side - 2) / 2 - 2) / 2 - 2) / 2;
            let default_spec = format!(
                "conv2d(1,32,3,relu) maxpool2d(2) conv2d(32,64,3,relu) maxpool2d(2) conv2d(64,128,3,relu) maxpool2d(2) flatten dense({},64,relu) dropout(0.2) dense(64,32,relu) dropout(0.2) dense(32,{},identity)",
                128 * flat_pool(n) * flat_pool(n),
                setup.basis.len()
            );
            let spec_text = cfg.resolve_str("encoder", &default_spec);
            let specs = parse_spec(&spec_text)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Bottleneck::Encoder(build_model(&specs, &mut rng))
        }
        other => return Err(config_err(format!("unknown mode '{other}'"))),
    };

    let problem = FieldRecovery {
        prob,
        basis: basis_matrix.clone(),
        offset: setup.offset,
        lo: setup.lo.clone(),
        hi: setup.hi.clone(),
        data_interior: Tensor::vector(interior),
        data_full: observed.values().to_vec(),
        loss_kind: kind,
        encoder: bottleneck.encoder().cloned(),
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
            seed,
        },
    )?;

    // Recovered coefficients through the same bottleneck scaling.
    let raw = match &bottleneck {
        Bottleneck::Direct(raw) => raw.values().to_vec(),
        Bottleneck::Encoder(model) => model.infer(&problem.input(0))?.values().to_vec(),
    };
    let coeffs: Vec<f64> = raw
        .iter()
        .zip(setup.lo.iter().zip(&setup.hi))
        .map(|(&r, (&lo, &hi))| lo + (hi - lo) / (1.0 + (-r).exp()))
        .collect();
    let mut d_hat = vec![setup.offset; n * n];
    for (p, row) in d_hat.iter_mut().enumerate() {
        for (k, &c) in coeffs.iter().enumerate() {
            *row += basis_matrix.at2(p, k) * c;
        }
    }
    let (mae_d, linf_d, max_rel) = field_errors(&d_hat, &d_true);

    let mut report = MetricsReport::new(setup.experiment);
    report.final_loss = *history.last().unwrap_or(&f64::NAN);
    report.loss_history = history;
    report.mae_d = Some(mae_d);
    report.linf_d = Some(linf_d);
    report.max_rel_err_d = Some(max_rel);
    for ((name, &c), &t) in setup
        .coeff_names
        .iter()
        .zip(&coeffs)
        .zip(&setup.true_coeffs)
    {
        report.params.push(ParamStat::point(name.clone(), t, c));
    }

    let checkpoint = bottleneck.encoder().cloned().map(|model| {
        let mut extra = Config::new();
        extra.set("kind", setup.experiment);
        extra.set(
            "bottleneck_lo",
            setup.lo.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        );
        extra.set(
            "bottleneck_hi",
            setup.hi.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        );
        Checkpoint { model, extra }
    });
    Ok(RunOutput {
        reports: vec![report],
        checkpoint,
    })
}

/// Case I: a tilted-plane diffusion field recovered from one solution image.
pub fn run_case1(cfg: &mut Config) -> Result<RunOutput> {
    let d_lo = cfg.resolve_f64("piston_lo", 1.0)?;
    let d_hi = cfg.resolve_f64("piston_hi", 3.0)?;
    let tilt = cfg.resolve_f64("tilt_bound", 0.5)?;
    let s2 = 2.0_f64.sqrt();
    let pi = std::f64::consts::PI;
    let setup = CaseSetup {
        experiment: "poisson_case1",
        basis: ZernikeBasis::from_modes(vec![Mode::even(0, 0), Mode::odd(1, 1), Mode::even(1, 1)])?,
        offset: 0.0,
        lo: vec![d_lo, -tilt, -tilt],
        hi: vec![d_hi, tilt, tilt],
        true_coeffs: vec![s2, 0.1, -0.1],
        coeff_names: vec!["piston".into(), "tilt_y".into(), "tilt_x".into()],
        default_loss: "mse",
        default_epochs: 500,
    };
    run_field_case(cfg, setup, |x, y| {
        (
            s2 + 0.1 * (y - x),
            (pi * x).sin() * (pi * y).cos(),
            0.01 * (pi * x).cos() * (pi * y).cos(),
        )
    })
}

/// Case II: superimposed disk polynomials around a constant background.
pub fn run_case2(cfg: &mut Config) -> Result<RunOutput> {
    let a0 = cfg.resolve_f64("a0", 0.3)?;
    let a1 = cfg.resolve_f64("a1", 0.4)?;
    let a2 = cfg.resolve_f64("a2", 0.5)?;
    let a3 = cfg.resolve_f64("a3", 0.6)?;
    let c_lo = cfg.resolve_f64("coeff_lo", 0.0)?;
    let c_hi = cfg.resolve_f64("coeff_hi", 1.6)?;
    let s3 = 3.0_f64.sqrt();
    let pi = std::f64::consts::PI;
    let setup = CaseSetup {
        experiment: "poisson_case2",
        basis: ZernikeBasis::from_modes(vec![
            Mode::even(0, 0),
            Mode::odd(1, 1),
            Mode::even(1, 1),
            Mode::even(2, 0),
        ])?,
        offset: 4.0,
        lo: vec![c_lo; 4],
        hi: vec![c_hi; 4],
        // The canonical coefficients absorb the 2x and sqrt(3) scalings.
        true_coeffs: vec![a0, 2.0 * a2, 2.0 * a1, s3 * a3],
        coeff_names: vec![
            "piston".into(),
            "tilt_y".into(),
            "tilt_x".into(),
            "defocus".into(),
        ],
        default_loss: "mae",
        default_epochs: 800,
    };
    run_field_case(cfg, setup, |x, y| {
        (
            4.0 + a0 + 2.0 * a1 * x + 2.0 * a2 * y + s3 * a3 * (2.0 * x * x + 2.0 * y * y - 1.0),
            x + y,
            (pi * x).cos() * (pi * y).cos(),
        )
    })
}

/// Single-image dataset container for `generate`.
pub fn generate_case(cfg: &mut Config) -> Result<Vec<(String, Container)>> {
    // Run the forward model only; reuse the runner's field definitions by
    // resolving the same keys.
    let kind = cfg.kind()?;
    let n = cfg.resolve_usize("n", 32)?;
    let seed = cfg.resolve_u64("seed", 7)?;
    let noise_std = cfg.resolve_f64("noise_std", 0.0)?;
    let grid = disk_square(n)?;
    let nodes = grid.nodes();
    let pi = std::f64::consts::PI;
    let s2 = 2.0_f64.sqrt();
    let s3 = 3.0_f64.sqrt();
    let (d_true, f, bc): (Vec<f64>, Vec<f64>, Vec<f64>) = match kind {
        crate::config::Kind::PoissonCase1 => nodes
            .iter()
            .map(|&(x, y)| {
                (
                    s2 + 0.1 * (y - x),
                    (pi * x).sin() * (pi * y).cos(),
                    0.01 * (pi * x).cos() * (pi * y).cos(),
                )
            })
            .fold((vec![], vec![], vec![]), |mut acc, (d, f, b)| {
                acc.0.push(d);
                acc.1.push(f);
                acc.2.push(b);
                acc
            }),
        _ => {
            let a0 = cfg.resolve_f64("a0", 0.3)?;
            let a1 = cfg.resolve_f64("a1", 0.4)?;
            let a2 = cfg.resolve_f64("a2", 0.5)?;
            let a3 = cfg.resolve_f64("a3", 0.6)?;
            nodes
                .iter()
                .map(|&(x, y)| {
                    (
                        4.0 + a0
                            + 2.0 * a1 * x
                            + 2.0 * a2 * y
                            + s3 * a3 * (2.0 * x * x + 2.0 * y * y - 1.0),
                        x + y,
                        (pi * x).cos() * (pi * y).cos(),
                    )
                })
                .fold((vec![], vec![], vec![]), |mut acc, (d, f, b)| {
                    acc.0.push(d);
                    acc.1.push(f);
                    acc.2.push(b);
                    acc
                })
        }
    };
    let prob = PoissonProblem2d {
        grid,
        f: Tensor::new(vec![n, n], f)?,
        u_bc: Tensor::new(vec![n, n], bc)?,
    };
    let clean = solve_2d_values(&prob, &Tensor::new(vec![n, n], d_true.clone())?)?;
    let observed = add_noise(&clean, noise_std, seed.wrapping_add(17));
    let mut header = Config::new();
    header.set("kind", kind.as_str());
    header.set("n", n);
    header.set("seed", seed);
    header.set("noise_std", noise_std);
    Ok(vec![(
        "solution.bpds".into(),
        Container {
            header,
            arrays: vec![
                ("solution".into(), observed),
                ("d_true".into(), Tensor::new(vec![n, n], d_true)?),
            ],
        },
    )])
}

// ── Inverse-transform training ──────────────────────────────────────

struct Inverse1dProblem {
    prob: PoissonProblem1d,
    /// Columns (1, x) evaluated at the nodes.
    basis: Tensor,
    samples: Vec<Sample1d>,
}

impl SampleProblem for Inverse1dProblem {
    fn count(&self) -> usize {
        self.samples.len()
    }

    fn input(&self, idx: usize) -> Tensor {
        Tensor::vector(self.samples[idx].solution.clone())
    }

    fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, idx: usize) -> CoreResult<Var> {
        // Bottleneck sigmoids are the coefficients themselves.
        let basis = tape.constant(self.basis.clone());
        let dev = tape.matmul(basis, bottleneck)?;
        let d = tape.offset(dev, 1.0)?;
        let u = solve_1d(tape, &self.prob, d)?;
        let n = self.prob.grid.n;
        let target = tape.constant(Tensor::vector(
            self.samples[idx].solution[1..n - 1].to_vec(),
        ));
        nn_loss(tape, LossKind::Mse, u, target)
    }
}

fn r2_rows(
    experiment: &str,
    cell: &str,
    section: &str,
    names: [&str; 2],
    preds: &[Vec<f64>],
    truths: &[[f64; 2]],
    final_loss: f64,
) -> MetricsReport {
    let mut report = MetricsReport::new(experiment);
    report.cell = cell.into();
    report.section = section.into();
    report.final_loss = final_loss;
    for (k, name) in names.iter().enumerate() {
        let p: Vec<f64> = preds.iter().map(|v| v[k]).collect();
        let t: Vec<f64> = truths.iter().map(|v| v[k]).collect();
        let (mean, std) = mean_std(&p);
        report.params.push(ParamStat {
            name: (*name).into(),
            true_value: None,
            mean,
            std,
            r2: Some(r_squared(&p, &t)),
        });
    }
    report
}

/// Train a dense encoder to read (a0, a1) off 1D solution fields, then
/// score held-out R^2 on clean, noisy, and out-of-range test sets.
pub fn run_inverse_1d(cfg: &mut Config) -> Result<RunOutput> {
    let nx = cfg.resolve_usize("nx", 160)?;
    let n_data = cfg.resolve_usize("n_data", 1000)?;
    let n_test = cfg.resolve_usize("n_test", 400)?;
    let epochs = cfg.resolve_usize("epochs", 400)?;
    let batch = cfg.resolve_usize("batch", 100)?;
    let lr = cfg.resolve_f64("lr", 1e-3)?;
    let lr_decay = cfg.resolve_f64("lr_decay", 1.0)?;
    let seed = cfg.resolve_u64("seed", 11)?;
    let eval_noise = cfg.resolve_f64("eval_noise_std", 0.025)?;
    // Fresh input noise per visit during training; the loss still targets
    // the clean solution, so this is augmentation rather than a noisy
    // training corpus.
    let train_noise = cfg.resolve_f64("noise_std", 0.025)?;
    loss_kind(cfg, "mse")?;

    let spec = Ensemble1dSpec::standard(nx, n_data);
    let samples = gen_poisson_ensemble_1d(&spec, seed)?;
    let prob = spec.problem()?;
    let basis = Tensor::new(
        vec![nx, 2],
        prob.grid
            .nodes()
            .iter()
            .flat_map(|&x| [1.0, x])
            .collect::<Vec<_>>(),
    )?;

    let default_spec = format!("dense({nx},100,relu) dense(100,40,relu) dense(40,2,sigmoid)");
    let spec_text = cfg.resolve_str("encoder", &default_spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bottleneck = Bottleneck::Encoder(build_model(&parse_spec(&spec_text)?, &mut rng));

    let problem = Inverse1dProblem {
        prob,
        basis,
        samples,
    };
    let history = train(
        &mut bottleneck,
        &problem,
        &TrainOptions {
            epochs,
            batch,
            lr,
            lr_decay,
            input_noise_std: train_noise,
            seed,
        },
    )?;
    let final_loss = *history.last().unwrap_or(&f64::NAN);
    let model = bottleneck.encoder().expect("encoder mode").clone();

    // Held-out evaluation: clean, noisy, and out-of-range coefficient sets.
    let test = gen_poisson_ensemble_1d(&Ensemble1dSpec::standard(nx, n_test), seed + 1)?;
    let truths: Vec<[f64; 2]> = test.iter().map(|s| s.coeffs).collect();
    let clean_inputs: Vec<Tensor> = test
        .iter()
        .map(|s| Tensor::vector(s.solution.clone()))
        .collect();
    let clean_preds = encoder_predictions(&model, clean_inputs.clone())?;
    let noisy_preds = encoder_predictions(
        &model,
        clean_inputs
            .iter()
            .enumerate()
            .map(|(k, t)| add_noise(t, eval_noise, seed + 50_000 + k as u64)),
    )?;
    let wide_spec = Ensemble1dSpec {
        nx,
        n_samples: n_test,
        a0_range: (0.15, 0.85),
        a1_range: (0.15, 0.85),
    };
    let wide = gen_poisson_ensemble_1d(&wide_spec, seed + 2)?;
    let wide_preds = encoder_predictions(
        &model,
        wide.iter().map(|s| Tensor::vector(s.solution.clone())),
    )?;
    let wide_truths: Vec<[f64; 2]> = wide.iter().map(|s| s.coeffs).collect();

    let mut main = r2_rows(
        "poisson_inverse_1d",
        "",
        "main",
        ["a0", "a1"],
        &clean_preds,
        &truths,
        final_loss,
    );
    main.loss_history = history;
    let noisy = r2_rows(
        "poisson_inverse_1d",
        &format!("eval_noise={eval_noise}"),
        "main",
        ["a0", "a1"],
        &noisy_preds,
        &truths,
        final_loss,
    );
    let out_of_range = r2_rows(
        "poisson_inverse_1d",
        "range=0.15..0.85",
        "out_of_range",
        ["a0", "a1"],
        &wide_preds,
        &wide_truths,
        final_loss,
    );

    let mut extra = Config::new();
    extra.set("kind", "poisson_inverse_1d");
    Ok(RunOutput {
        reports: vec![main, noisy, out_of_range],
        checkpoint: Some(Checkpoint { model, extra }),
    })
}

struct Inverse2dProblem {
    prob: PoissonProblem2d,
    /// Columns (2y, sqrt(3)(2x^2 + 2y^2 - 1)) at all nodes.
    basis: Tensor,
    samples: Vec<Sample2d>,
    input_shape: Vec<usize>,
}

impl SampleProblem for Inverse2dProblem {
    fn count(&self) -> usize {
        self.samples.len()
    }

    fn input(&self, idx: usize) -> Tensor {
        Tensor::new(
            self.input_shape.clone(),
            self.samples[idx].solution.values().to_vec(),
        )
        .expect("input shape")
    }

    fn sample_loss(&self, tape: &mut Tape, bottleneck: Var, idx: usize) -> CoreResult<Var> {
        let basis = tape.constant(self.basis.clone());
        let dev = tape.matmul(basis, bottleneck)?;
        let d = tape.offset(dev, 4.0)?;
        let u = solve_2d(tape, &self.prob, d)?;
        let n = self.prob.grid.nx;
        let sol = self.samples[idx].solution.values();
        let mut interior = Vec::with_capacity((n - 2) * (n - 2));
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                interior.push(sol[j * n + i]);
            }
        }
        let target = tape.constant(Tensor::vector(interior));
        nn_loss(tape, LossKind::Mse, u, target)
    }
}

/// Conv-encoder inverse transform on the 2D parabolic family.
pub fn run_inverse_2d(cfg: &mut Config) -> Result<RunOutput> {
    let n = cfg.resolve_usize("n", 30)?;
    let n_data = cfg.resolve_usize("n_data", 1000)?;
    let n_test = cfg.resolve_usize("n_test", 400)?;
    let epochs = cfg.resolve_usize("epochs", 300)?;
    let batch = cfg.resolve_usize("batch", 100)?;
    let lr = cfg.resolve_f64("lr", 1e-3)?;
    let lr_decay = cfg.resolve_f64("lr_decay", 1.0)?;
    let seed = cfg.resolve_u64("seed", 13)?;
    let eval_noise = cfg.resolve_f64("eval_noise_std", 0.025)?;
    let train_noise = cfg.resolve_f64("noise_std", 0.025)?;
    loss_kind(cfg, "mse")?;

    let spec = Ensemble2dSpec::standard(n, n_data);
    let samples = gen_poisson_ensemble_2d(&spec, seed)?;
    let prob = spec.problem()?;
    let s3 = 3.0_f64.sqrt();
    let basis = Tensor::new(
        vec![n * n, 2],
        prob.grid
            .nodes()
            .iter()
            .flat_map(|&(x, y)| [2.0 * y, s3 * (2.0 * x * x + 2.0 * y * y - 1.0)])
            .collect::<Vec<_>>(),
    )?;

    // 30 -> conv3 -> 28 -> conv3 -> 26 -> avgpool2 -> 13.
    let pooled = (n - 4) / 2;
    let default_spec = format!(
        "conv2d(1,32,3,relu) conv2d(32,64,3,relu) avgpool2d(2) flatten dense({},128,relu) dense(128,2,sigmoid)",
        64 * pooled * pooled
    );
    let spec_text = cfg.resolve_str("encoder", &default_spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bottleneck = Bottleneck::Encoder(build_model(&parse_spec(&spec_text)?, &mut rng));

    let problem = Inverse2dProblem {
        prob,
        basis,
        samples,
        input_shape: vec![1, n, n],
    };
    let history = train(
        &mut bottleneck,
        &problem,
        &TrainOptions {
            epochs,
            batch,
            lr,
            lr_decay,
            input_noise_std: train_noise,
            seed,
        },
    )?;
    let final_loss = *history.last().unwrap_or(&f64::NAN);
    let model = bottleneck.encoder().expect("encoder mode").clone();

    let test = gen_poisson_ensemble_2d(&Ensemble2dSpec::standard(n, n_test), seed + 1)?;
    let truths: Vec<[f64; 2]> = test.iter().map(|s| s.coeffs).collect();
    let shape = vec![1, n, n];
    let clean_inputs: Vec<Tensor> = test
        .iter()
        .map(|s| Tensor::new(shape.clone(), s.solution.values().to_vec()).expect("shape"))
        .collect();
    let clean_preds = encoder_predictions(&model, clean_inputs.clone())?;
    let noisy_preds = encoder_predictions(
        &model,
        clean_inputs
            .iter()
            .enumerate()
            .map(|(k, t)| add_noise(t, eval_noise, seed + 60_000 + k as u64)),
    )?;

    let mut main = r2_rows(
        "poisson_inverse_2d",
        "",
        "main",
        ["a2", "a3"],
        &clean_preds,
        &truths,
        final_loss,
    );
    main.loss_history = history;
    let noisy = r2_rows(
        "poisson_inverse_2d",
        &format!("eval_noise={eval_noise}"),
        "main",
        ["a2", "a3"],
        &noisy_preds,
        &truths,
        final_loss,
    );

    let mut extra = Config::new();
    extra.set("kind", "poisson_inverse_2d");
    Ok(RunOutput {
        reports: vec![main, noisy],
        checkpoint: Some(Checkpoint { model, extra }),
    })
}

pub fn generate_ensemble_1d(cfg: &mut Config) -> Result<Vec<(String, Container)>> {
    let nx = cfg.resolve_usize("nx", 160)?;
    let n_data = cfg.resolve_usize("n_data", 1000)?;
    let seed = cfg.resolve_u64("seed", 11)?;
    let spec = Ensemble1dSpec::standard(nx, n_data);
    let samples = gen_poisson_ensemble_1d(&spec, seed)?;
    let mut solutions = Vec::with_capacity(n_data * nx);
    let mut coeffs = Vec::with_capacity(n_data * 2);
    for s in &samples {
        solutions.extend_from_slice(&s.solution);
        coeffs.extend_from_slice(&s.coeffs);
    }
    let mut header = Config::new();
    header.set("kind", "poisson_inverse_1d");
    header.set("nx", nx);
    header.set("n_data", n_data);
    header.set("seed", seed);
    header.set("a_lo", 0.25);
    header.set("a_hi", 0.75);
    Ok(vec![(
        "ensemble_1d.bpds".into(),
        Container {
            header,
            arrays: vec![
                ("solutions".into(), Tensor::new(vec![n_data, nx], solutions)?),
                ("coeffs".into(), Tensor::new(vec![n_data, 2], coeffs)?),
            ],
        },
    )])
}

pub fn generate_ensemble_2d(cfg: &mut Config) -> Result<Vec<(String, Container)>> {
    let n = cfg.resolve_usize("n", 30)?;
    let n_data = cfg.resolve_usize("n_data", 1000)?;
    let seed = cfg.resolve_u64("seed", 13)?;
    let spec = Ensemble2dSpec::standard(n, n_data);
    let samples = gen_poisson_ensemble_2d(&spec, seed)?;
    let mut solutions = Vec::with_capacity(n_data * n * n);
    let mut coeffs = Vec::with_capacity(n_data * 2);
    for s in &samples {
        solutions.extend_from_slice(s.solution.values());
        coeffs.extend_from_slice(&s.coeffs);
    }
    let mut header = Config::new();
    header.set("kind", "poisson_inverse_2d");
    header.set("n", n);
    header.set("n_data", n_data);
    header.set("seed", seed);
    Ok(vec![(
        "ensemble_2d.bpds".into(),
        Container {
            header,
            arrays: vec![
                (
                    "solutions".into(),
                    Tensor::new(vec![n_data, n * n], solutions)?,
                ),
                ("coeffs".into(), Tensor::new(vec![n_data, 2], coeffs)?),
            ],
        },
    )])
}

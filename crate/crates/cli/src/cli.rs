//! Command-line entry points: generate, train, eval, sweep.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::{Config, ConfigError};
use crate::experiments;
use crate::formats::{load_checkpoint, read_dataset, save_checkpoint, write_dataset, Container,
    FormatError};
use crate::metrics::{mean_std, r_squared, to_csv, MetricsReport, ParamStat};
use crate::sweep::{parse_axis, run_sweep, Axis};
use crate::train::{encoder_predictions, NumericalError};

#[derive(Parser)]
#[command(
    name = "bipde",
    about = "Inverse-PDE parameter recovery with differentiable solver layers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset a config describes.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the experiment a config describes.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a trained encoder over a dataset (inference only).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for predictions.csv and metrics.csv (stdout summary otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cartesian sweep over one or more config axes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Repeatable: --axis nx=20,40,80
        #[arg(long = "axis")]
        axes: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Worker pool width; 0 uses the default.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

/// Run the CLI and return the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<NumericalError>().is_some() {
        return 3;
    }
    if let Some(core) = err.downcast_ref::<bipde_core::Error>() {
        return match core {
            bipde_core::Error::Invalid(_) => 2,
            _ => 3,
        };
    }
    if err.downcast_ref::<ConfigError>().is_some()
        || err.downcast_ref::<FormatError>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
    {
        return 2;
    }
    2
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { config, out } => generate(&config, &out),
        Command::Train { config, out } => train(&config, &out),
        Command::Eval {
            checkpoint,
            data,
            out,
        } => eval(&checkpoint, &data, out.as_deref()),
        Command::Sweep {
            config,
            axes,
            out,
            workers,
        } => sweep(&config, &axes, &out, workers),
    }
}

fn read_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(Config::parse(&text)?)
}

fn write_outputs(
    out: &Path,
    cfg: &Config,
    reports: &[MetricsReport],
    checkpoint: Option<&experiments::Checkpoint>,
) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("manifest.txt"), cfg.to_text())?;
    fs::write(out.join("metrics.csv"), to_csv(reports))?;
    let mut loss = String::from("epoch,loss\n");
    for r in reports {
        for (e, l) in r.loss_history.iter().enumerate() {
            let _ = writeln!(loss, "{e},{l}");
        }
    }
    fs::write(out.join("loss.csv"), loss)?;
    if let Some(ck) = checkpoint {
        save_checkpoint(&out.join("checkpoint.bpnn"), &ck.model, &ck.extra)?;
    }
    Ok(())
}

fn generate(config: &Path, out: &Path) -> Result<()> {
    let mut cfg = read_config(config)?;
    let files = experiments::generate(&mut cfg)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("manifest.txt"), cfg.to_text())?;
    for (name, container) in &files {
        write_dataset(&out.join(name), container)?;
        println!("wrote {}", out.join(name).display());
    }
    Ok(())
}

fn train(config: &Path, out: &Path) -> Result<()> {
    let mut cfg = read_config(config)?;
    let result = experiments::run(&mut cfg)?;
    write_outputs(out, &cfg, &result.reports, result.checkpoint.as_ref())?;
    for r in &result.reports {
        for p in &r.params {
            match p.true_value {
                Some(t) => println!(
                    "{} [{}] {}: recovered {} (true {}, std {})",
                    r.experiment, r.cell, p.name, p.mean, t, p.std
                ),
                None => println!(
                    "{} [{}] {}: mean {} std {} r2 {:?}",
                    r.experiment, r.cell, p.name, p.mean, p.std, p.r2
                ),
            }
        }
    }
    Ok(())
}

fn sweep(config: &Path, axes: &[String], out: &Path, workers: usize) -> Result<()> {
    let mut cfg = read_config(config)?;
    let axes: Vec<Axis> = if axes.is_empty() {
        // Manifest re-runs carry their axes inline.
        let stored = cfg
            .get("sweep_axes")
            .ok_or_else(|| ConfigError::new("sweep needs --axis or a sweep_axes key"))?
            .to_string();
        stored
            .split('|')
            .map(parse_axis)
            .collect::<Result<_, _>>()?
    } else {
        axes.iter()
            .map(|s| parse_axis(s))
            .collect::<Result<_, _>>()?
    };
    cfg.set(
        "sweep_axes",
        axes.iter()
            .map(|a| format!("{}={}", a.key, a.values.join(",")))
            .collect::<Vec<_>>()
            .join("|"),
    );
    let result = run_sweep(&cfg, &axes, workers)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("manifest.txt"), cfg.to_text())?;
    fs::write(out.join("metrics.csv"), to_csv(&result.reports))?;
    if !result.failures.is_empty() {
        let mut text = String::new();
        for (cell, msg) in &result.failures {
            let _ = writeln!(text, "{cell}: {msg}");
        }
        fs::write(out.join("failures.txt"), &text)?;
        eprintln!("{} cell(s) failed; see failures.txt", result.failures.len());
    }
    println!("wrote {}", out.join("metrics.csv").display());
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn eval(checkpoint: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let (model, header) = load_checkpoint(checkpoint)?;
    let container = read_dataset(data)?;
    let kind = container
        .header
        .get("kind")
        .ok_or_else(|| ConfigError::new("dataset header missing 'kind'"))?
        .to_string();

    let (predictions, report) = match kind.as_str() {
        "poisson_inverse_1d" | "poisson_inverse_2d" => eval_ensemble(&model, &container, &kind)?,
        "burgers_shift" => eval_burgers(&model, &header, &container)?,
        "rbf_shift" | "rbf_inverse" => eval_rbf(&model, &header, &container, &kind)?,
        other => return Err(ConfigError::new(format!("cannot evaluate dataset kind '{other}'")).into()),
    };

    let metrics_csv = to_csv(std::slice::from_ref(&report));
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("predictions.csv"), &predictions)?;
            fs::write(dir.join("metrics.csv"), &metrics_csv)?;
            println!("wrote {}", dir.join("metrics.csv").display());
        }
        None => print!("{metrics_csv}"),
    }
    Ok(())
}

fn rows_of<'c>(c: &'c Container, name: &str) -> Result<(usize, usize, &'c [f64])> {
    let t = c
        .array(name)
        .ok_or_else(|| ConfigError::new(format!("dataset missing '{name}' array")))?;
    Ok((t.shape()[0], t.shape()[1], t.values()))
}

fn eval_ensemble(
    model: &bipde_core::nn::Model,
    c: &Container,
    kind: &str,
) -> Result<(String, MetricsReport)> {
    let (n, len, solutions) = rows_of(c, "solutions")?;
    let (_, _, coeffs) = rows_of(c, "coeffs")?;
    let inputs = (0..n)
        .map(|k| experiments::shape_input(model, &solutions[k * len..(k + 1) * len]))
        .collect::<Result<Vec<_>>>()?;
    let preds = encoder_predictions(model, inputs)?;

    let names = if kind == "poisson_inverse_1d" {
        ["a0", "a1"]
    } else {
        ["a2", "a3"]
    };
    let mut csv = format!("sample,pred_{},pred_{},true_{},true_{}\n", names[0], names[1], names[0], names[1]);
    for (k, p) in preds.iter().enumerate() {
        let _ = writeln!(csv, "{k},{},{},{},{}", p[0], p[1], coeffs[2 * k], coeffs[2 * k + 1]);
    }
    let mut report = MetricsReport::new(format!("eval_{kind}"));
    for (j, name) in names.iter().enumerate() {
        let pv: Vec<f64> = preds.iter().map(|p| p[j]).collect();
        let tv: Vec<f64> = (0..n).map(|k| coeffs[2 * k + j]).collect();
        let (mean, std) = mean_std(&pv);
        report.params.push(ParamStat {
            name: (*name).into(),
            true_value: None,
            mean,
            std,
            r2: Some(r_squared(&pv, &tv)),
        });
    }
    Ok((csv, report))
}

fn eval_burgers(
    model: &bipde_core::nn::Model,
    header: &Config,
    c: &Container,
) -> Result<(String, MetricsReport)> {
    let (n, len, inputs) = rows_of(c, "inputs")?;
    let nu_range = (header.f64("nu_lo", 0.0)?, header.f64("nu_hi", 0.05)?);
    let gamma_range = (header.f64("gamma_lo", 0.0)?, header.f64("gamma_hi", 2.0)?);
    let two = header.str_or("unknowns", "nu_gamma") == "nu_gamma";
    let shaped = (0..n)
        .map(|k| experiments::shape_input(model, &inputs[k * len..(k + 1) * len]))
        .collect::<Result<Vec<_>>>()?;
    let preds = encoder_predictions(model, shaped)?;
    let nus: Vec<f64> = preds
        .iter()
        .map(|p| nu_range.0 + (nu_range.1 - nu_range.0) * sigmoid(p[0]))
        .collect();
    let gammas: Vec<f64> = if two {
        preds
            .iter()
            .map(|p| gamma_range.0 + (gamma_range.1 - gamma_range.0) * sigmoid(p[1]))
            .collect()
    } else {
        Vec::new()
    };

    let mut csv = String::from(if two { "pair,nu_hat,gamma_hat\n" } else { "pair,nu_hat\n" });
    for k in 0..n {
        if two {
            let _ = writeln!(csv, "{k},{},{}", nus[k], gammas[k]);
        } else {
            let _ = writeln!(csv, "{k},{}", nus[k]);
        }
    }
    let mut report = MetricsReport::new("eval_burgers_shift");
    let (mean, std) = mean_std(&nus);
    report.params.push(ParamStat {
        name: "nu".into(),
        true_value: c.header.get("nu_true").and_then(|v| v.parse().ok()),
        mean,
        std,
        r2: None,
    });
    if two {
        let (mean, std) = mean_std(&gammas);
        report.params.push(ParamStat {
            name: "gamma".into(),
            true_value: c.header.get("gamma_true").and_then(|v| v.parse().ok()),
            mean,
            std,
            r2: None,
        });
    }
    Ok((csv, report))
}

fn eval_rbf(
    model: &bipde_core::nn::Model,
    header: &Config,
    c: &Container,
    kind: &str,
) -> Result<(String, MetricsReport)> {
    let (n, len, inputs) = rows_of(c, "inputs")?;
    let nu_range = (header.f64("nu_lo", 0.0)?, header.f64("nu_hi", 0.1)?);
    let shaped = (0..n)
        .map(|k| experiments::shape_input(model, &inputs[k * len..(k + 1) * len]))
        .collect::<Result<Vec<_>>>()?;
    let preds = encoder_predictions(model, shaped)?;
    let nus: Vec<f64> = preds
        .iter()
        .map(|p| {
            let last = p[p.len() - 1];
            nu_range.0 + (nu_range.1 - nu_range.0) * sigmoid(last)
        })
        .collect();

    let mut csv = String::from("pair,nu_hat\n");
    for (k, nu) in nus.iter().enumerate() {
        let _ = writeln!(csv, "{k},{nu}");
    }
    let mut report = MetricsReport::new(format!("eval_{kind}"));
    let (mean, std) = mean_std(&nus);
    let r2 = if kind == "rbf_inverse" {
        let truths = c
            .array("nu_values")
            .ok_or_else(|| ConfigError::new("rbf_inverse dataset missing nu_values"))?;
        Some(r_squared(&nus, truths.values()))
    } else {
        None
    };
    report.params.push(ParamStat {
        name: "nu".into(),
        true_value: c.header.get("nu_true").and_then(|v| v.parse().ok()),
        mean,
        std,
        r2,
    });
    Ok((csv, report))
}

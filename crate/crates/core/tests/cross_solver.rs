//! Agreement between the compact-FD stepper and the meshless RBF stepper on
//! short smooth trajectories, and exact boundary injection of the latter.

use bipde_core::burgers::{roll_forward, Cfd6};
use bipde_core::datagen::linear_interp;
use bipde_core::rbf::{build_matrices, evaluate, fit_initial, rbf_step, representation_matrix,
    uniform_seeds, RbfConfig};
use bipde_core::tape::Tape;
use bipde_core::Tensor;

use std::f64::consts::PI;

struct Reference {
    xs: Vec<f64>,
    traj: Vec<Vec<f64>>,
}

fn cfd6_reference(n: usize, nu: f64, steps: usize, dt: f64) -> Reference {
    let h = 2.0 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * h).collect();
    let op = Cfd6::new(n, h).unwrap();
    let mut tape = Tape::new();
    let d1 = op.d1_var(&mut tape);
    let nu_v = tape.constant(Tensor::scalar(nu));
    let gamma = tape.constant(Tensor::scalar(1.0));
    let u0: Vec<f64> = xs.iter().map(|&x| -(PI * x).sin()).collect();
    let u0 = tape.constant(Tensor::vector(u0));
    let vars = roll_forward(&mut tape, u0, steps, d1, nu_v, gamma, dt).unwrap();
    Reference {
        xs,
        traj: vars.iter().map(|&v| tape.values(v).to_vec()).collect(),
    }
}

#[test]
fn single_step_agrees_with_compact_fd_reference() {
    let nu = 0.1 / PI;
    let dt = 0.001;
    let reference = cfd6_reference(160, nu, 1, dt);

    let cfg = RbfConfig::uniform(80, -1.0, 1.0).unwrap();
    let mut tape = Tape::new();
    let seeds = tape.constant(Tensor::vector(uniform_seeds(20, -1.0, 1.0)));
    let shapes = tape.constant(Tensor::filled(vec![21], 0.25));
    let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
    let u0: Vec<f64> = cfg.collocation.iter().map(|&x| -(PI * x).sin()).collect();
    let u0 = tape.constant(Tensor::vector(u0));
    let (lam0, _) = fit_initial(&mut tape, &mats, u0).unwrap();
    let nu_v = tape.constant(Tensor::scalar(nu));
    let gamma = tape.constant(Tensor::scalar(1.0));
    let lam1 = rbf_step(&mut tape, &mats, lam0, nu_v, gamma, dt).unwrap();
    let field = evaluate(&mut tape, &mats, lam1).unwrap();

    let mut max_err = 0.0_f64;
    for (&x, &v) in cfg.collocation.iter().zip(tape.values(field)) {
        let fd = linear_interp(&reference.xs, &reference.traj[1], x);
        max_err = max_err.max((v - fd).abs());
    }
    assert!(max_err <= 5e-3, "single-step disagreement {max_err}");
}

#[test]
fn ten_step_rollout_tracks_compact_fd_reference() {
    let nu = 0.1 / PI;
    let dt = 0.001;
    let p = 10;
    let reference = cfd6_reference(160, nu, p, dt);

    let cfg = RbfConfig::uniform(80, -1.0, 1.0).unwrap();
    let mut tape = Tape::new();
    let seeds = tape.constant(Tensor::vector(uniform_seeds(20, -1.0, 1.0)));
    let shapes = tape.constant(Tensor::filled(vec![21], 0.25));
    let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
    let u0: Vec<f64> = cfg.collocation.iter().map(|&x| -(PI * x).sin()).collect();
    let u0 = tape.constant(Tensor::vector(u0));
    let nu_v = tape.constant(Tensor::scalar(nu));
    let gamma = tape.constant(Tensor::scalar(1.0));
    let roll =
        bipde_core::rbf::rbf_rollout(&mut tape, &mats, u0, p, nu_v, gamma, dt).unwrap();

    let mut max_err = 0.0_f64;
    for (&x, &v) in cfg.collocation.iter().zip(tape.values(roll.field)) {
        let fd = linear_interp(&reference.xs, &reference.traj[p], x);
        max_err = max_err.max((v - fd).abs());
    }
    assert!(max_err <= 1e-2, "rollout disagreement {max_err}");
}

#[test]
fn represented_solution_stays_pinned_at_boundaries_through_stepping() {
    let cfg = RbfConfig::uniform(30, -1.0, 1.0).unwrap();
    let mut tape = Tape::new();
    let seeds = tape.constant(Tensor::vector(uniform_seeds(10, -1.0, 1.0)));
    let shapes = tape.constant(Tensor::filled(vec![11], 0.25));
    let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
    let u0: Vec<f64> = cfg.collocation.iter().map(|&x| -(PI * x).sin()).collect();
    let u0 = tape.constant(Tensor::vector(u0));
    let (mut lam, _) = fit_initial(&mut tape, &mats, u0).unwrap();
    let nu_v = tape.constant(Tensor::scalar(0.02));
    let gamma = tape.constant(Tensor::scalar(1.0));
    let a_bnd = representation_matrix(&mut tape, &[-1.0, 1.0], seeds, shapes, -1.0, 1.0).unwrap();
    for _ in 0..5 {
        lam = rbf_step(&mut tape, &mats, lam, nu_v, gamma, 0.001).unwrap();
        let bnd = tape.matmul(a_bnd, lam).unwrap();
        assert_eq!(tape.values(bnd), &[0.0, 0.0]);
    }
}

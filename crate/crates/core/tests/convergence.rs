//! Manufactured-solution convergence of the Poisson discretizations.

use bipde_core::poisson::{embed_interior_2d, solve_1d, solve_2d, Grid1d, Grid2d,
    PoissonProblem1d, PoissonProblem2d};
use bipde_core::tape::Tape;
use bipde_core::Tensor;

use std::f64::consts::PI;

fn fitted_order(errors: &[f64], ns: &[usize]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (1.0 / (n - 1) as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|&e| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    xs.iter()
        .zip(&ys)
        .map(|(&x, &y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|&x| (x - xm) * (x - xm)).sum::<f64>()
}

#[test]
fn poisson_1d_manufactured_solution_second_order() {
    // u* = sin(pi x) on [0, 1] with D = 1 and f = pi^2 sin(pi x).
    let sizes = [17usize, 33, 65];
    let mut errors = Vec::new();
    for &n in &sizes {
        let grid = Grid1d::new(0.0, 1.0, n).unwrap();
        let prob = PoissonProblem1d {
            grid,
            f: grid.nodes().iter().map(|&x| PI * PI * (PI * x).sin()).collect(),
            u_left: 0.0,
            u_right: 0.0,
        };
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::filled(vec![n], 1.0));
        let u = solve_1d(&mut tape, &prob, d).unwrap();
        let mut err = 0.0_f64;
        for (k, &v) in tape.values(u).iter().enumerate() {
            let x = grid.node(k + 1);
            err = err.max((v - (PI * x).sin()).abs());
        }
        errors.push(err);
    }
    let order = fitted_order(&errors, &sizes);
    assert!(
        (order - 2.0).abs() <= 0.2,
        "1d order {order}, errors {errors:?}"
    );
}

#[test]
fn poisson_2d_manufactured_solution_second_order() {
    // u* = sin(pi x) sin(pi y) on [0, 1]^2 with D = 1, f = 2 pi^2 u*.
    let sizes = [9usize, 17, 33];
    let mut errors = Vec::new();
    for &n in &sizes {
        let grid = Grid2d::square(0.0, 1.0, n).unwrap();
        let nodes = grid.nodes();
        let prob = PoissonProblem2d {
            grid,
            f: Tensor::new(
                vec![n, n],
                nodes
                    .iter()
                    .map(|&(x, y)| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin())
                    .collect(),
            )
            .unwrap(),
            u_bc: Tensor::zeros(vec![n, n]),
        };
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::filled(vec![n * n], 1.0));
        let u = solve_2d(&mut tape, &prob, d).unwrap();
        let full = embed_interior_2d(&prob, tape.values(u));
        let mut err = 0.0_f64;
        for (p, &(x, y)) in nodes.iter().enumerate() {
            err = err.max((full.values()[p] - (PI * x).sin() * (PI * y).sin()).abs());
        }
        errors.push(err);
    }
    let order = fitted_order(&errors, &sizes);
    assert!(
        (order - 2.0).abs() <= 0.2,
        "2d order {order}, errors {errors:?}"
    );
}

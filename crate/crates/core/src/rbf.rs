//! Meshless Burgers stepper on multiquadric radial basis functions.
//!
//! The solution is represented as a combination of MQ kernels whose affine
//! tail has been eliminated algebraically, so every represented field
//! vanishes at the two boundary abscissae exactly. Seed locations and shape
//! parameters enter the collocation matrices differentiably, which lets a
//! training loop move them alongside the hidden diffusion coefficient. Time
//! stepping is the compact second-order implicit scheme, solved in the
//! least-squares sense when there are more collocation points than seeds.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::tape::{Tape, Var};
use crate::{Error, Result, Tensor};

/// Multiquadric kernel value and first two derivatives at `x`.
///
/// phi = sqrt((x - xj)^2 + c^2), phi' = (x - xj)/phi, phi'' = c^2/phi^3.
pub fn mq_phi(x: f64, xj: f64, cj: f64) -> (f64, f64, f64) {
    let r = x - xj;
    let phi = fmath::sqrt(r * r + cj * cj);
    (phi, r / phi, cj * cj / (phi * phi * phi))
}

/// Interior collocation points x_j = (1 + j)/(N_d + 2), j = 0..N_d, mapped
/// into (x_l, x_r). Returns N_d + 1 points.
pub fn uniform_collocation(n_d: usize, x_l: f64, x_r: f64) -> Vec<f64> {
    let len = x_r - x_l;
    (0..=n_d)
        .map(|j| x_l + len * (1.0 + j as f64) / (n_d as f64 + 2.0))
        .collect()
}

/// Uniformly spaced reference seeds x_j = j/N_s mapped onto [x_l, x_r].
/// Returns N_s + 1 points.
pub fn uniform_seeds(n_s: usize, x_l: f64, x_r: f64) -> Vec<f64> {
    let len = x_r - x_l;
    (0..=n_s)
        .map(|j| x_l + len * j as f64 / n_s as f64)
        .collect()
}

/// Boundary abscissae and collocation points of one meshless discretization.
///
/// Seeds and shape parameters are not stored here: they live on a tape so
/// they can be trained.
#[derive(Clone, Debug)]
pub struct RbfConfig {
    pub x_l: f64,
    pub x_r: f64,
    pub collocation: Vec<f64>,
    /// Constant Tikhonov term added to the normal equations of the
    /// collocation solves. Zero keeps them exact; a tiny positive value
    /// keeps training alive when trainable seeds momentarily coincide
    /// (coincident seeds make the basis columns exactly dependent).
    pub ridge: f64,
}

impl RbfConfig {
    pub fn new(x_l: f64, x_r: f64, collocation: Vec<f64>) -> Result<Self> {
        if !(x_r > x_l) {
            return Err(Error::invalid("boundary abscissae must satisfy x_l < x_r"));
        }
        if collocation.is_empty() {
            return Err(Error::invalid("need at least one collocation point"));
        }
        Ok(RbfConfig {
            x_l,
            x_r,
            collocation,
            ridge: 0.0,
        })
    }

    /// Uniform interior collocation with `n_d + 1` points.
    pub fn uniform(n_d: usize, x_l: f64, x_r: f64) -> Result<Self> {
        RbfConfig::new(x_l, x_r, uniform_collocation(n_d, x_l, x_r))
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

/// Boundary-condition-injected collocation matrices, each
/// `[points x seeds]` and differentiable with respect to seeds and shapes.
pub struct RbfMatrices {
    pub a: Var,
    pub a_x: Var,
    pub a_xx: Var,
    pub rows: usize,
    pub cols: usize,
    ridge: f64,
}

/// Least-squares solve through the normal equations, with the matrices'
/// configured ridge on the diagonal (the adjoint still composes from the
/// existing rules since the ridge is a constant).
fn normal_solve(tape: &mut Tape, mats_ridge: f64, cols: usize, a: Var, b: Var) -> Result<Var> {
    if mats_ridge == 0.0 {
        return tape.lstsq_solve(a, b);
    }
    let at = tape.transpose(a)?;
    let ata = tape.matmul(at, a)?;
    let mut diag = vec![0.0; cols * cols];
    for j in 0..cols {
        diag[j * cols + j] = mats_ridge;
    }
    let diag = tape.constant(Tensor::new(vec![cols, cols], diag)?);
    let ata = tape.add(ata, diag)?;
    let atb = tape.matmul(at, b)?;
    tape.linear_solve(ata, atb)
}

fn seed_row(tape: &mut Tape, seeds: Var) -> Result<(Var, usize)> {
    let cols = tape.values(seeds).len();
    let row = tape.reshape(seeds, vec![1, cols])?;
    Ok((row, cols))
}

/// Kernel matrix pieces at a fixed point set: phi, phi', phi'' with entry
/// (i, j) evaluated at point i for seed j.
fn phi_parts(
    tape: &mut Tape,
    points: &[f64],
    seed_row: Var,
    shape_row: Var,
    cols: usize,
) -> Result<(Var, Var, Var)> {
    let rows = points.len();
    let ones_col = tape.constant(Tensor::filled(vec![rows, 1], 1.0));
    let mut xmat = Vec::with_capacity(rows * cols);
    for &x in points {
        for _ in 0..cols {
            xmat.push(x);
        }
    }
    let xmat = tape.constant(Tensor::new(vec![rows, cols], xmat)?);
    let smat = tape.matmul(ones_col, seed_row)?;
    let cmat = tape.matmul(ones_col, shape_row)?;
    let r = tape.sub(xmat, smat)?;
    let r2 = tape.square(r)?;
    let c2 = tape.square(cmat)?;
    let sum = tape.add(r2, c2)?;
    let phi = tape.sqrt(sum)?;
    let dphi = tape.div(r, phi)?;
    let phi2 = tape.square(phi)?;
    let phi3 = tape.mul(phi, phi2)?;
    let ddphi = tape.div(c2, phi3)?;
    Ok((phi, dphi, ddphi))
}

/// Build the boundary-injected representation matrix at arbitrary points:
/// A_ij = phi_j(x_i) - phi_j(x_l) - [phi_j(x_r) - phi_j(x_l)]/(x_r - x_l) * (x_i - x_l).
pub fn representation_matrix(
    tape: &mut Tape,
    points: &[f64],
    seeds: Var,
    shapes: Var,
    x_l: f64,
    x_r: f64,
) -> Result<Var> {
    let (mats, _, _) = injected_matrices(tape, points, seeds, shapes, x_l, x_r)?;
    Ok(mats)
}

fn injected_matrices(
    tape: &mut Tape,
    points: &[f64],
    seeds: Var,
    shapes: Var,
    x_l: f64,
    x_r: f64,
) -> Result<(Var, Var, Var)> {
    if tape.values(shapes).iter().any(|&c| c <= 0.0) {
        return Err(Error::invalid("shape parameters must be positive"));
    }
    if tape.values(seeds).len() != tape.values(shapes).len() {
        return Err(Error::ShapeMismatch {
            op: "rbf_matrices",
            lhs: tape.shape(seeds).to_vec(),
            rhs: tape.shape(shapes).to_vec(),
        });
    }
    let (srow, cols) = seed_row(tape, seeds)?;
    let crow = tape.reshape(shapes, vec![1, cols])?;
    let rows = points.len();

    let (phi, dphi, ddphi) = phi_parts(tape, points, srow, crow, cols)?;
    let (phi_l, _, _) = phi_parts(tape, &[x_l], srow, crow, cols)?;
    let (phi_r, _, _) = phi_parts(tape, &[x_r], srow, crow, cols)?;

    // Slope of the injected affine correction, one value per seed.
    let dphi_lr = tape.sub(phi_r, phi_l)?;
    let slope = tape.scale(dphi_lr, 1.0 / (x_r - x_l))?;

    let ones_col = tape.constant(Tensor::filled(vec![rows, 1], 1.0));
    let phi_l_mat = tape.matmul(ones_col, phi_l)?;
    let offsets = tape.constant(Tensor::new(
        vec![rows, 1],
        points.iter().map(|&x| x - x_l).collect(),
    )?);
    let slope_off = tape.matmul(offsets, slope)?;
    let tmp = tape.sub(phi, phi_l_mat)?;
    let a = tape.sub(tmp, slope_off)?;

    let slope_mat = tape.matmul(ones_col, slope)?;
    let a_x = tape.sub(dphi, slope_mat)?;

    Ok((a, a_x, ddphi))
}

/// Assemble A, A_x, A_xx over the configured collocation points.
pub fn build_matrices(
    tape: &mut Tape,
    cfg: &RbfConfig,
    seeds: Var,
    shapes: Var,
) -> Result<RbfMatrices> {
    let cols = tape.values(seeds).len();
    let rows = cfg.collocation.len();
    if rows < cols {
        return Err(Error::invalid(
            "need at least as many collocation points as seeds",
        ));
    }
    let (a, a_x, a_xx) =
        injected_matrices(tape, &cfg.collocation, seeds, shapes, cfg.x_l, cfg.x_r)?;
    Ok(RbfMatrices {
        a,
        a_x,
        a_xx,
        rows,
        cols,
        ridge: cfg.ridge,
    })
}

/// Least-squares fit of the coefficients to values at the collocation
/// points. Returns the coefficient vector and the max-norm fit residual.
pub fn fit_initial(tape: &mut Tape, mats: &RbfMatrices, u0: Var) -> Result<(Var, f64)> {
    let lambda = normal_solve(tape, mats.ridge, mats.cols, mats.a, u0)?;
    let recon = tape.matmul(mats.a, lambda)?;
    let residual = tape
        .values(recon)
        .iter()
        .zip(tape.values(u0))
        .fold(0.0_f64, |m, (&r, &u)| m.max((r - u).abs()));
    Ok((lambda, residual))
}

/// Represented field at the collocation points: A * lambda.
pub fn evaluate(tape: &mut Tape, mats: &RbfMatrices, lambda: Var) -> Result<Var> {
    tape.matmul(mats.a, lambda)
}

/// One implicit compact second-order step.
///
/// Solves
/// `[A + (g_x 1^T) . A + (g 1^T) . A_x - (nu dt/2) A_xx] L' = [A + (nu dt/2) A_xx] L`
/// with g = (gamma dt/2) A L and g_x = (gamma dt/2) A_x L, in the
/// least-squares sense for rectangular systems.
pub fn rbf_step(
    tape: &mut Tape,
    mats: &RbfMatrices,
    lambda: Var,
    nu: Var,
    gamma: Var,
    dt: f64,
) -> Result<Var> {
    let ones_row = tape.constant(Tensor::filled(vec![1, mats.cols], 1.0));

    let az = tape.matmul(mats.a, lambda)?;
    let axz = tape.matmul(mats.a_x, lambda)?;
    let g = tape.mul(gamma, az)?;
    let g = tape.scale(g, 0.5 * dt)?;
    let gx = tape.mul(gamma, axz)?;
    let gx = tape.scale(gx, 0.5 * dt)?;

    let g_col = tape.reshape(g, vec![mats.rows, 1])?;
    let gx_col = tape.reshape(gx, vec![mats.rows, 1])?;
    let g_mat = tape.matmul(g_col, ones_row)?;
    let gx_mat = tape.matmul(gx_col, ones_row)?;

    let adv_a = tape.mul(gx_mat, mats.a)?;
    let adv_ax = tape.mul(g_mat, mats.a_x)?;
    let visc = tape.mul(nu, mats.a_xx)?;
    let visc = tape.scale(visc, 0.5 * dt)?;

    let lhs = tape.add(mats.a, adv_a)?;
    let lhs = tape.add(lhs, adv_ax)?;
    let lhs = tape.sub(lhs, visc)?;

    let rhs_mat = tape.add(mats.a, visc)?;
    let rhs = tape.matmul(rhs_mat, lambda)?;
    normal_solve(tape, mats.ridge, mats.cols, lhs, rhs)
}

/// Fit the initial state, take `p` implicit steps, and evaluate at the
/// collocation points; fully on tape.
pub struct Rollout {
    pub field: Var,
    pub lambda: Var,
    pub fit_residual: f64,
}

pub fn rbf_rollout(
    tape: &mut Tape,
    mats: &RbfMatrices,
    u0: Var,
    p: usize,
    nu: Var,
    gamma: Var,
    dt: f64,
) -> Result<Rollout> {
    if p == 0 {
        return Err(Error::invalid("rollout needs p >= 1 steps"));
    }
    let (mut lambda, fit_residual) = fit_initial(tape, mats, u0)?;
    for _ in 0..p {
        lambda = rbf_step(tape, mats, lambda, nu, gamma, dt)?;
    }
    let field = evaluate(tape, mats, lambda)?;
    Ok(Rollout {
        field,
        lambda,
        fit_residual,
    })
}

/// Affine ranges that turn raw sigmoid outputs into physical quantities.
#[derive(Clone, Copy, Debug)]
pub struct BottleneckScaling {
    pub c_min: f64,
    pub c_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl BottleneckScaling {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_min < self.c_max) || self.c_min <= 0.0 {
            return Err(Error::invalid("shape-parameter bounds inverted or non-positive"));
        }
        if !(self.nu_min < self.nu_max) {
            return Err(Error::invalid("diffusion bounds inverted"));
        }
        Ok(())
    }
}

/// Split a `2 N_s + 1` vector of sigmoid outputs into seed locations, shape
/// parameters and the diffusion coefficient.
///
/// The first ceil(N_s/2) outputs are negated to cover [-1, 0], the rest stay
/// in [0, 1]; the next N_s map affinely onto [c_min, c_max]; the last maps
/// onto [nu_min, nu_max].
pub fn bottleneck_to_config(
    tape: &mut Tape,
    raw: Var,
    scaling: &BottleneckScaling,
) -> Result<(Var, Var, Var)> {
    scaling.validate()?;
    let len = tape.values(raw).len();
    if len < 3 || len % 2 == 0 {
        return Err(Error::invalid(
            "bottleneck vector must have odd length 2*N_s + 1 with N_s >= 1",
        ));
    }
    let n_s = (len - 1) / 2;
    let neg = n_s.div_ceil(2);

    let left = tape.gather(raw, (0..neg).collect::<Vec<_>>())?;
    let left = tape.scale(left, -1.0)?;
    let right = tape.gather(raw, (neg..n_s).collect::<Vec<_>>())?;
    let seeds = tape.scatter_add(
        vec![
            (left, (0..neg).collect::<Vec<_>>().into()),
            (right, (neg..n_s).collect::<Vec<_>>().into()),
        ],
        n_s,
    )?;

    let craw = tape.gather(raw, (n_s..2 * n_s).collect::<Vec<_>>())?;
    let craw = tape.scale(craw, scaling.c_max - scaling.c_min)?;
    let shapes = tape.offset(craw, scaling.c_min)?;

    let nraw = tape.gather(raw, vec![2 * n_s])?;
    let nraw = tape.scale(nraw, scaling.nu_max - scaling.nu_min)?;
    let nu = tape.offset(nraw, scaling.nu_min)?;

    Ok((seeds, shapes, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::GradCheck;

    #[test]
    fn kernel_value_and_curvature_at_center() {
        let (phi, dphi, ddphi) = mq_phi(0.4, 0.4, 0.3);
        assert_eq!(phi, 0.3);
        assert_eq!(dphi, 0.0);
        assert!((ddphi - 1.0 / 0.3).abs() < 1e-15);
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        let h = 1e-6;
        for &(x, xj, c) in &[(0.3, -0.1, 0.25), (-0.7, 0.4, 0.05), (0.0, 0.0, 1.0)] {
            let (_, dphi, ddphi) = mq_phi(x, xj, c);
            let fp = mq_phi(x + h, xj, c).0;
            let fm = mq_phi(x - h, xj, c).0;
            let fd1 = (fp - fm) / (2.0 * h);
            assert!((dphi - fd1).abs() / fd1.abs().max(1e-12) < 1e-7);
            let dp = mq_phi(x + h, xj, c).1;
            let dm = mq_phi(x - h, xj, c).1;
            let fd2 = (dp - dm) / (2.0 * h);
            assert!((ddphi - fd2).abs() / fd2.abs().max(1e-12) < 1e-7);
        }
    }

    #[test]
    fn represented_field_vanishes_at_boundaries_exactly() {
        let mut tape = Tape::new();
        let seeds = tape.constant(Tensor::vector(uniform_seeds(6, -1.0, 1.0)));
        let shapes = tape.constant(Tensor::filled(vec![7], 0.3));
        // Evaluate the representation at the boundary abscissae themselves.
        let a_bnd =
            representation_matrix(&mut tape, &[-1.0, 1.0], seeds, shapes, -1.0, 1.0).unwrap();
        let lambda = tape.constant(Tensor::vector(
            (0..7).map(|k| 0.3 * (k as f64) - 0.9).collect(),
        ));
        let vals = tape.matmul(a_bnd, lambda).unwrap();
        assert_eq!(tape.values(vals), &[0.0, 0.0]);
    }

    #[test]
    fn derivative_matrix_matches_pointwise_formula() {
        let cfg = RbfConfig::uniform(5, -1.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let seed_vals = uniform_seeds(3, -1.0, 1.0);
        let seeds = tape.constant(Tensor::vector(seed_vals.clone()));
        let shapes = tape.constant(Tensor::filled(vec![4], 0.4));
        let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
        let ax = tape.tensor(mats.a_x);
        for (i, &xi) in cfg.collocation.iter().enumerate() {
            for (j, &xj) in seed_vals.iter().enumerate() {
                let (_, dphi, _) = mq_phi(xi, xj, 0.4);
                let (pl, _, _) = mq_phi(-1.0, xj, 0.4);
                let (pr, _, _) = mq_phi(1.0, xj, 0.4);
                let expect = dphi - (pr - pl) / 2.0;
                assert!((ax.at2(i, j) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn matrix_gradients_with_respect_to_shapes_and_seeds() {
        let cfg = RbfConfig::uniform(7, -1.0, 1.0).unwrap();
        let gc = GradCheck::new(1e-6);
        let err = gc
            .run(
                |tape, vs| {
                    let mats = build_matrices(tape, &cfg, vs[0], vs[1])?;
                    // Weighted sum exercises every entry of A.
                    let w = tape.constant(Tensor::new(
                        vec![mats.rows, mats.cols],
                        (0..mats.rows * mats.cols)
                            .map(|k| 0.1 + (k % 5) as f64 * 0.2)
                            .collect(),
                    )?);
                    let prod = tape.mul(mats.a, w)?;
                    tape.sum(prod)
                },
                &[
                    Tensor::vector(vec![-0.8, -0.3, 0.2, 0.7]),
                    Tensor::vector(vec![0.2, 0.35, 0.3, 0.25]),
                ],
            )
            .unwrap();
        assert!(err <= 1e-6, "rbf matrix grad rel err {err}");
    }

    #[test]
    fn fit_recovers_zero_and_representable_fields() {
        let cfg = RbfConfig::uniform(12, -1.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let seeds = tape.constant(Tensor::vector(uniform_seeds(6, -1.0, 1.0)));
        let shapes = tape.constant(Tensor::filled(vec![7], 0.35));
        let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();

        let zero = tape.constant(Tensor::zeros(vec![13]));
        let (lam, res) = fit_initial(&mut tape, &mats, zero).unwrap();
        assert!(tape.values(lam).iter().all(|&v| v.abs() < 1e-12));
        assert!(res < 1e-12);

        let lam_true = tape.constant(Tensor::vector(
            (0..7).map(|k| 0.4 - 0.13 * k as f64).collect(),
        ));
        let u = tape.matmul(mats.a, lam_true).unwrap();
        let (lam_fit, _) = fit_initial(&mut tape, &mats, u).unwrap();
        for (a, b) in tape.values(lam_fit).iter().zip(tape.values(lam_true)) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn sine_fit_residual_is_small_with_uniform_seeds() {
        let cfg = RbfConfig::uniform(80, -1.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let seeds = tape.constant(Tensor::vector(uniform_seeds(20, -1.0, 1.0)));
        let shapes = tape.constant(Tensor::filled(vec![21], 0.25));
        let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
        let u0: Vec<f64> = cfg
            .collocation
            .iter()
            .map(|&x| -fmath::sin(core::f64::consts::PI * x))
            .collect();
        let u0 = tape.constant(Tensor::vector(u0));
        let (_, residual) = fit_initial(&mut tape, &mats, u0).unwrap();
        assert!(residual <= 1e-3, "fit residual {residual}");
    }

    #[test]
    fn zero_coefficients_are_a_fixed_point_of_the_step() {
        let cfg = RbfConfig::uniform(10, -1.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let seeds = tape.constant(Tensor::vector(uniform_seeds(5, -1.0, 1.0)));
        let shapes = tape.constant(Tensor::filled(vec![6], 0.3));
        let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
        let nu = tape.constant(Tensor::scalar(0.01));
        let gamma = tape.constant(Tensor::scalar(1.0));
        let lam0 = tape.constant(Tensor::zeros(vec![6]));
        let lam1 = rbf_step(&mut tape, &mats, lam0, nu, gamma, 0.001).unwrap();
        assert!(tape.values(lam1).iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn vanishing_viscosity_and_advection_give_identity() {
        let cfg = RbfConfig::uniform(24, -1.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let seeds = tape.constant(Tensor::vector(uniform_seeds(8, -1.0, 1.0)));
        let shapes = tape.constant(Tensor::filled(vec![9], 0.3));
        let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
        let u0: Vec<f64> = cfg
            .collocation
            .iter()
            .map(|&x| -fmath::sin(core::f64::consts::PI * x))
            .collect();
        let u0 = tape.constant(Tensor::vector(u0));
        let (lam0, _) = fit_initial(&mut tape, &mats, u0).unwrap();
        let nu = tape.constant(Tensor::scalar(1e-14));
        let gamma = tape.constant(Tensor::scalar(0.0));
        let lam1 = rbf_step(&mut tape, &mats, lam0, nu, gamma, 0.001).unwrap();
        let f0 = tape.matmul(mats.a, lam0).unwrap();
        let f1 = tape.matmul(mats.a, lam1).unwrap();
        for (a, b) in tape.values(f0).iter().zip(tape.values(f1)) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn rollout_composes_fit_step_evaluate() {
        let cfg = RbfConfig::uniform(9, -1.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let seeds = tape.constant(Tensor::vector(uniform_seeds(4, -1.0, 1.0)));
        let shapes = tape.constant(Tensor::filled(vec![5], 0.3));
        let mats = build_matrices(&mut tape, &cfg, seeds, shapes).unwrap();
        let u0: Vec<f64> = cfg.collocation.iter().map(|&x| x * (1.0 - x * x)).collect();
        let u0 = tape.constant(Tensor::vector(u0));
        let nu = tape.constant(Tensor::scalar(0.02));
        let gamma = tape.constant(Tensor::scalar(1.0));
        let roll = rbf_rollout(&mut tape, &mats, u0, 1, nu, gamma, 0.001).unwrap();

        let (lam0, _) = fit_initial(&mut tape, &mats, u0).unwrap();
        let lam1 = rbf_step(&mut tape, &mats, lam0, nu, gamma, 0.001).unwrap();
        let field = evaluate(&mut tape, &mats, lam1).unwrap();
        for (a, b) in tape.values(roll.field).iter().zip(tape.values(field)) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rollout_gradients_pass_finite_difference_check() {
        // p = 3 rollout, N_s = 8, N_d = 24: gradients w.r.t. nu, gamma,
        // seeds and shapes all at once. Shape parameters are kept small so
        // the normal-equations conditioning does not drown the central
        // differences in evaluation noise.
        let cfg = RbfConfig::uniform(24, -1.0, 1.0).unwrap();
        let u0: Vec<f64> = cfg
            .collocation
            .iter()
            .map(|&x| -fmath::sin(core::f64::consts::PI * x))
            .collect();
        let seeds0: Vec<f64> = uniform_seeds(7, -0.9, 0.9);
        let gc = GradCheck::new(1e-5);
        let err = gc
            .run(
                |tape, vs| {
                    let mats = build_matrices(tape, &cfg, vs[2], vs[3])?;
                    let u0 = tape.constant(Tensor::vector(u0.clone()));
                    let roll = rbf_rollout(tape, &mats, u0, 3, vs[0], vs[1], 0.001)?;
                    let sq = tape.square(roll.field)?;
                    tape.sum(sq)
                },
                &[
                    Tensor::scalar(0.03),
                    Tensor::scalar(1.0),
                    Tensor::vector(seeds0),
                    Tensor::vector(vec![0.08; 8]),
                ],
            )
            .unwrap();
        assert!(err <= 1e-4, "rbf rollout grad rel err {err}");
    }

    #[test]
    fn bottleneck_split_and_ranges() {
        let scaling = BottleneckScaling {
            c_min: 0.01,
            c_max: 1.0,
            nu_min: 0.0,
            nu_max: 0.1,
        };
        let mut tape = Tape::new();
        // N_s = 4: two negated seeds, two positive, four shapes, one nu.
        let raw = tape.constant(Tensor::vector(vec![0.5; 9]));
        let (seeds, shapes, nu) = bottleneck_to_config(&mut tape, raw, &scaling).unwrap();
        assert_eq!(tape.values(seeds), &[-0.5, -0.5, 0.5, 0.5]);
        for &c in tape.values(shapes) {
            assert!((c - 0.505).abs() < 1e-15);
        }
        assert!((tape.values(nu)[0] - 0.05).abs() < 1e-15);

        let bad = BottleneckScaling {
            c_min: 1.0,
            c_max: 0.5,
            nu_min: 0.0,
            nu_max: 0.1,
        };
        let raw2 = tape.constant(Tensor::vector(vec![0.5; 9]));
        assert!(bottleneck_to_config(&mut tape, raw2, &bad).is_err());
    }
}

//! Differentiable 1D Burgers stepper: sixth-order compact finite differences
//! in space, third-order TVD Runge-Kutta in time.
//!
//! The derivative operator is the classic tridiagonal compact scheme with
//! one-sided closures at the first and last two rows. Both matrices are
//! constant for a fixed grid, so the dense operator `D1 = B^-1 A` is
//! precomputed once and enters the tape as a constant; the scalar diffusion
//! and advection coefficients stay differentiable through the unrolled
//! stepping.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;
use crate::tape::{Tape, Var};
use crate::{Error, Result, Tensor};

/// Abort threshold on the solution max-norm.
pub const BLOWUP_LIMIT: f64 = 1e3;

/// Sixth-order compact first-derivative operator on `n >= 8` uniform nodes.
#[derive(Clone, Debug)]
pub struct Cfd6 {
    pub n: usize,
    pub h: f64,
    d1: Tensor,
}

impl Cfd6 {
    /// Left-hand tridiagonal matrix with boundary closures.
    pub fn lhs_matrix(n: usize) -> Tensor {
        let alpha = 1.0 / 3.0;
        let mut b = vec![0.0; n * n];
        b[0] = 1.0;
        b[1] = 5.0;
        b[n] = 2.0 / 11.0;
        b[n + 1] = 1.0;
        b[n + 2] = 2.0 / 11.0;
        for i in 2..n - 2 {
            b[i * n + i - 1] = alpha;
            b[i * n + i] = 1.0;
            b[i * n + i + 1] = alpha;
        }
        let r = n - 2;
        b[r * n + r - 1] = 2.0 / 11.0;
        b[r * n + r] = 1.0;
        b[r * n + r + 1] = 2.0 / 11.0;
        let r = n - 1;
        b[r * n + r - 1] = 5.0;
        b[r * n + r] = 1.0;
        Tensor::new(vec![n, n], b).expect("lhs shape")
    }

    /// Right-hand stencil matrix (already scaled by 1/h).
    pub fn rhs_matrix(n: usize, h: f64) -> Tensor {
        // Interior: alpha = 1/3 gives a = 14/9, b = 1/9.
        let a_c = 14.0 / 9.0;
        let b_c = 1.0 / 9.0;
        let inv_h = 1.0 / h;
        let mut a = vec![0.0; n * n];
        let first: [f64; 6] = [
            -197.0 / 60.0,
            -5.0 / 12.0,
            5.0,
            -5.0 / 3.0,
            5.0 / 12.0,
            -1.0 / 20.0,
        ];
        let second: [f64; 6] = [
            -20.0 / 33.0,
            -35.0 / 132.0,
            34.0 / 33.0,
            -7.0 / 33.0,
            2.0 / 33.0,
            -1.0 / 132.0,
        ];
        for (c, &v) in first.iter().enumerate() {
            a[c] = v * inv_h;
        }
        for (c, &v) in second.iter().enumerate() {
            a[n + c] = v * inv_h;
        }
        for i in 2..n - 2 {
            a[i * n + i - 2] = -b_c / 4.0 * inv_h;
            a[i * n + i - 1] = -a_c / 2.0 * inv_h;
            a[i * n + i + 1] = a_c / 2.0 * inv_h;
            a[i * n + i + 2] = b_c / 4.0 * inv_h;
        }
        // Mirrored closures at the right end (signs flipped, columns reversed).
        for (c, &v) in second.iter().enumerate() {
            a[(n - 2) * n + (n - 1 - c)] = -v * inv_h;
        }
        for (c, &v) in first.iter().enumerate() {
            a[(n - 1) * n + (n - 1 - c)] = -v * inv_h;
        }
        Tensor::new(vec![n, n], a).expect("rhs shape")
    }

    /// Build the dense derivative operator by solving `B D1 = A` once.
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::invalid(
                "compact scheme needs at least 8 nodes for its boundary closures",
            ));
        }
        if !(h > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let b = Self::lhs_matrix(n);
        let a = Self::rhs_matrix(n, h);
        let lu = linalg::lu_factor(b.values(), n)?;
        let d1 = lu.solve_matrix(a.values(), n);
        Ok(Cfd6 {
            n,
            h,
            d1: Tensor::new(vec![n, n], d1).expect("operator shape"),
        })
    }

    /// Dense first-derivative operator.
    pub fn d1(&self) -> &Tensor {
        &self.d1
    }

    /// Register the operator on a tape as a constant.
    pub fn d1_var(&self, tape: &mut Tape) -> Var {
        tape.constant(self.d1.clone())
    }
}

/// Homogeneous-Dirichlet mask: ones everywhere except the first and last
/// grid rows. Shape `[n]` for `cols == 0`, else `[n, cols]`.
pub fn dirichlet_mask(n: usize, cols: usize) -> Tensor {
    if cols == 0 {
        let mut m = vec![1.0; n];
        m[0] = 0.0;
        m[n - 1] = 0.0;
        Tensor::vector(m)
    } else {
        let mut m = vec![1.0; n * cols];
        for c in 0..cols {
            m[c] = 0.0;
            m[(n - 1) * cols + c] = 0.0;
        }
        Tensor::new(vec![n, cols], m).expect("mask shape")
    }
}

/// Spatial operator `L u = nu * u'' - gamma * u (.) u'`, with the second
/// derivative formed by applying the first-derivative operator twice.
///
/// `u` may be a single state `[n]` or a matrix of states `[n, cols]` stepped
/// simultaneously.
pub fn apply_l(tape: &mut Tape, u: Var, d1: Var, nu: Var, gamma: Var) -> Result<Var> {
    let du = tape.matmul(d1, u)?;
    let ddu = tape.matmul(d1, du)?;
    let diffusion = tape.mul(nu, ddu)?;
    let udu = tape.mul(u, du)?;
    let advection = tape.mul(gamma, udu)?;
    tape.sub(diffusion, advection)
}

/// One TVD-RK3 step with a caller-supplied spatial operator and per-stage
/// fixup (boundary pinning for the PDE, identity for ODE tests).
pub fn tvd_rk3_step_with<L, P>(
    tape: &mut Tape,
    u: Var,
    dt: f64,
    mut l_op: L,
    mut fixup: P,
) -> Result<Var>
where
    L: FnMut(&mut Tape, Var) -> Result<Var>,
    P: FnMut(&mut Tape, Var) -> Result<Var>,
{
    // u1 = u + dt L(u)
    let lu = l_op(tape, u)?;
    let lu = tape.scale(lu, dt)?;
    let s1 = tape.add(u, lu)?;
    let u1 = fixup(tape, s1)?;

    // u2 = 3/4 u + 1/4 u1 + 1/4 dt L(u1)
    let lu1 = l_op(tape, u1)?;
    let lu1 = tape.scale(lu1, 0.25 * dt)?;
    let a = tape.scale(u, 0.75)?;
    let b = tape.scale(u1, 0.25)?;
    let s2 = tape.add(a, b)?;
    let s2 = tape.add(s2, lu1)?;
    let u2 = fixup(tape, s2)?;

    // u_next = 1/3 u + 2/3 u2 + 2/3 dt L(u2)
    let lu2 = l_op(tape, u2)?;
    let lu2 = tape.scale(lu2, 2.0 / 3.0 * dt)?;
    let a = tape.scale(u, 1.0 / 3.0)?;
    let b = tape.scale(u2, 2.0 / 3.0)?;
    let s3 = tape.add(a, b)?;
    let s3 = tape.add(s3, lu2)?;
    fixup(tape, s3)
}

/// One Burgers TVD-RK3 step; endpoints re-pinned to zero after each stage.
pub fn tvd_rk3_step(
    tape: &mut Tape,
    u: Var,
    d1: Var,
    nu: Var,
    gamma: Var,
    dt: f64,
    mask: Var,
) -> Result<Var> {
    let next = tvd_rk3_step_with(
        tape,
        u,
        dt,
        |t, v| apply_l(t, v, d1, nu, gamma),
        |t, v| t.mul(v, mask),
    )?;
    let amp = tape
        .values(next)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if amp > BLOWUP_LIMIT {
        return Err(Error::BlowUp {
            step: 0,
            limit: BLOWUP_LIMIT,
        });
    }
    Ok(next)
}

/// Unrolled trajectory of `steps` TVD-RK3 steps; element 0 is `u0`.
///
/// Fully on tape, so a loss on any snapshot is differentiable with respect
/// to `nu` and `gamma`.
pub fn roll_forward(
    tape: &mut Tape,
    u0: Var,
    steps: usize,
    d1: Var,
    nu: Var,
    gamma: Var,
    dt: f64,
) -> Result<Vec<Var>> {
    let shape = tape.shape(u0).to_vec();
    let (n, cols) = match shape[..] {
        [n] => (n, 0),
        [n, c] => (n, c),
        _ => return Err(Error::invalid("state must be a vector or matrix")),
    };
    let mask = tape.constant(dirichlet_mask(n, cols));
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(u0);
    let mut u = u0;
    for k in 0..steps {
        u = tvd_rk3_step(tape, u, d1, nu, gamma, dt, mask).map_err(|e| match e {
            Error::BlowUp { limit, .. } => Error::BlowUp { step: k + 1, limit },
            other => other,
        })?;
        traj.push(u);
    }
    Ok(traj)
}

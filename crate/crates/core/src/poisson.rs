//! Differentiable variable-coefficient Poisson solver, 1D and 2D.
//!
//! The divergence-form operator div(D grad u) = -f with Dirichlet boundaries
//! is discretized on a uniform grid with the 5-point stencil (3-point in 1D).
//! Face diffusion values are arithmetic means of the two adjacent nodes, the
//! interior system is assembled densely on the tape, and the solve goes
//! through the tape's linear-solve adjoint, so any loss on the solution is
//! differentiable with respect to the node-centered diffusion field `D`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::tape::{Tape, Var};
use crate::{Error, Result, Tensor};

/// Uniform 1D grid with `n >= 3` nodes, boundary nodes included.
#[derive(Clone, Copy, Debug)]
pub struct Grid1d {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

impl Grid1d {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if n < 3 || !(x_hi > x_lo) {
            return Err(Error::invalid("grid needs n >= 3 and x_hi > x_lo"));
        }
        Ok(Grid1d { x_lo, x_hi, n })
    }

    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}

/// Uniform 2D tensor-product grid, boundary nodes included.
#[derive(Clone, Copy, Debug)]
pub struct Grid2d {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2d {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 || !(x_hi > x_lo) || !(y_hi > y_lo) {
            return Err(Error::invalid("grid needs nx, ny >= 3 and positive extents"));
        }
        Ok(Grid2d {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            nx,
            ny,
        })
    }

    /// Square grid over [lo, hi]^2.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Grid2d::new(lo, hi, lo, hi, n, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_hi - self.y_lo) / (self.ny - 1) as f64
    }

    /// Node coordinate; `i` runs along x, `j` along y.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x_lo + i as f64 * self.dx(), self.y_lo + j as f64 * self.dy())
    }

    /// All nodes in row-major (j outer, i inner) order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                pts.push(self.node(i, j));
            }
        }
        pts
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }
}

/// 1D problem data: source at every node, Dirichlet values at the two ends.
#[derive(Clone, Debug)]
pub struct PoissonProblem1d {
    pub grid: Grid1d,
    pub f: Vec<f64>,
    pub u_left: f64,
    pub u_right: f64,
}

impl PoissonProblem1d {
    pub fn validate(&self) -> Result<()> {
        if self.f.len() != self.grid.n {
            return Err(Error::invalid("source length does not match grid"));
        }
        Ok(())
    }
}

/// 2D problem data: source and boundary trace on the full node grid
/// (interior entries of `u_bc` are ignored).
#[derive(Clone, Debug)]
pub struct PoissonProblem2d {
    pub grid: Grid2d,
    pub f: Tensor,
    pub u_bc: Tensor,
}

impl PoissonProblem2d {
    pub fn validate(&self) -> Result<()> {
        let expect = [self.grid.ny, self.grid.nx];
        if self.f.shape() != expect || self.u_bc.shape() != expect {
            return Err(Error::invalid("field shapes do not match grid"));
        }
        Ok(())
    }
}

fn check_positive(tape: &Tape, d: Var, expected_len: usize) -> Result<()> {
    let dv = tape.values(d);
    if dv.len() != expected_len {
        return Err(Error::invalid("diffusion field length does not match grid"));
    }
    if dv.iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("diffusion field must be positive at all nodes"));
    }
    Ok(())
}

/// Node-to-face averaging: faces[i] = (d[i] + d[i+1]) / 2 along one axis.
fn face_average(tape: &mut Tape, d: Var, left: Vec<usize>, right: Vec<usize>) -> Result<Var> {
    let a = tape.gather(d, left)?;
    let b = tape.gather(d, right)?;
    let s = tape.add(a, b)?;
    tape.scale(s, 0.5)
}

/// Assemble the dense interior system for the 1D problem.
///
/// Row k (interior node i = k + 1) encodes
/// `[D_{i-1/2} u_{i-1} - (D_{i-1/2} + D_{i+1/2}) u_i + D_{i+1/2} u_{i+1}] / h^2
///  + f_i = 0`, with boundary neighbors moved to the right-hand side.
pub fn assemble_1d(tape: &mut Tape, prob: &PoissonProblem1d, d: Var) -> Result<(Var, Var)> {
    prob.validate()?;
    let n = prob.grid.n;
    check_positive(tape, d, n)?;
    let m = n - 2;
    let h2_inv = 1.0 / (prob.grid.h() * prob.grid.h());

    let faces = face_average(
        tape,
        d,
        (0..n - 1).collect(),
        (1..n).collect(),
    )?;

    // Diagonal: -(west + east) / h^2 at (k, k).
    let west_all = tape.gather(faces, (0..m).collect::<Vec<_>>())?;
    let east_all = tape.gather(faces, (1..=m).collect::<Vec<_>>())?;
    let wsum = tape.add(west_all, east_all)?;
    let diag = tape.scale(wsum, -h2_inv)?;
    let diag_idx: Vec<usize> = (0..m).map(|k| k * m + k).collect();

    // Sub-diagonal west/east couplings.
    let west_sub = tape.gather(faces, (1..m).collect::<Vec<_>>())?;
    let west_sub = tape.scale(west_sub, h2_inv)?;
    let west_idx: Vec<usize> = (1..m).map(|k| k * m + k - 1).collect();
    let east_sub = tape.gather(faces, (1..m).collect::<Vec<_>>())?;
    let east_sub = tape.scale(east_sub, h2_inv)?;
    let east_idx: Vec<usize> = (0..m - 1).map(|k| k * m + k + 1).collect();

    let a = tape.scatter_add_shaped(
        vec![
            (diag, Arc::from(diag_idx)),
            (west_sub, Arc::from(west_idx)),
            (east_sub, Arc::from(east_idx)),
        ],
        m * m,
        vec![m, m],
    )?;

    // rhs_k = -f_i - boundary face couplings.
    let f_int = tape.constant(Tensor::vector(
        prob.f[1..n - 1].iter().map(|&v| -v).collect(),
    ));
    let bw = tape.gather(faces, vec![0usize])?;
    let bw = tape.scale(bw, -h2_inv * prob.u_left)?;
    let be = tape.gather(faces, vec![n - 2])?;
    let be = tape.scale(be, -h2_inv * prob.u_right)?;
    let rhs = tape.scatter_add(
        vec![
            (f_int, Arc::from((0..m).collect::<Vec<_>>())),
            (bw, Arc::from(vec![0usize])),
            (be, Arc::from(vec![m - 1])),
        ],
        m,
    )?;
    Ok((a, rhs))
}

/// Solve the 1D problem; the result is the interior solution, differentiable
/// with respect to `d` through the linear-solve adjoint.
pub fn solve_1d(tape: &mut Tape, prob: &PoissonProblem1d, d: Var) -> Result<Var> {
    let (a, rhs) = assemble_1d(tape, prob, d)?;
    tape.linear_solve(a, rhs)
}

/// Assemble the dense interior system for the 2D problem with the 5-point
/// stencil; interior unknowns are ordered row-major (j outer, i inner).
pub fn assemble_2d(tape: &mut Tape, prob: &PoissonProblem2d, d: Var) -> Result<(Var, Var)> {
    prob.validate()?;
    let (nx, ny) = (prob.grid.nx, prob.grid.ny);
    check_positive(tape, d, nx * ny)?;
    let (mi, mj) = (nx - 2, ny - 2);
    let m = mi * mj;
    let dx2_inv = 1.0 / (prob.grid.dx() * prob.grid.dx());
    let dy2_inv = 1.0 / (prob.grid.dy() * prob.grid.dy());
    let node = |i: usize, j: usize| j * nx + i;

    // Faces along x: fx[j][i] couples nodes (i, j) and (i+1, j).
    let mut lx = Vec::with_capacity((nx - 1) * ny);
    let mut rx = Vec::with_capacity((nx - 1) * ny);
    for j in 0..ny {
        for i in 0..nx - 1 {
            lx.push(node(i, j));
            rx.push(node(i + 1, j));
        }
    }
    let fx = face_average(tape, d, lx, rx)?;
    let fx_at = |i: usize, j: usize| j * (nx - 1) + i;

    // Faces along y: fy[j][i] couples nodes (i, j) and (i, j+1).
    let mut ly = Vec::with_capacity(nx * (ny - 1));
    let mut ry = Vec::with_capacity(nx * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx {
            ly.push(node(i, j));
            ry.push(node(i, j + 1));
        }
    }
    let fy = face_average(tape, d, ly, ry)?;
    let fy_at = |i: usize, j: usize| j * nx + i;

    // Per-cell faces for all interior cells, in unknown order.
    let mut w_idx = Vec::with_capacity(m);
    let mut e_idx = Vec::with_capacity(m);
    let mut s_idx = Vec::with_capacity(m);
    let mut n_idx = Vec::with_capacity(m);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            w_idx.push(fx_at(i - 1, j));
            e_idx.push(fx_at(i, j));
            s_idx.push(fy_at(i, j - 1));
            n_idx.push(fy_at(i, j));
        }
    }
    let w = tape.gather(fx, w_idx)?;
    let e = tape.gather(fx, e_idx)?;
    let s = tape.gather(fy, s_idx)?;
    let nf = tape.gather(fy, n_idx)?;

    // Diagonal: -(w + e)/dx^2 - (s + n)/dy^2.
    let we = tape.add(w, e)?;
    let we = tape.scale(we, -dx2_inv)?;
    let sn = tape.add(s, nf)?;
    let sn = tape.scale(sn, -dy2_inv)?;
    let diag = tape.add(we, sn)?;
    let diag_idx: Vec<usize> = (0..m).map(|k| k * m + k).collect();

    // Off-diagonal couplings and boundary rhs contributions share the same
    // gathered face values; cells on a domain edge route that face to rhs.
    let cell = |i: usize, j: usize| (j - 1) * mi + (i - 1);
    let mut sources: Vec<(Var, Arc<[usize]>)> = vec![(diag, Arc::from(diag_idx))];
    let mut rhs_sources: Vec<(Var, Arc<[usize]>)> = Vec::new();

    struct Side {
        face: Var,
        scale: f64,
        // (unknown k, neighbor unknown or boundary node)
        inner: (Vec<usize>, Vec<usize>),
        boundary: (Vec<usize>, Vec<usize>),
    }
    let mut sides = Vec::with_capacity(4);
    {
        let mut mk = |face: Var,
                      scale: f64,
                      neighbor: &dyn Fn(usize, usize) -> (Option<usize>, usize)| {
            let mut inner = (Vec::new(), Vec::new());
            let mut boundary = (Vec::new(), Vec::new());
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let k = cell(i, j);
                    match neighbor(i, j) {
                        (Some(k2), _) => {
                            inner.0.push(k);
                            inner.1.push(k2);
                        }
                        (None, bnode) => {
                            boundary.0.push(k);
                            boundary.1.push(bnode);
                        }
                    }
                }
            }
            sides.push(Side {
                face,
                scale,
                inner,
                boundary,
            });
        };
        mk(w, dx2_inv, &|i, j| {
            if i > 1 {
                (Some(cell(i - 1, j)), 0)
            } else {
                (None, node(0, j))
            }
        });
        mk(e, dx2_inv, &|i, j| {
            if i < nx - 2 {
                (Some(cell(i + 1, j)), 0)
            } else {
                (None, node(nx - 1, j))
            }
        });
        mk(s, dy2_inv, &|i, j| {
            if j > 1 {
                (Some(cell(i, j - 1)), 0)
            } else {
                (None, node(i, 0))
            }
        });
        mk(nf, dy2_inv, &|i, j| {
            if j < ny - 2 {
                (Some(cell(i, j + 1)), 0)
            } else {
                (None, node(i, ny - 1))
            }
        });
    }

    let ubc = prob.u_bc.values();
    for side in sides {
        // Interior coupling: A[k, k2] += face / h^2.
        let (ks, k2s) = side.inner;
        if !ks.is_empty() {
            let vals = tape.gather(side.face, ks.clone())?;
            let vals = tape.scale(vals, side.scale)?;
            let pos: Vec<usize> = ks.iter().zip(&k2s).map(|(&k, &k2)| k * m + k2).collect();
            sources.push((vals, Arc::from(pos)));
        }
        // Boundary coupling: rhs[k] -= face * u_bc(neighbor) / h^2.
        let (ks, bnodes) = side.boundary;
        if !ks.is_empty() {
            let vals = tape.gather(side.face, ks.clone())?;
            let vals = tape.scale(vals, -side.scale)?;
            let bc = tape.constant(Tensor::vector(
                bnodes.iter().map(|&p| ubc[p]).collect(),
            ));
            let term = tape.mul(vals, bc)?;
            rhs_sources.push((term, Arc::from(ks)));
        }
    }

    let a = tape.scatter_add_shaped(sources, m * m, vec![m, m])?;

    let fv = prob.f.values();
    let mut f_int = Vec::with_capacity(m);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            f_int.push(-fv[node(i, j)]);
        }
    }
    let f_int = tape.constant(Tensor::vector(f_int));
    rhs_sources.insert(0, (f_int, Arc::from((0..m).collect::<Vec<_>>())));
    let rhs = tape.scatter_add(rhs_sources, m)?;
    Ok((a, rhs))
}

/// Solve the 2D problem; interior solution in unknown order, differentiable
/// with respect to `d`.
pub fn solve_2d(tape: &mut Tape, prob: &PoissonProblem2d, d: Var) -> Result<Var> {
    let (a, rhs) = assemble_2d(tape, prob, d)?;
    tape.linear_solve(a, rhs)
}

/// Insert an interior solution back into the full node grid next to the
/// Dirichlet data.
pub fn embed_interior_1d(prob: &PoissonProblem1d, interior: &[f64]) -> Vec<f64> {
    let n = prob.grid.n;
    let mut full = vec![0.0; n];
    full[0] = prob.u_left;
    full[n - 1] = prob.u_right;
    full[1..n - 1].copy_from_slice(interior);
    full
}

/// Insert an interior solution back into the full `[ny, nx]` grid.
pub fn embed_interior_2d(prob: &PoissonProblem2d, interior: &[f64]) -> Tensor {
    let (nx, ny) = (prob.grid.nx, prob.grid.ny);
    let mut full = prob.u_bc.values().to_vec();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            full[j * nx + i] = interior[(j - 1) * (nx - 2) + (i - 1)];
        }
    }
    Tensor::new(vec![ny, nx], full).expect("grid shape")
}

/// Forward 1D solve on a throwaway tape, returning the full node field.
pub fn solve_1d_values(prob: &PoissonProblem1d, d_values: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let d = tape.constant(Tensor::vector(d_values.to_vec()));
    let u = solve_1d(&mut tape, prob, d)?;
    Ok(embed_interior_1d(prob, tape.values(u)))
}

/// Forward 2D solve on a throwaway tape, returning the full `[ny, nx]` field.
pub fn solve_2d_values(prob: &PoissonProblem2d, d_values: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let d = tape.constant(
        d_values
            .clone()
            .reshaped(vec![d_values.len()])
            .expect("flatten"),
    );
    let u = solve_2d(&mut tape, prob, d)?;
    Ok(embed_interior_2d(prob, tape.values(u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmath;

    fn unit_problem_2d(n: usize, f: impl Fn(f64, f64) -> f64, bc: impl Fn(f64, f64) -> f64) -> PoissonProblem2d {
        let grid = Grid2d::square(0.0, 1.0, n).unwrap();
        let mut fv = Vec::with_capacity(n * n);
        let mut bv = Vec::with_capacity(n * n);
        for (x, y) in grid.nodes() {
            fv.push(f(x, y));
            bv.push(bc(x, y));
        }
        PoissonProblem2d {
            grid,
            f: Tensor::new(vec![n, n], fv).unwrap(),
            u_bc: Tensor::new(vec![n, n], bv).unwrap(),
        }
    }

    #[test]
    fn constant_coefficient_reduces_to_laplacian_stencil() {
        let prob = unit_problem_2d(5, |_, _| 0.0, |_, _| 0.0);
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::filled(vec![25], 1.0));
        let (a, _) = assemble_2d(&mut tape, &prob, d).unwrap();
        let m = 9;
        let av = tape.values(a);
        let h2 = 16.0; // 1/dx^2 with dx = 1/4
        // Center cell k = 4 has all four neighbors interior.
        assert!((av[4 * m + 4] - (-4.0 * h2)).abs() < 1e-12);
        assert!((av[4 * m + 3] - h2).abs() < 1e-12);
        assert!((av[4 * m + 5] - h2).abs() < 1e-12);
        assert!((av[4 * m + 1] - h2).abs() < 1e-12);
        assert!((av[4 * m + 7] - h2).abs() < 1e-12);
    }

    #[test]
    fn constant_boundary_data_is_reproduced_exactly() {
        // f = 0 with u = c on the boundary: constants are discrete-harmonic.
        let prob = unit_problem_2d(7, |_, _| 0.0, |_, _| 3.25);
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::filled(vec![49], 1.7));
        let u = solve_2d(&mut tape, &prob, d).unwrap();
        for &v in tape.values(u) {
            assert!((v - 3.25).abs() < 1e-11);
        }
    }

    #[test]
    fn one_d_constant_boundary() {
        let grid = Grid1d::new(-1.0, 1.0, 9).unwrap();
        let prob = PoissonProblem1d {
            grid,
            f: vec![0.0; 9],
            u_left: 0.2,
            u_right: 0.2,
        };
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::filled(vec![9], 2.0));
        let u = solve_1d(&mut tape, &prob, d).unwrap();
        for &v in tape.values(u) {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn row_sums_with_boundary_couplings_vanish() {
        // Stencil consistency: each row's coefficients, including the ones
        // moved to the rhs, add to zero.
        let prob = unit_problem_2d(6, |_, _| 0.0, |_, _| 0.0);
        let n = 6;
        let dvals: Vec<f64> = (0..n * n).map(|k| 1.0 + 0.01 * k as f64).collect();
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::vector(dvals.clone()));
        let (a, _) = assemble_2d(&mut tape, &prob, d).unwrap();
        let m = (n - 2) * (n - 2);
        let av = tape.values(a);
        let h2 = ((n - 1) * (n - 1)) as f64;
        let face = |p: usize, q: usize| (dvals[p] + dvals[q]) / 2.0;
        let node = |i: usize, j: usize| j * n + i;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = (j - 1) * (n - 2) + (i - 1);
                let row_sum: f64 = (0..m).map(|c| av[k * m + c]).sum();
                let mut boundary = 0.0;
                if i == 1 {
                    boundary += face(node(0, j), node(1, j)) * h2;
                }
                if i == n - 2 {
                    boundary += face(node(n - 2, j), node(n - 1, j)) * h2;
                }
                if j == 1 {
                    boundary += face(node(i, 0), node(i, 1)) * h2;
                }
                if j == n - 2 {
                    boundary += face(node(i, n - 2), node(i, n - 1)) * h2;
                }
                assert!(
                    (row_sum + boundary).abs() < 1e-9,
                    "row {k}: sum {row_sum} boundary {boundary}"
                );
            }
        }
    }

    #[test]
    fn doubling_d_halves_the_solution_for_zero_bc() {
        let pi = core::f64::consts::PI;
        let prob = unit_problem_2d(
            9,
            move |x, y| 2.0 * pi * pi * fmath::sin(pi * x) * fmath::sin(pi * y),
            |_, _| 0.0,
        );
        let mut tape = Tape::new();
        let d1 = tape.constant(Tensor::filled(vec![81], 1.0));
        let u1 = solve_2d(&mut tape, &prob, d1).unwrap();
        let d2 = tape.constant(Tensor::filled(vec![81], 2.0));
        let u2 = solve_2d(&mut tape, &prob, d2).unwrap();
        for (&a, &b) in tape.values(u1).iter().zip(tape.values(u2)) {
            assert!((b - a / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_maximum_principle() {
        // f = 0: interior values stay inside the boundary range.
        let prob = unit_problem_2d(8, |_, _| 0.0, |x, y| 0.3 + fmath::sin(3.0 * x) * 0.2 + y * 0.1);
        let (lo, hi) = prob
            .u_bc
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut tape = Tape::new();
        let dvals: Vec<f64> = (0..64).map(|k| 0.5 + 0.02 * (k % 7) as f64).collect();
        let d = tape.constant(Tensor::vector(dvals));
        let u = solve_2d(&mut tape, &prob, d).unwrap();
        for &v in tape.values(u) {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn swap_symmetric_data_gives_symmetric_solution() {
        // D, f, bc all symmetric under x <-> y, so u must be too.
        let n = 7;
        let prob = unit_problem_2d(n, |x, y| x + y, |x, y| x * y);
        let mut tape = Tape::new();
        let dvals: Vec<f64> = {
            let grid = prob.grid;
            grid.nodes().iter().map(|&(x, y)| 1.0 + x * y + 0.3 * (x + y)).collect()
        };
        let d = tape.constant(Tensor::vector(dvals));
        let u = solve_2d(&mut tape, &prob, d).unwrap();
        let uv = tape.values(u);
        let mi = n - 2;
        for j in 0..mi {
            for i in 0..mi {
                let a = uv[j * mi + i];
                let b = uv[i * mi + j];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_positive_diffusion_is_rejected() {
        let grid = Grid1d::new(0.0, 1.0, 5).unwrap();
        let prob = PoissonProblem1d {
            grid,
            f: vec![1.0; 5],
            u_left: 0.0,
            u_right: 0.0,
        };
        let mut tape = Tape::new();
        let d = tape.constant(Tensor::vector(vec![1.0, 1.0, 0.0, 1.0, 1.0]));
        assert!(solve_1d(&mut tape, &prob, d).is_err());
    }

    #[test]
    fn gradient_with_respect_to_d_matches_finite_differences() {
        use crate::tape::GradCheck;
        // 8x8 grid, loss = sum of interior solution.
        let prob = unit_problem_2d(8, |x, y| fmath::sin(2.0 * x) + y, |x, y| 0.1 * x * y);
        let d0: Vec<f64> = (0..64).map(|k| 1.0 + 0.05 * ((k * 7 % 11) as f64)).collect();
        let gc = GradCheck::new(1e-5);
        let prob_ref = &prob;
        let err = gc
            .run(
                move |tape, vars| {
                    let u = solve_2d(tape, prob_ref, vars[0])?;
                    tape.sum(u)
                },
                &[Tensor::vector(d0)],
            )
            .unwrap();
        assert!(err <= 1e-5, "poisson d-gradient rel err {err}");
    }
}

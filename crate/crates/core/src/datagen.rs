//! Forward-simulation dataset factory.
//!
//! Burgers trajectories, shifted input/target snapshot pairs, Gaussian noise
//! injection, scattered-grid resampling, and Poisson solution ensembles with
//! random hidden coefficients. Everything is generated through the same
//! solver code paths used inside training, under explicit seeds, so any
//! stored sample can be re-verified bit-for-bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::burgers::{roll_forward, Cfd6};
use crate::poisson::{solve_1d_values, solve_2d_values, Grid1d, Grid2d, PoissonProblem1d,
    PoissonProblem2d};
use crate::tape::Tape;
use crate::{fmath, Error, Result, Tensor};

/// Deterministic per-sample RNG: one seed, one independent stream per index.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

// ── Burgers trajectories ────────────────────────────────────────────

/// Generator settings for one Burgers run; nodes include both endpoints, so
/// the spacing is (x_r - x_l)/(nx - 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurgersSpec {
    pub nu: f64,
    pub gamma: f64,
    pub nx: usize,
    pub dt: f64,
    pub t_final: f64,
    pub x_l: f64,
    pub x_r: f64,
}

impl BurgersSpec {
    /// Standard setup on [-1, 1].
    pub fn standard(nu: f64, gamma: f64, nx: usize, dt: f64, t_final: f64) -> Self {
        BurgersSpec {
            nu,
            gamma,
            nx,
            dt,
            t_final,
            x_l: -1.0,
            x_r: 1.0,
        }
    }

    pub fn h(&self) -> f64 {
        (self.x_r - self.x_l) / (self.nx - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_l + i as f64 * self.h()).collect()
    }

    pub fn steps(&self) -> usize {
        libm_round(self.t_final / self.dt)
    }
}

fn libm_round(x: f64) -> usize {
    (x + 0.5) as usize
}

/// u(x, 0) = -sin(pi x).
pub fn sine_initial(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .map(|&x| -fmath::sin(core::f64::consts::PI * x))
        .collect()
}

/// A forward run: snapshot k is row k of `snapshots`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: BurgersSpec,
    pub snapshots: Tensor,
}

impl Trajectory {
    pub fn snapshot_count(&self) -> usize {
        self.snapshots.shape()[0]
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        let n = self.spec.nx;
        &self.snapshots.values()[k * n..(k + 1) * n]
    }
}

/// Integrate the default initial condition forward with the compact-FD
/// stepper; `steps() + 1` snapshots are stored.
pub fn gen_burgers(spec: &BurgersSpec) -> Result<Trajectory> {
    if !(spec.dt > 0.0) || spec.t_final < 0.0 {
        return Err(Error::invalid("need dt > 0 and t_final >= 0"));
    }
    let op = Cfd6::new(spec.nx, spec.h())?;
    let mut tape = Tape::new();
    let d1 = op.d1_var(&mut tape);
    let nu = tape.constant(Tensor::scalar(spec.nu));
    let gamma = tape.constant(Tensor::scalar(spec.gamma));
    let u0 = tape.constant(Tensor::vector(sine_initial(&spec.nodes())));
    let traj = roll_forward(&mut tape, u0, spec.steps(), d1, nu, gamma, spec.dt)?;
    let mut values = Vec::with_capacity(traj.len() * spec.nx);
    for &v in &traj {
        values.extend_from_slice(tape.values(v));
    }
    Ok(Trajectory {
        spec: *spec,
        snapshots: Tensor::new(vec![traj.len(), spec.nx], values)?,
    })
}

// ── Shift pairs ─────────────────────────────────────────────────────

/// Provenance carried next to a dataset so any pair can be re-verified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftMeta {
    pub nu: f64,
    pub gamma: f64,
    pub nx: usize,
    pub dt: f64,
    pub x_l: f64,
    pub x_r: f64,
    pub noise_std: f64,
    pub seed: u64,
}

/// Paired snapshot matrices separated by `p` time steps. Row k of `targets`
/// is row k of `inputs` advanced p steps in the clean generator.
#[derive(Clone, Debug)]
pub struct ShiftDataset {
    pub inputs: Tensor,
    pub targets: Tensor,
    pub p: usize,
    pub meta: ShiftMeta,
}

impl ShiftDataset {
    pub fn pair_count(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn state_len(&self) -> usize {
        self.inputs.shape()[1]
    }

    /// Inputs as a `[n, pairs]` matrix (snapshots as columns) for stepping
    /// every pair simultaneously.
    pub fn inputs_columns(&self) -> Tensor {
        transpose_rows(&self.inputs)
    }

    pub fn targets_columns(&self) -> Tensor {
        transpose_rows(&self.targets)
    }

    /// Same pairing with Gaussian noise applied to both matrices.
    pub fn with_noise(&self, std: f64, seed: u64) -> ShiftDataset {
        let mut meta = self.meta;
        meta.noise_std = std;
        meta.seed = seed;
        ShiftDataset {
            inputs: add_noise(&self.inputs, std, seed),
            targets: add_noise(&self.targets, std, seed.wrapping_add(1)),
            p: self.p,
            meta,
        }
    }
}

fn transpose_rows(t: &Tensor) -> Tensor {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    let out = crate::linalg::transpose(t.values(), r, c);
    Tensor::new(vec![c, r], out).expect("transpose shape")
}

/// Slice a trajectory into `(M - p)` input/target snapshot pairs.
pub fn make_shift_pairs(traj: &Trajectory, p: usize) -> Result<ShiftDataset> {
    let m = traj.snapshot_count();
    if p >= m {
        return Err(Error::invalid(alloc::format!(
            "shift {p} needs more than {m} snapshots"
        )));
    }
    let n = traj.spec.nx;
    let pairs = m - p;
    let values = traj.snapshots.values();
    let inputs = values[..pairs * n].to_vec();
    let targets = values[p * n..].to_vec();
    Ok(ShiftDataset {
        inputs: Tensor::new(vec![pairs, n], inputs)?,
        targets: Tensor::new(vec![pairs, n], targets)?,
        p,
        meta: ShiftMeta {
            nu: traj.spec.nu,
            gamma: traj.spec.gamma,
            nx: traj.spec.nx,
            dt: traj.spec.dt,
            x_l: traj.spec.x_l,
            x_r: traj.spec.x_r,
            noise_std: 0.0,
            seed: 0,
        },
    })
}

// ── Noise and resampling ────────────────────────────────────────────

/// i.i.d. zero-mean Gaussian perturbation, deterministic under the seed.
pub fn add_noise(data: &Tensor, std: f64, seed: u64) -> Tensor {
    if std == 0.0 {
        return data.clone();
    }
    let normal = Normal::new(0.0, std).expect("std >= 0");
    let mut rng = sample_rng(seed, 0);
    let values = data
        .values()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    Tensor::new(data.shape().to_vec(), values).expect("noise shape")
}

/// Piecewise-linear interpolation of samples (xs ascending) at `x`.
pub fn linear_interp(xs: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), values.len());
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[xs.len() - 1] {
        return values[values.len() - 1];
    }
    let mut hi = xs.partition_point(|&p| p <= x);
    if hi >= xs.len() {
        hi = xs.len() - 1;
    }
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

/// Resample a gridded field at `n_points` uniform-random interior
/// abscissae (sorted ascending), by linear interpolation.
pub fn scatter_resample(
    xs: &[f64],
    values: &[f64],
    n_points: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_points < 2 {
        return Err(Error::invalid("need at least two resampling points"));
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let mut rng = sample_rng(seed, 0);
    let mut pts: Vec<f64> = (0..n_points)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    let vals = pts.iter().map(|&x| linear_interp(xs, values, x)).collect();
    Ok((pts, vals))
}

// ── Poisson ensembles ───────────────────────────────────────────────

/// 1D hidden-field family D(x) = 1 + a0 + a1 x on [-1, 1] with
/// f(x) = sin(pi x) and Dirichlet data 0.2 at both ends.
#[derive(Clone, Copy, Debug)]
pub struct Ensemble1dSpec {
    pub nx: usize,
    pub n_samples: usize,
    pub a0_range: (f64, f64),
    pub a1_range: (f64, f64),
}

impl Ensemble1dSpec {
    pub fn standard(nx: usize, n_samples: usize) -> Self {
        Ensemble1dSpec {
            nx,
            n_samples,
            a0_range: (0.25, 0.75),
            a1_range: (0.25, 0.75),
        }
    }

    pub fn problem(&self) -> Result<PoissonProblem1d> {
        let grid = Grid1d::new(-1.0, 1.0, self.nx)?;
        let f = grid
            .nodes()
            .iter()
            .map(|&x| fmath::sin(core::f64::consts::PI * x))
            .collect();
        Ok(PoissonProblem1d {
            grid,
            f,
            u_left: 0.2,
            u_right: 0.2,
        })
    }

    pub fn diffusion(&self, coeffs: [f64; 2], nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| 1.0 + coeffs[0] + coeffs[1] * x).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Sample1d {
    /// Full node field, boundary values included.
    pub solution: Vec<f64>,
    pub coeffs: [f64; 2],
}

fn sample_in(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    range.0 + (range.1 - range.0) * rng.random::<f64>()
}

/// Forward-solve `n_samples` problems with coefficients drawn uniformly
/// from the configured ranges; non-positive diffusion draws are rejected
/// and resampled.
pub fn gen_poisson_ensemble_1d(spec: &Ensemble1dSpec, seed: u64) -> Result<Vec<Sample1d>> {
    let prob = spec.problem()?;
    let nodes = prob.grid.nodes();
    let mut out = Vec::with_capacity(spec.n_samples);
    for k in 0..spec.n_samples {
        let mut rng = sample_rng(seed, k as u64);
        let mut coeffs;
        let mut d;
        let mut attempts = 0;
        loop {
            coeffs = [sample_in(&mut rng, spec.a0_range), sample_in(&mut rng, spec.a1_range)];
            d = spec.diffusion(coeffs, &nodes);
            if d.iter().all(|&v| v > 0.0) {
                break;
            }
            attempts += 1;
            if attempts > 1000 {
                return Err(Error::invalid(
                    "coefficient ranges keep producing non-positive diffusion",
                ));
            }
        }
        out.push(Sample1d {
            solution: solve_1d_values(&prob, &d)?,
            coeffs,
        });
    }
    Ok(out)
}

/// 2D hidden-field family D = 4 + 2 a2 y + sqrt(3) a3 (2x^2 + 2y^2 - 1) on
/// the square inscribed in the unit disk, with f = x + y and boundary data
/// cos(pi x) cos(pi y).
#[derive(Clone, Copy, Debug)]
pub struct Ensemble2dSpec {
    pub n: usize,
    pub n_samples: usize,
    pub a2_range: (f64, f64),
    pub a3_range: (f64, f64),
}

impl Ensemble2dSpec {
    pub fn standard(n: usize, n_samples: usize) -> Self {
        Ensemble2dSpec {
            n,
            n_samples,
            a2_range: (0.25, 0.75),
            a3_range: (0.25, 0.75),
        }
    }

    pub fn problem(&self) -> Result<PoissonProblem2d> {
        let half = 1.0 / fmath::sqrt(2.0);
        let grid = Grid2d::square(-half, half, self.n)?;
        let pi = core::f64::consts::PI;
        let mut f = Vec::with_capacity(self.n * self.n);
        let mut bc = Vec::with_capacity(self.n * self.n);
        for (x, y) in grid.nodes() {
            f.push(x + y);
            bc.push(fmath::cos(pi * x) * fmath::cos(pi * y));
        }
        Ok(PoissonProblem2d {
            grid,
            f: Tensor::new(vec![self.n, self.n], f)?,
            u_bc: Tensor::new(vec![self.n, self.n], bc)?,
        })
    }

    pub fn diffusion(&self, coeffs: [f64; 2], nodes: &[(f64, f64)]) -> Vec<f64> {
        let s3 = fmath::sqrt(3.0);
        nodes
            .iter()
            .map(|&(x, y)| {
                4.0 + 2.0 * coeffs[0] * y + s3 * coeffs[1] * (2.0 * x * x + 2.0 * y * y - 1.0)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Sample2d {
    /// Full `[n, n]` node field, boundary values included.
    pub solution: Tensor,
    pub coeffs: [f64; 2],
}

pub fn gen_poisson_ensemble_2d(spec: &Ensemble2dSpec, seed: u64) -> Result<Vec<Sample2d>> {
    let prob = spec.problem()?;
    let nodes = prob.grid.nodes();
    let mut out = Vec::with_capacity(spec.n_samples);
    for k in 0..spec.n_samples {
        let mut rng = sample_rng(seed, k as u64);
        let mut coeffs;
        let mut d;
        let mut attempts = 0;
        loop {
            coeffs = [sample_in(&mut rng, spec.a2_range), sample_in(&mut rng, spec.a3_range)];
            d = spec.diffusion(coeffs, &nodes);
            if d.iter().all(|&v| v > 0.0) {
                break;
            }
            attempts += 1;
            if attempts > 1000 {
                return Err(Error::invalid(
                    "coefficient ranges keep producing non-positive diffusion",
                ));
            }
        }
        let d = Tensor::new(vec![spec.n, spec.n], d)?;
        out.push(Sample2d {
            solution: solve_2d_values(&prob, &d)?,
            coeffs,
        });
    }
    Ok(out)
}

// ── Statistics ──────────────────────────────────────────────────────

/// Kolmogorov-Smirnov statistic of `samples` against Uniform(lo, hi).
pub fn ks_uniform_statistic(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut u: Vec<f64> = samples.iter().map(|&x| (x - lo) / (hi - lo)).collect();
    u.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = u.len() as f64;
    let mut d = 0.0_f64;
    for (k, &v) in u.iter().enumerate() {
        d = d.max(v - k as f64 / n);
        d = d.max((k + 1) as f64 / n - v);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_gives_single_sine_snapshot() {
        let spec = BurgersSpec::standard(0.01, 1.0, 32, 0.001, 0.0);
        let traj = gen_burgers(&spec).unwrap();
        assert_eq!(traj.snapshot_count(), 1);
        let expect = sine_initial(&spec.nodes());
        assert_eq!(traj.snapshot(0), &expect[..]);
    }

    #[test]
    fn standard_horizon_has_201_snapshots() {
        let spec = BurgersSpec::standard(0.01 / core::f64::consts::PI, 1.0, 40, 0.001, 0.2);
        let traj = gen_burgers(&spec).unwrap();
        assert_eq!(traj.snapshot_count(), 201);
    }

    #[test]
    fn viscous_decay_is_monotone_in_max_norm() {
        let spec = BurgersSpec::standard(0.1 / core::f64::consts::PI, 1.0, 80, 0.001, 0.2);
        let traj = gen_burgers(&spec).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..traj.snapshot_count() {
            let m = traj.snapshot(k).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            assert!(m <= prev + 1e-12, "max-norm grew at step {k}");
            prev = m;
        }
    }

    #[test]
    fn shift_pair_alignment() {
        let spec = BurgersSpec::standard(0.05, 1.0, 16, 0.001, 0.004);
        let traj = gen_burgers(&spec).unwrap(); // 5 snapshots
        let ds = make_shift_pairs(&traj, 2).unwrap();
        assert_eq!(ds.pair_count(), 3);
        for k in 0..3 {
            assert_eq!(
                &ds.inputs.values()[k * 16..(k + 1) * 16],
                traj.snapshot(k)
            );
            assert_eq!(
                &ds.targets.values()[k * 16..(k + 1) * 16],
                traj.snapshot(k + 2)
            );
        }
        let ds0 = make_shift_pairs(&traj, 0).unwrap();
        assert_eq!(ds0.inputs, ds0.targets);
        assert!(make_shift_pairs(&traj, 5).is_err());
    }

    #[test]
    fn advancing_an_input_reproduces_its_target() {
        let spec = BurgersSpec::standard(0.02, 1.0, 24, 0.001, 0.01);
        let traj = gen_burgers(&spec).unwrap();
        let p = 3;
        let ds = make_shift_pairs(&traj, p).unwrap();
        // Restart the generator from input row 4 and advance p steps.
        let op = Cfd6::new(spec.nx, spec.h()).unwrap();
        let mut tape = Tape::new();
        let d1 = op.d1_var(&mut tape);
        let nu = tape.constant(Tensor::scalar(spec.nu));
        let gamma = tape.constant(Tensor::scalar(spec.gamma));
        let row = 4;
        let u0 = tape.constant(Tensor::vector(
            ds.inputs.values()[row * 24..(row + 1) * 24].to_vec(),
        ));
        let roll = roll_forward(&mut tape, u0, p, d1, nu, gamma, spec.dt).unwrap();
        let target = &ds.targets.values()[row * 24..(row + 1) * 24];
        for (a, b) in tape.values(roll[p]).iter().zip(target) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn noise_is_seed_deterministic_with_correct_statistics() {
        let base = Tensor::zeros(vec![100_000]);
        let noisy = add_noise(&base, 0.025, 7);
        let noisy2 = add_noise(&base, 0.025, 7);
        assert_eq!(noisy, noisy2);
        assert_eq!(add_noise(&base, 0.0, 7), base);

        let n = 100_000.0;
        let mean = noisy.values().iter().sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 * 0.025 / fmath::sqrt(n), "mean {mean}");
        let var = noisy.values().iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let std = fmath::sqrt(var);
        assert!((std - 0.025).abs() / 0.025 <= 0.02, "std {std}");
    }

    #[test]
    fn interpolation_exact_at_nodes_and_on_linear_fields() {
        let xs: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let lin: Vec<f64> = xs.iter().map(|&x| 3.0 * x - 0.5).collect();
        for (&x, &v) in xs.iter().zip(&lin) {
            assert_eq!(linear_interp(&xs, &lin, x), v);
        }
        let (pts, vals) = scatter_resample(&xs, &lin, 40, 3).unwrap();
        assert!(pts.windows(2).all(|w| w[0] <= w[1]));
        for (&x, &v) in pts.iter().zip(&vals) {
            assert!((v - (3.0 * x - 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_interpolation_error_within_second_order_bound() {
        let n = 160;
        let h = 2.0 / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + h * i as f64).collect();
        let pi = core::f64::consts::PI;
        let vals: Vec<f64> = xs.iter().map(|&x| fmath::sin(pi * x)).collect();
        let (pts, smp) = scatter_resample(&xs, &vals, 80, 11).unwrap();
        let bound = (pi * h) * (pi * h) / 8.0;
        for (&x, &v) in pts.iter().zip(&smp) {
            assert!((v - fmath::sin(pi * x)).abs() <= bound);
        }
    }

    #[test]
    fn constant_coefficient_sample_matches_analytic_solution() {
        let spec = Ensemble1dSpec {
            nx: 160,
            n_samples: 1,
            a0_range: (0.0, 0.0),
            a1_range: (0.0, 0.0),
        };
        let samples = gen_poisson_ensemble_1d(&spec, 1).unwrap();
        let prob = spec.problem().unwrap();
        let pi = core::f64::consts::PI;
        for (i, &x) in prob.grid.nodes().iter().enumerate() {
            let exact = 0.2 + fmath::sin(pi * x) / (pi * pi);
            assert!(
                (samples[0].solution[i] - exact).abs() <= 1e-3,
                "node {i}: {} vs {exact}",
                samples[0].solution[i]
            );
        }
    }

    #[test]
    fn ensemble_samples_reverify_bit_identically() {
        let spec = Ensemble1dSpec::standard(40, 8);
        let samples = gen_poisson_ensemble_1d(&spec, 99).unwrap();
        let samples2 = gen_poisson_ensemble_1d(&spec, 99).unwrap();
        let prob = spec.problem().unwrap();
        let nodes = prob.grid.nodes();
        for (s, s2) in samples.iter().zip(&samples2) {
            assert_eq!(s.solution, s2.solution);
            let d = spec.diffusion(s.coeffs, &nodes);
            let resolved = solve_1d_values(&prob, &d).unwrap();
            assert_eq!(s.solution, resolved);
        }
    }

    #[test]
    fn coefficient_marginals_pass_ks_uniformity() {
        let spec = Ensemble1dSpec::standard(5, 1000);
        let samples = gen_poisson_ensemble_1d(&spec, 12).unwrap();
        let a0: Vec<f64> = samples.iter().map(|s| s.coeffs[0]).collect();
        let a1: Vec<f64> = samples.iter().map(|s| s.coeffs[1]).collect();
        // 1% critical value for n = 1000.
        let crit = 1.628 / fmath::sqrt(1000.0);
        assert!(ks_uniform_statistic(&a0, 0.25, 0.75) < crit);
        assert!(ks_uniform_statistic(&a1, 0.25, 0.75) < crit);
    }

    #[test]
    fn two_dimensional_ensemble_generates_and_reverifies() {
        let spec = Ensemble2dSpec::standard(10, 5);
        let samples = gen_poisson_ensemble_2d(&spec, 4).unwrap();
        let prob = spec.problem().unwrap();
        let nodes = prob.grid.nodes();
        for s in &samples {
            let d = Tensor::new(vec![10, 10], spec.diffusion(s.coeffs, &nodes)).unwrap();
            let resolved = solve_2d_values(&prob, &d).unwrap();
            assert_eq!(s.solution, resolved);
        }
    }
}

//! Zernike polynomial basis on the unit disk.
//!
//! Radial polynomials, even (cosine) and odd (sine) modes, differentiable
//! field reconstruction from coefficients, and moment projection by polar
//! midpoint quadrature. Variable diffusion fields are parameterized by a
//! handful of these coefficients at an encoder bottleneck.

use alloc::vec;
use alloc::vec::Vec;

use crate::tape::{Tape, Var};
use crate::{fmath, Error, Result, Tensor};

/// Factorials up to 12! stay exactly representable and cover every radial
/// order this crate accepts.
pub const MAX_RADIAL_ORDER: u32 = 12;

const FACTORIALS: [f64; 13] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
];

/// Angular flavor of a mode: even pairs with cos(m theta), odd with
/// sin(m theta).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mode {
    pub n: u32,
    pub m: u32,
    pub parity: Parity,
}

impl Mode {
    pub fn even(n: u32, m: u32) -> Self {
        Mode {
            n,
            m,
            parity: Parity::Even,
        }
    }

    pub fn odd(n: u32, m: u32) -> Self {
        Mode {
            n,
            m,
            parity: Parity::Odd,
        }
    }
}

/// Radial polynomial R_nm(rho).
///
/// Zero when n - m is odd; otherwise the usual alternating factorial sum.
pub fn radial(n: u32, m: u32, rho: f64) -> Result<f64> {
    if m > n {
        return Err(Error::invalid(alloc::format!(
            "radial order n={n} smaller than azimuthal order m={m}"
        )));
    }
    if n > MAX_RADIAL_ORDER {
        return Err(Error::invalid(alloc::format!(
            "radial order n={n} exceeds supported maximum {MAX_RADIAL_ORDER}"
        )));
    }
    if (n - m) % 2 == 1 {
        return Ok(0.0);
    }
    let half_sum = ((n + m) / 2) as usize;
    let half_diff = ((n - m) / 2) as usize;
    let mut acc = 0.0;
    for l in 0..=half_diff {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = sign * FACTORIALS[(n as usize) - l]
            / (FACTORIALS[l] * FACTORIALS[half_sum - l] * FACTORIALS[half_diff - l]);
        acc += coeff * fmath::powi(rho, (n as i32) - 2 * (l as i32));
    }
    Ok(acc)
}

/// Evaluate one mode at a Cartesian point of the closed unit disk.
pub fn evaluate_mode(mode: Mode, x: f64, y: f64) -> Result<f64> {
    let r2 = x * x + y * y;
    if r2 > 1.0 + 1e-12 {
        return Err(Error::invalid(alloc::format!(
            "point ({x}, {y}) outside the unit disk"
        )));
    }
    let rho = fmath::sqrt(r2);
    let theta = fmath::atan2(y, x);
    let r = radial(mode.n, mode.m, rho)?;
    let ang = match mode.parity {
        Parity::Even => fmath::cos(mode.m as f64 * theta),
        Parity::Odd => fmath::sin(mode.m as f64 * theta),
    };
    Ok(r * ang)
}

/// Ordered mode list up to a maximum radial order.
///
/// Ordering is radial order first, then azimuthal order, odd (sine) before
/// even (cosine); m = 0 contributes only its even mode.
#[derive(Clone, Debug)]
pub struct ZernikeBasis {
    modes: Vec<Mode>,
}

impl ZernikeBasis {
    pub fn new(n_max: u32) -> Result<Self> {
        if n_max > MAX_RADIAL_ORDER {
            return Err(Error::invalid(alloc::format!(
                "n_max={n_max} exceeds supported maximum {MAX_RADIAL_ORDER}"
            )));
        }
        let mut modes = Vec::new();
        for n in 0..=n_max {
            let mut m = n % 2;
            loop {
                if m > n {
                    break;
                }
                if m == 0 {
                    modes.push(Mode::even(n, 0));
                } else {
                    modes.push(Mode::odd(n, m));
                    modes.push(Mode::even(n, m));
                }
                m += 2;
            }
        }
        Ok(ZernikeBasis { modes })
    }

    /// Basis over an explicit mode list (validated).
    pub fn from_modes(modes: Vec<Mode>) -> Result<Self> {
        for mode in &modes {
            if mode.m > mode.n {
                return Err(Error::invalid("mode with m > n"));
            }
            if mode.n > MAX_RADIAL_ORDER {
                return Err(Error::invalid("mode order exceeds supported maximum"));
            }
            if (mode.n - mode.m) % 2 == 1 {
                return Err(Error::invalid(
                    "mode with n - m odd has identically zero radial part",
                ));
            }
            if mode.parity == Parity::Odd && mode.m == 0 {
                return Err(Error::invalid("odd mode with m = 0 is identically zero"));
            }
        }
        Ok(ZernikeBasis { modes })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Constant evaluation matrix, one row per point, one column per mode.
    pub fn matrix(&self, points: &[(f64, f64)]) -> Result<Tensor> {
        let mut values = Vec::with_capacity(points.len() * self.modes.len());
        for &(x, y) in points {
            for &mode in &self.modes {
                values.push(evaluate_mode(mode, x, y)?);
            }
        }
        Tensor::matrix(points.len(), self.modes.len(), values)
    }
}

/// Inverse squared norm of a mode over the unit disk.
///
/// The integral of Z^2 over the disk is pi/(n+1) for m = 0 and pi/(2(n+1))
/// otherwise, so scaling a raw projection integral by this factor recovers
/// the expansion coefficient exactly.
pub fn mode_norm_inv(mode: Mode) -> f64 {
    let n1 = (mode.n + 1) as f64;
    if mode.m == 0 {
        n1 / core::f64::consts::PI
    } else {
        2.0 * n1 / core::f64::consts::PI
    }
}

/// Differentiable field reconstruction: f(points) = sum_k c_k Z_k(points).
///
/// Linear in the coefficients, so the gradient with respect to them is the
/// basis matrix itself.
pub fn reconstruct_field(
    tape: &mut Tape,
    basis: &ZernikeBasis,
    coeffs: Var,
    points: &[(f64, f64)],
) -> Result<Var> {
    if tape.values(coeffs).len() != basis.len() {
        return Err(Error::ShapeMismatch {
            op: "reconstruct_field",
            lhs: vec![basis.len()],
            rhs: tape.shape(coeffs).to_vec(),
        });
    }
    let mat = tape.constant(basis.matrix(points)?);
    tape.matmul(mat, coeffs)
}

/// Non-differentiable reconstruction convenience for data generation.
pub fn reconstruct_values(
    basis: &ZernikeBasis,
    coeffs: &[f64],
    points: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if coeffs.len() != basis.len() {
        return Err(Error::invalid("coefficient/mode length mismatch"));
    }
    let mut out = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let mut acc = 0.0;
        for (&c, &mode) in coeffs.iter().zip(basis.modes()) {
            acc += c * evaluate_mode(mode, x, y)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Project a field onto the basis by polar midpoint quadrature with
/// `n_rho x n_theta` cells.
///
/// The radial cells are midpoints in s = rho^2, which absorbs the polar
/// Jacobian (rho d rho = ds/2) and keeps the rule exact on the low-order
/// polynomial integrands the basis produces; plain rho-midpoints would leak
/// ~1e-5 into neighboring even modes at this resolution.
pub fn project_moments(
    basis: &ZernikeBasis,
    f: impl Fn(f64, f64) -> f64,
    n_rho: usize,
    n_theta: usize,
) -> Result<Vec<f64>> {
    if n_rho == 0 || n_theta == 0 {
        return Err(Error::invalid("quadrature resolution must be positive"));
    }
    let d_s = 1.0 / n_rho as f64;
    let d_theta = 2.0 * core::f64::consts::PI / n_theta as f64;
    let mut integrals = vec![0.0; basis.len()];
    let mut radials = vec![0.0; basis.len()];
    for i in 0..n_rho {
        let s = (i as f64 + 0.5) * d_s;
        let rho = fmath::sqrt(s);
        for (r, &mode) in radials.iter_mut().zip(basis.modes()) {
            *r = radial(mode.n, mode.m, rho)?;
        }
        for j in 0..n_theta {
            let theta = (j as f64 + 0.5) * d_theta;
            let x = rho * fmath::cos(theta);
            let y = rho * fmath::sin(theta);
            let fv = f(x, y);
            for ((acc, &r), &mode) in integrals.iter_mut().zip(&radials).zip(basis.modes()) {
                let ang = match mode.parity {
                    Parity::Even => fmath::cos(mode.m as f64 * theta),
                    Parity::Odd => fmath::sin(mode.m as f64 * theta),
                };
                *acc += fv * r * ang;
            }
        }
    }
    let cell = 0.5 * d_s * d_theta;
    Ok(integrals
        .iter()
        .zip(basis.modes())
        .map(|(&raw, &mode)| raw * cell * mode_norm_inv(mode))
        .collect())
}

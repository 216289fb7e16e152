//! Differentiable numerical PDE solvers for inverse-problem training loops.
//!
//! The building blocks here let a classical discretization (finite-difference
//! Poisson, sixth-order compact-FD Burgers, multiquadric RBF collocation) sit
//! inside a gradient-based training loop as an ordinary differentiable layer:
//! a reverse-mode tape ([`tape::Tape`]) records dense-array operations,
//! including a linear-system solve with its analytic adjoint, so a loss on the
//! solver output yields exact gradients with respect to hidden PDE
//! coefficients, network weights, and even discretization parameters such as
//! RBF seed locations.
//!
//! The crate is `no_std`-compatible (with `alloc`); all file formats, CLI and
//! experiment orchestration live in the companion `bipde` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod burgers;
pub mod datagen;
mod error;
pub mod fmath;
pub mod linalg;
pub mod nn;
pub mod poisson;
pub mod rbf;
pub mod tape;
mod tensor;
pub mod zernike;

pub use error::{Error, Result};
pub use tape::{GradCheck, Gradients, Tape, Var};
pub use tensor::Tensor;

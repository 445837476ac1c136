//! Variance-reduced stochastic proximal point methods for finite-sum problems.
//!
//! The crate solves `min_x F(x) = (1/n) Σ_i f_i(x)` where every component is a
//! linear composite `f_i(x) = φ(⟨a_i, x⟩; b_i)` with a squared-residual or
//! logistic scalar loss. All methods are instances of one implicit step,
//!
//! ```text
//! x⁺ = prox_{α f_i}(x + α e)
//! ```
//!
//! where `e` is a zero-mean correction supplied by a [`methods::ReducerState`]:
//! nothing (SPPA), an SVRG-style anchor (SVRP, L-SVRP) or a SAGA-style gradient
//! table (SAPA). Explicit-gradient baselines (SGD, SVRG, SAGA) share the same
//! trace schema and oracle accounting so that they can be compared directly.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiment
//! orchestration and the command line live in the companion `proxvr-bench`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod methods;
pub mod problem;
pub mod prox;
pub mod rates;
pub mod rng;
pub mod synthetic;
pub mod trace;

pub use error::{Error, Result};
pub use problem::{FiniteSumProblem, LossKind};

#[cfg(test)]
pub(crate) mod testutil;

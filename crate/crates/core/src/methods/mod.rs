//! The unified implicit step, its variance-reduction corrections, and the
//! method runners built on them.

mod baselines;
mod proximal;
mod reducer;
mod schedule;

pub use baselines::{run_saga, run_sgd, run_svrg, SgdConfig};
pub use proximal::{run_lsvrp, run_sapa, run_sppa, run_svrp, LsvrpConfig, SapaConfig, SppaConfig, SvrpConfig};
pub use reducer::{ReducerState, SAPA_RESYNC_INTERVAL};
pub use schedule::StepSchedule;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::problem::FiniteSumProblem;
use crate::prox::{prox_component_in_place, DEFAULT_PROX_TOL};
use crate::trace::{RunTrace, TraceOptions};

/// Random-stream key of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    pub master: u64,
    pub run: u64,
}

impl Seed {
    pub fn new(master: u64, run: u64) -> Self {
        Self { master, run }
    }
}

impl From<u64> for Seed {
    fn from(master: u64) -> Self {
        Self { master, run: 0 }
    }
}

/// How the two-loop methods pick the next anchor from the inner iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OuterMode {
    /// `x^ξ` with `ξ` uniform on `{0, …, m−1}`.
    RandomInner,
    /// Mean of `x⁰, …, x^{m−1}`.
    AverageInner,
    /// `x^m`; not covered by the convergence theory.
    LastInner,
}

impl OuterMode {
    pub fn name(self) -> &'static str {
        match self {
            OuterMode::RandomInner => "random",
            OuterMode::AverageInner => "average",
            OuterMode::LastInner => "last",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "random-inner" => Some(OuterMode::RandomInner),
            "average" | "average-inner" => Some(OuterMode::AverageInner),
            "last" | "last-inner" => Some(OuterMode::LastInner),
            _ => None,
        }
    }
}

/// One step of the generic scheme: `prox_{α f_i}(x + α e)`.
pub fn unified_step(x: &[f64], problem: &FiniteSumProblem, alpha: f64, i: usize, e: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter("stepsize alpha must be positive"));
    }
    if i >= problem.n() {
        return Err(Error::IndexOutOfRange { index: i, n: problem.n() });
    }
    problem.validate_point(x)?;
    if e.len() != problem.d() {
        return Err(Error::DimensionMismatch { expected: problem.d(), got: e.len() });
    }
    let mut y = x.to_vec();
    implicit_step_in_place(problem, alpha, i, Some(e), &mut y, DEFAULT_PROX_TOL)?;
    Ok(y)
}

/// `x ← prox_{α f_i}(x + α e)`.
#[inline]
pub(crate) fn implicit_step_in_place(
    problem: &FiniteSumProblem,
    alpha: f64,
    i: usize,
    e: Option<&[f64]>,
    x: &mut [f64],
    tol: f64,
) -> Result<()> {
    if let Some(e) = e {
        axpy(alpha, e, x);
    }
    prox_component_in_place(problem, i, alpha, x, tol)
}

/// `x ← x − α (∇f_i(x) − e)`. Returns `false` if the margin is non-finite.
#[inline]
pub(crate) fn explicit_step_in_place(problem: &FiniteSumProblem, alpha: f64, i: usize, e: Option<&[f64]>, x: &mut [f64]) -> bool {
    let t = dot(problem.row(i), x);
    if !t.is_finite() {
        return false;
    }
    let g = problem.loss().derivative(t, problem.label(i));
    axpy(-alpha * g, problem.row(i), x);
    if let Some(e) = e {
        axpy(alpha, e, x);
    }
    true
}

/// A fully specified method with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Sppa(SppaConfig),
    Svrp(SvrpConfig),
    Lsvrp(LsvrpConfig),
    Sapa(SapaConfig),
    Sgd(SgdConfig),
    Svrg(SvrpConfig),
    Saga(SapaConfig),
}

impl MethodSpec {
    pub fn method(&self) -> crate::trace::Method {
        use crate::trace::Method;
        match self {
            MethodSpec::Sppa(_) => Method::Sppa,
            MethodSpec::Svrp(_) => Method::Svrp,
            MethodSpec::Lsvrp(_) => Method::Lsvrp,
            MethodSpec::Sapa(_) => Method::Sapa,
            MethodSpec::Sgd(_) => Method::Sgd,
            MethodSpec::Svrg(_) => Method::Svrg,
            MethodSpec::Saga(_) => Method::Saga,
        }
    }

    pub fn run(&self, problem: &FiniteSumProblem, x0: &[f64], seed: Seed, opts: &TraceOptions<'_>) -> Result<RunTrace> {
        match self {
            MethodSpec::Sppa(c) => run_sppa(problem, c, x0, seed, opts),
            MethodSpec::Svrp(c) => run_svrp(problem, c, x0, seed, opts),
            MethodSpec::Lsvrp(c) => run_lsvrp(problem, c, x0, seed, opts),
            MethodSpec::Sapa(c) => run_sapa(problem, c, x0, seed, opts),
            MethodSpec::Sgd(c) => run_sgd(problem, c, x0, seed, opts),
            MethodSpec::Svrg(c) => run_svrg(problem, c, x0, seed, opts),
            MethodSpec::Saga(c) => run_saga(problem, c, x0, seed, opts),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("stepsize alpha must be positive"))
    }
}

#[cfg(test)]
mod tests;

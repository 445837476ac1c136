//! SPPA, SVRP, L-SVRP and SAPA.

use alloc::vec;

use super::reducer::{ReducerState, SAPA_RESYNC_INTERVAL};
use super::schedule::StepSchedule;
use super::{check_alpha, implicit_step_in_place, OuterMode, Seed};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::problem::FiniteSumProblem;
use crate::rng::RunRng;
use crate::trace::{Flow, Method, Recorder, RunStatus, RunTrace, TraceOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SppaConfig {
    pub schedule: StepSchedule,
    pub iterations: u64,
}

/// Parameters of the two-loop methods (SVRP and SVRG).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrpConfig {
    pub alpha: f64,
    /// Inner iterations per stage.
    pub m: u64,
    /// Number of outer stages.
    pub outer: u64,
    pub outer_mode: OuterMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsvrpConfig {
    pub alpha: f64,
    /// Anchor refresh probability.
    pub p: f64,
    pub iterations: u64,
}

/// Parameters of the gradient-table methods (SAPA and SAGA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SapaConfig {
    pub alpha: f64,
    pub iterations: u64,
}

pub(crate) fn validate_start(problem: &FiniteSumProblem, x0: &[f64]) -> Result<()> {
    problem.validate_point(x0)
}

pub(crate) fn end_status(opts: &TraceOptions<'_>) -> RunStatus {
    if opts.stop_gap.is_some() {
        RunStatus::CapReached
    } else {
        RunStatus::Completed
    }
}

/// Implicit step that reports a non-finite state instead of failing.
#[inline]
fn step(problem: &FiniteSumProblem, alpha: f64, i: usize, e: Option<&[f64]>, x: &mut [f64], tol: f64) -> Result<bool> {
    match implicit_step_in_place(problem, alpha, i, e, x, tol) {
        Ok(()) => Ok(true),
        Err(Error::NonFinite(_)) => Ok(false),
        Err(err) => Err(err),
    }
}

/// Stochastic proximal point: `x^{k+1} = prox_{α_k f_{i_k}}(x^k)`.
pub fn run_sppa(
    problem: &FiniteSumProblem,
    cfg: &SppaConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
) -> Result<RunTrace> {
    cfg.schedule.validate()?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter("iteration budget must be positive"));
    }
    validate_start(problem, x0)?;
    let n = problem.n();
    let mut rng = RunRng::new(seed.master, seed.run);
    let mut rec = Recorder::new(problem, *opts);
    let tol = rec.prox_tol();
    let mut x = x0.to_vec();
    if let Flow::Stop(st) = rec.record(0, 0, &x) {
        return Ok(rec.finish(Method::Sppa, st, false, x));
    }
    for k in 0..cfg.iterations {
        let i = rng.index(n);
        let alpha = cfg.schedule.at(k);
        if !step(problem, alpha, i, None, &mut x, tol)? {
            rec.diverged(k + 1, k + 1, &x);
            return Ok(rec.finish(Method::Sppa, RunStatus::Diverged, false, x));
        }
        let done = k + 1;
        let flow = if done == cfg.iterations { rec.record(done, done, &x) } else { rec.maybe_record(done, done, &x) };
        if let Flow::Stop(st) = flow {
            return Ok(rec.finish(Method::Sppa, st, false, x));
        }
    }
    Ok(rec.finish(Method::Sppa, end_status(opts), false, x))
}

pub(crate) fn validate_two_loop(cfg: &SvrpConfig) -> Result<()> {
    check_alpha(cfg.alpha)?;
    if cfg.m == 0 {
        return Err(Error::InvalidParameter("inner loop length m must be positive"));
    }
    if cfg.outer == 0 {
        return Err(Error::InvalidParameter("outer stage count must be positive"));
    }
    Ok(())
}

/// Runs the shared two-loop skeleton with either the implicit or explicit inner step.
pub(crate) fn run_two_loop(
    problem: &FiniteSumProblem,
    cfg: &SvrpConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
    method: Method,
) -> Result<RunTrace> {
    validate_two_loop(cfg)?;
    validate_start(problem, x0)?;
    let (n, d) = (problem.n(), problem.d());
    let implicit = method.is_proximal();
    let uncertified = cfg.outer_mode == OuterMode::LastInner;
    let per_stage = cfg.m + n as u64 + 1;
    let mut rng = RunRng::new(seed.master, seed.run);
    let mut rec = Recorder::new(problem, *opts);
    let tol = rec.prox_tol();
    let mut anchor = x0.to_vec();
    if let Flow::Stop(st) = rec.record(0, 0, &anchor) {
        return Ok(rec.finish(method, st, uncertified, anchor));
    }
    let mut x = vec![0.0; d];
    let mut e = vec![0.0; d];
    let mut next = vec![0.0; d];
    for s in 0..cfg.outer {
        let state = ReducerState::svrp(problem, &anchor);
        let xi = match cfg.outer_mode {
            OuterMode::RandomInner => rng.index(cfg.m as usize) as u64,
            _ => 0,
        };
        x.copy_from_slice(&anchor);
        if cfg.outer_mode == OuterMode::AverageInner {
            next.iter_mut().for_each(|v| *v = 0.0);
        }
        let w = 1.0 / cfg.m as f64;
        for j in 0..cfg.m {
            match cfg.outer_mode {
                OuterMode::RandomInner if j == xi => next.copy_from_slice(&x),
                OuterMode::AverageInner => axpy(w, &x, &mut next),
                _ => {}
            }
            let i = rng.index(n);
            state.correction_into(problem, i, &mut e);
            let ok = if implicit {
                step(problem, cfg.alpha, i, Some(&e), &mut x, tol)?
            } else {
                super::explicit_step_in_place(problem, cfg.alpha, i, Some(&e), &mut x)
            };
            if !ok {
                let calls = s * per_stage + n as u64 + j + 1;
                rec.diverged(s + 1, calls, &x);
                return Ok(rec.finish(method, RunStatus::Diverged, uncertified, x));
            }
        }
        if cfg.outer_mode == OuterMode::LastInner {
            next.copy_from_slice(&x);
        }
        core::mem::swap(&mut anchor, &mut next);
        if let Flow::Stop(st) = rec.record(s + 1, (s + 1) * per_stage, &anchor) {
            return Ok(rec.finish(method, st, uncertified, anchor));
        }
    }
    Ok(rec.finish(method, end_status(opts), uncertified, anchor))
}

/// Stochastic variance-reduced proximal point: one record per outer stage,
/// `m + n + 1` oracle calls per stage.
pub fn run_svrp(
    problem: &FiniteSumProblem,
    cfg: &SvrpConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
) -> Result<RunTrace> {
    run_two_loop(problem, cfg, x0, seed, opts, Method::Svrp)
}

/// Loopless SVRP: the anchor moves to the previous iterate `x^k` with
/// probability `p`, which costs `n` oracle calls for the new full gradient.
pub fn run_lsvrp(
    problem: &FiniteSumProblem,
    cfg: &LsvrpConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
) -> Result<RunTrace> {
    check_alpha(cfg.alpha)?;
    if !(cfg.p > 0.0 && cfg.p <= 1.0) {
        return Err(Error::InvalidParameter("refresh probability p must lie in (0, 1]"));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter("iteration budget must be positive"));
    }
    validate_start(problem, x0)?;
    let (n, d) = (problem.n(), problem.d());
    let mut rng = RunRng::new(seed.master, seed.run);
    let mut rec = Recorder::new(problem, *opts);
    let tol = rec.prox_tol();
    let mut x = x0.to_vec();
    let mut state = ReducerState::lsvrp(problem, x0, cfg.p);
    let mut calls = n as u64;
    if let Flow::Stop(st) = rec.record(0, calls, &x) {
        return Ok(rec.finish(Method::Lsvrp, st, false, x));
    }
    let mut e = vec![0.0; d];
    let mut prev = vec![0.0; d];
    for k in 0..cfg.iterations {
        let i = rng.index(n);
        state.correction_into(problem, i, &mut e);
        prev.copy_from_slice(&x);
        calls += 1;
        if !step(problem, cfg.alpha, i, Some(&e), &mut x, tol)? {
            rec.diverged(k + 1, calls, &x);
            return Ok(rec.finish(Method::Lsvrp, RunStatus::Diverged, false, x));
        }
        if rng.bernoulli(cfg.p) {
            if let ReducerState::LsvrpAnchor { anchor, gbar, .. } = &mut state {
                anchor.copy_from_slice(&prev);
                problem.full_gradient_into(anchor, gbar);
            }
            calls += n as u64;
        }
        let done = k + 1;
        let flow = if done == cfg.iterations { rec.record(done, calls, &x) } else { rec.maybe_record(done, calls, &x) };
        if let Flow::Stop(st) = flow {
            return Ok(rec.finish(Method::Lsvrp, st, false, x));
        }
    }
    Ok(rec.finish(Method::Lsvrp, end_status(opts), false, x))
}

/// Stochastic aggregated proximal algorithm. The table slot of the sampled
/// component is refreshed at the previous iterate `x^k` after the step.
pub fn run_sapa(
    problem: &FiniteSumProblem,
    cfg: &SapaConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
) -> Result<RunTrace> {
    run_table(problem, cfg, x0, seed, opts, Method::Sapa)
}

pub(crate) fn run_table(
    problem: &FiniteSumProblem,
    cfg: &SapaConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
    method: Method,
) -> Result<RunTrace> {
    check_alpha(cfg.alpha)?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter("iteration budget must be positive"));
    }
    validate_start(problem, x0)?;
    let (n, d) = (problem.n(), problem.d());
    let implicit = method.is_proximal();
    let mut rng = RunRng::new(seed.master, seed.run);
    let mut rec = Recorder::new(problem, *opts);
    let tol = rec.prox_tol();
    let mut x = x0.to_vec();
    let mut state = ReducerState::sapa(problem, x0);
    let mut calls = n as u64;
    if let Flow::Stop(st) = rec.record(0, calls, &x) {
        return Ok(rec.finish(method, st, false, x));
    }
    let mut e = vec![0.0; d];
    for k in 0..cfg.iterations {
        let i = rng.index(n);
        state.correction_into(problem, i, &mut e);
        let g = problem.gradient_scale(i, &x);
        calls += 1;
        let ok = g.is_finite()
            && if implicit {
                step(problem, cfg.alpha, i, Some(&e), &mut x, tol)?
            } else {
                axpy(-cfg.alpha * g, problem.row(i), &mut x);
                axpy(cfg.alpha, &e, &mut x);
                true
            };
        if !ok {
            rec.diverged(k + 1, calls, &x);
            return Ok(rec.finish(method, RunStatus::Diverged, false, x));
        }
        state.replace_table_row_scaled(i, g, problem.row(i));
        let done = k + 1;
        if done % SAPA_RESYNC_INTERVAL == 0 {
            state.resync();
        }
        let flow = if done == cfg.iterations { rec.record(done, calls, &x) } else { rec.maybe_record(done, calls, &x) };
        if let Flow::Stop(st) = flow {
            return Ok(rec.finish(method, st, false, x));
        }
    }
    Ok(rec.finish(method, end_status(opts), false, x))
}

//! Explicit-gradient counterparts: SGD, SVRG and SAGA.

use super::proximal::{end_status, run_table, run_two_loop, validate_start, SapaConfig, SvrpConfig};
use super::schedule::StepSchedule;
use super::{explicit_step_in_place, Seed};
use crate::error::{Error, Result};
use crate::problem::FiniteSumProblem;
use crate::rng::RunRng;
use crate::trace::{Flow, Method, Recorder, RunStatus, RunTrace, TraceOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    pub iterations: u64,
}

/// `x^{k+1} = x^k − α_k ∇f_{i_k}(x^k)`.
pub fn run_sgd(
    problem: &FiniteSumProblem,
    cfg: &SgdConfig,
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
    let mut x = x0.to_vec();
    if let Flow::Stop(st) = rec.record(0, 0, &x) {
        return Ok(rec.finish(Method::Sgd, st, false, x));
    }
    for k in 0..cfg.iterations {
        let i = rng.index(n);
        let done = k + 1;
        if !explicit_step_in_place(problem, cfg.schedule.at(k), i, None, &mut x) {
            rec.diverged(done, done, &x);
            return Ok(rec.finish(Method::Sgd, RunStatus::Diverged, false, x));
        }
        let flow = if done == cfg.iterations { rec.record(done, done, &x) } else { rec.maybe_record(done, done, &x) };
        if let Flow::Stop(st) = flow {
            return Ok(rec.finish(Method::Sgd, st, false, x));
        }
    }
    Ok(rec.finish(Method::Sgd, end_status(opts), false, x))
}

/// SVRG with the same stage structure and accounting as SVRP.
pub fn run_svrg(
    problem: &FiniteSumProblem,
    cfg: &SvrpConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
) -> Result<RunTrace> {
    run_two_loop(problem, cfg, x0, seed, opts, Method::Svrg)
}

/// SAGA with the same gradient table as SAPA.
pub fn run_saga(
    problem: &FiniteSumProblem,
    cfg: &SapaConfig,
    x0: &[f64],
    seed: Seed,
    opts: &TraceOptions<'_>,
) -> Result<RunTrace> {
    run_table(problem, cfg, x0, seed, opts, Method::Saga)
}

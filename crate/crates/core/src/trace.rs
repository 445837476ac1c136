//! Run traces and the recorder shared by every method runner.

use alloc::vec::Vec;

use crate::diagnostics::SolutionSet;
use crate::linalg::all_finite;
use crate::problem::FiniteSumProblem;
use crate::prox::DEFAULT_PROX_TOL;

/// Runs stop as diverged once the gap exceeds this multiple of the initial gap.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sppa,
    Svrp,
    Lsvrp,
    Sapa,
    Sgd,
    Svrg,
    Saga,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Sppa, Method::Svrp, Method::Lsvrp, Method::Sapa, Method::Sgd, Method::Svrg, Method::Saga];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sppa => "sppa",
            Method::Svrp => "svrp",
            Method::Lsvrp => "lsvrp",
            Method::Sapa => "sapa",
            Method::Sgd => "sgd",
            Method::Svrg => "svrg",
            Method::Saga => "saga",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    pub fn is_proximal(self) -> bool {
        matches!(self, Method::Sppa | Method::Svrp | Method::Lsvrp | Method::Sapa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Completed,
    /// Stopped early because the gap reached the requested target.
    TargetReached,
    CapReached,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Iteration index `k`, or outer stage `s` for the two-loop methods.
    pub counter: u64,
    /// Cumulative component oracle calls (gradients and proxes).
    pub oracle_calls: u64,
    /// `F(x) − F_*`.
    pub fgap: f64,
    pub dist2: Option<f64>,
    pub wall_ns: u64,
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: Method,
    pub records: Vec<Record>,
    pub status: RunStatus,
    /// Set when the run used an outer-loop rule the convergence theory does
    /// not cover (last inner iterate as the next anchor).
    pub uncertified: bool,
    pub final_x: Vec<f64>,
}

impl RunTrace {
    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fgap).collect()
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.fgap)
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.records.last().map_or(0, |r| r.oracle_calls)
    }

    /// Equality ignoring wall-clock timestamps.
    pub fn same_outcome(&self, other: &RunTrace) -> bool {
        self.method == other.method
            && self.status == other.status
            && self.uncertified == other.uncertified
            && self.final_x == other.final_x
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.counter == b.counter && a.oracle_calls == b.oracle_calls && a.fgap.to_bits() == b.fgap.to_bits()
                    && a.dist2.map(f64::to_bits) == b.dist2.map(f64::to_bits)
                    && a.x == b.x
            })
    }
}

/// When a single-loop runner takes a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cadence {
    /// Every `r` iterations (and at the last one).
    Iterations(u64),
    /// Whenever the cumulative oracle count crosses a multiple of `c`.
    OracleCalls(u64),
}

/// Measurement options shared by all runners.
#[derive(Clone, Copy)]
pub struct TraceOptions<'a> {
    /// `None` means once per effective pass (`n` iterations).
    pub cadence: Option<Cadence>,
    pub fstar: f64,
    pub solution: Option<&'a SolutionSet>,
    pub keep_iterates: bool,
    /// Stop as soon as a recorded gap is at or below this value.
    pub stop_gap: Option<f64>,
    /// Monotone nanosecond clock; without one `wall_ns` stays zero.
    pub clock: Option<fn() -> u64>,
    pub prox_tol: f64,
}

impl<'a> TraceOptions<'a> {
    pub fn new(fstar: f64) -> Self {
        Self {
            cadence: None,
            fstar,
            solution: None,
            keep_iterates: false,
            stop_gap: None,
            clock: None,
            prox_tol: DEFAULT_PROX_TOL,
        }
    }

    pub fn with_solution(mut self, solution: &'a SolutionSet) -> Self {
        self.solution = Some(solution);
        self
    }

    pub fn every(mut self, cadence: Cadence) -> Self {
        self.cadence = Some(cadence);
        self
    }

    pub fn keep_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }

    pub fn stop_at(mut self, gap: f64) -> Self {
        self.stop_gap = Some(gap);
        self
    }
}

pub(crate) enum Flow {
    Continue,
    Stop(RunStatus),
}

pub(crate) struct Recorder<'a, 'p> {
    problem: &'p FiniteSumProblem,
    opts: TraceOptions<'a>,
    cadence: Cadence,
    next_mark: u64,
    start_ns: u64,
    initial_gap: Option<f64>,
    records: Vec<Record>,
}

impl<'a, 'p> Recorder<'a, 'p> {
    pub fn new(problem: &'p FiniteSumProblem, opts: TraceOptions<'a>) -> Self {
        let cadence = opts.cadence.unwrap_or(Cadence::Iterations(problem.n() as u64));
        let cadence = match cadence {
            Cadence::Iterations(0) => Cadence::Iterations(1),
            Cadence::OracleCalls(0) => Cadence::OracleCalls(1),
            c => c,
        };
        let start_ns = opts.clock.map_or(0, |c| c());
        Self { problem, opts, cadence, next_mark: 0, start_ns, initial_gap: None, records: Vec::new() }
    }

    pub fn prox_tol(&self) -> f64 {
        self.opts.prox_tol
    }

    /// Whether iteration `k` (with `calls` oracle calls so far) is due.
    pub fn due(&self, k: u64, calls: u64) -> bool {
        match self.cadence {
            Cadence::Iterations(r) => k % r == 0,
            Cadence::OracleCalls(_) => calls >= self.next_mark,
        }
    }

    /// Unconditionally record the point; returns whether the run should stop.
    pub fn record(&mut self, counter: u64, calls: u64, x: &[f64]) -> Flow {
        if let Cadence::OracleCalls(c) = self.cadence {
            while self.next_mark <= calls {
                self.next_mark += c;
            }
        }
        if let Some(last) = self.records.last() {
            if last.oracle_calls == calls && last.counter == counter {
                return Flow::Continue;
            }
        }
        let finite = all_finite(x);
        let fgap = if finite { self.problem.value_unchecked(x) - self.opts.fstar } else { f64::INFINITY };
        let dist2 = match (self.opts.solution, finite) {
            (Some(sol), true) => Some(sol.distance_sq(x)),
            (Some(_), false) => Some(f64::INFINITY),
            _ => None,
        };
        let wall_ns = self.opts.clock.map_or(0, |c| c().saturating_sub(self.start_ns));
        self.records.push(Record {
            counter,
            oracle_calls: calls,
            fgap,
            dist2,
            wall_ns,
            x: if self.opts.keep_iterates { Some(x.to_vec()) } else { None },
        });
        let initial = *self.initial_gap.get_or_insert(fgap.abs());
        if !finite || !fgap.is_finite() || fgap > DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE) {
            return Flow::Stop(RunStatus::Diverged);
        }
        if let Some(target) = self.opts.stop_gap {
            if fgap <= target {
                return Flow::Stop(RunStatus::TargetReached);
            }
        }
        Flow::Continue
    }

    pub fn maybe_record(&mut self, k: u64, calls: u64, x: &[f64]) -> Flow {
        if self.due(k, calls) {
            self.record(k, calls, x)
        } else {
            Flow::Continue
        }
    }

    /// Record a non-finite state observed mid-step.
    pub fn diverged(&mut self, counter: u64, calls: u64, x: &[f64]) {
        let _ = self.record(counter, calls, x);
    }

    pub fn finish(self, method: Method, status: RunStatus, uncertified: bool, final_x: Vec<f64>) -> RunTrace {
        RunTrace { method, records: self.records, status, uncertified, final_x }
    }
}

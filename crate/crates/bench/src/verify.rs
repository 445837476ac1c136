//! The acceptance suite: one check per criterion, each with its own preset.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use proxvr_core::diagnostics::{check_assumptions, reference_optimum, unbiased_residual, sapa_sigma_closed_form, SolutionSet};
use proxvr_core::methods::{
    run_lsvrp, run_sapa, run_sppa, run_svrp, LsvrpConfig, OuterMode, ReducerState, SapaConfig, Seed, SppaConfig, StepSchedule,
    SvrpConfig,
};
use proxvr_core::prox::prox_component;
use proxvr_core::rates::{self, RateConstants};
use proxvr_core::rng::RunRng;
use proxvr_core::synthetic::{generate_ols_instance, GeneratorConfig, SyntheticInstance};
use proxvr_core::trace::{Cadence, Method, RunTrace, TraceOptions};
use proxvr_core::{FiniteSumProblem, LossKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, LossName, MethodParams, ProblemParams, SeedParams};
use crate::error::{BenchError, Result};
use crate::experiments::{best_tuned, replay, run_experiment, Report, SummaryRow, REFERENCE_TOL};
use crate::io::write_string;
use crate::manifest::ExperimentManifest;

pub const VERIFY_FILE: &str = "verify.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("[{}] criterion {}: {} ({:.1}s) {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, self.seconds, self.detail)
    }
}

/// Rate formulas under test; replaceable so that a broken formula can be
/// shown to fail the suite.
#[derive(Clone, Copy)]
pub struct RateFns {
    pub svrp_rate_q: fn(f64, f64, f64, u64) -> proxvr_core::Result<RateConstants>,
    pub lsvrp_rate_q: fn(f64, f64, f64, f64, f64) -> proxvr_core::Result<RateConstants>,
    pub sapa_rate_q: fn(f64, f64, f64, usize, f64) -> proxvr_core::Result<RateConstants>,
    pub unified_ergodic_bound: fn(f64, f64, f64, f64, f64, f64, u64) -> f64,
    pub sppa_ergodic_bound: fn(f64, f64, f64, f64) -> f64,
}

impl Default for RateFns {
    fn default() -> Self {
        Self {
            svrp_rate_q: rates::svrp_rate_q,
            lsvrp_rate_q: rates::lsvrp_rate_q,
            sapa_rate_q: rates::sapa_rate_q,
            unified_ergodic_bound: rates::unified_ergodic_bound,
            sppa_ergodic_bound: rates::sppa_ergodic_bound,
        }
    }
}

/// Parameters of the two sweep reproductions.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPreset {
    pub n: usize,
    pub d: usize,
    pub cond: f64,
    pub seeds: u64,
    pub grid: Option<Vec<f64>>,
    pub cap: Option<u64>,
    pub m: Option<u64>,
    pub outer: Option<u64>,
    pub record_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub prox_instances: usize,
    pub state_samples: usize,
    pub rate_seeds: u64,
    pub ergodic_seeds: u64,
    pub stability: SweepPreset,
    pub tuned: SweepPreset,
    /// Enforce the stated runtime limits.
    pub timed: bool,
    pub workers: usize,
}

impl Suite {
    /// The criteria at their stated sizes.
    pub fn full(workers: usize) -> Self {
        Self {
            prox_instances: 1000,
            state_samples: 100,
            rate_seeds: 200,
            ergodic_seeds: 100,
            stability: SweepPreset { n: 1000, d: 500, cond: 100.0, seeds: 5, grid: None, cap: Some(40_000), m: None, outer: None, record_every: Some(100) },
            tuned: SweepPreset { n: 500, d: 500, cond: 100.0, seeds: 5, grid: None, cap: None, m: Some(250), outer: Some(20), record_every: None },
            timed: true,
            workers,
        }
    }

    /// Same checks with the two sweeps scaled down.
    pub fn quick(workers: usize) -> Self {
        let grid = Some(crate::config::parse_alpha_grid("0.001:10:5").expect("static grid"));
        Self {
            stability: SweepPreset { n: 200, d: 100, cond: 10.0, seeds: 5, grid: grid.clone(), cap: Some(40_000), m: None, outer: None, record_every: Some(20) },
            tuned: SweepPreset { n: 100, d: 100, cond: 10.0, seeds: 5, grid, cap: None, m: Some(50), outer: Some(20), record_every: None },
            timed: false,
            ..Self::full(workers)
        }
    }
}

fn timed(id: u32, name: &str, limit_secs: Option<f64>, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let t = Instant::now();
    let out = f();
    let seconds = t.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match out {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit_secs {
        if seconds > limit {
            passed = false;
            detail.push_str(&format!("; runtime {seconds:.1}s exceeds {limit}s"));
        }
    }
    CriterionResult { id, name: name.to_string(), passed, seconds, detail }
}

pub const CRITERIA: [u32; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Runs one criterion; `scratch` holds experiment outputs of criteria 7 to 9.
pub fn run_criterion(id: u32, suite: &Suite, rates: RateFns, scratch: &Path) -> CriterionResult {
    let lim = |s: f64| if suite.timed { Some(s) } else { None };
    let pool = match crate::experiments::thread_pool(suite.workers) {
        Ok(p) => p,
        Err(e) => return CriterionResult { id, name: "setup".into(), passed: false, seconds: 0.0, detail: e.to_string() },
    };
    pool.install(|| match id {
        1 => timed(1, "prox kernel correctness", lim(10.0), || prox_kernel(suite.prox_instances)),
        2 => timed(2, "unbiased corrections", lim(5.0), || unbiasedness(suite.state_samples)),
        3 => timed(3, "ABC bound and sigma recursion", lim(10.0), || abc_and_sigma(suite.state_samples)),
        4 => timed(4, "SVRP stage contraction", lim(60.0), || svrp_contraction(suite.rate_seeds, rates)),
        5 => timed(5, "L-SVRP and SAPA linear envelopes", lim(120.0), || linear_envelopes(suite.rate_seeds, rates)),
        6 => timed(6, "ergodic convex rate", lim(60.0), || ergodic_rate(suite.ergodic_seeds, rates)),
        7 => timed(7, "SAPA vs SAGA stability", lim(900.0), || stability(&suite.stability, suite.workers, scratch)),
        8 => timed(8, "tuned SVRP vs SVRG", lim(900.0), || tuned_comparison(&suite.tuned, suite.workers, scratch)),
        9 => timed(9, "determinism from manifest", None, || determinism(suite.workers, scratch)),
        _ => CriterionResult { id, name: "unknown".into(), passed: false, seconds: 0.0, detail: format!("no criterion {id}") },
    })
}

pub fn run_suite(suite: &Suite, rates: RateFns, scratch: &Path) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&id| run_criterion(id, suite, rates, scratch)).collect()
}

pub fn exit_code(results: &[CriterionResult]) -> i32 {
    if results.iter().all(|r| r.passed) {
        0
    } else {
        1
    }
}

pub(crate) fn verify_experiment(config: &ExperimentConfig, out_dir: &Path, manifest: &mut ExperimentManifest) -> Result<Report> {
    let suite = Suite::quick(config.workers);
    let results = run_suite(&suite, RateFns::default(), &out_dir.join("scratch"));
    let path = out_dir.join(VERIFY_FILE);
    write_string(&path, &serde_json::to_string_pretty(&results)?)?;
    manifest.add_artifact(out_dir, &path)?;
    Ok(Report::Verify(results))
}

fn core(e: proxvr_core::Error) -> BenchError {
    BenchError::Core(e)
}

/// Damped Newton on `f_i(y) + ‖y − x‖²/(2α)` over the full space.
pub fn full_prox_oracle(p: &FiniteSumProblem, i: usize, alpha: f64, x: &[f64]) -> Vec<f64> {
    let d = p.d();
    let a = DVector::from_column_slice(p.row(i));
    let b = p.label(i);
    let loss = p.loss();
    let xv = DVector::from_column_slice(x);
    let obj = |y: &DVector<f64>| loss.value(a.dot(y), b) + (y - &xv).norm_squared() / (2.0 * alpha);
    let mut y = xv.clone();
    for _ in 0..200 {
        let t = a.dot(&y);
        let g = &a * loss.derivative(t, b) + (&y - &xv) / alpha;
        if g.norm() <= 1e-14 * (1.0 + y.norm() / alpha) {
            break;
        }
        let h = &a * a.transpose() * loss.second_derivative(t, b) + DMatrix::identity(d, d) / alpha;
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&g);
        let f0 = obj(&y);
        let mut eta = 1.0;
        while eta > 1e-12 && obj(&(&y - &step * eta)) > f0 - 1e-4 * eta * g.dot(&step) {
            eta *= 0.5;
        }
        y -= step * eta;
    }
    y.as_slice().to_vec()
}

fn prox_kernel(instances: usize) -> Result<(bool, String)> {
    let mut rng = RunRng::new(101, 0);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for k in 0..instances {
        let loss = if k % 2 == 0 { LossKind::SquaredResidual } else { LossKind::Logistic };
        let d = 1 + rng.index(8);
        let row: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let b = match loss {
            LossKind::SquaredResidual => 3.0 * rng.standard_normal(),
            LossKind::Logistic => {
                if rng.uniform01() < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let alpha = (2.0 * rng.standard_normal()).exp();
        let x: Vec<f64> = (0..d).map(|_| 2.0 * rng.standard_normal()).collect();
        let p = FiniteSumProblem::new(row, 1, d, vec![b], loss).map_err(core)?;
        let got = prox_component(&p, 0, alpha, &x).map_err(core)?;
        let want = full_prox_oracle(&p, 0, alpha, &x);
        let err = got.iter().zip(&want).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        worst_oracle = worst_oracle.max(err);
        if loss == LossKind::SquaredResidual {
            let a = p.row(0);
            let t: f64 = a.iter().zip(&x).map(|(u, v)| u * v).sum();
            let nrm: f64 = a.iter().map(|u| u * u).sum();
            let c = alpha * (b - t) / (alpha * nrm + 1.0);
            let closed: Vec<f64> = x.iter().zip(a).map(|(xj, aj)| xj + c * aj).collect();
            let diff = got.iter().zip(&closed).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            let scale = closed.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            worst_closed = worst_closed.max(diff / scale);
        }
    }
    let passed = worst_oracle <= 1e-8 && worst_closed <= 1e-12;
    Ok((passed, format!("{instances} instances; max |prox - oracle| = {worst_oracle:.2e} (tol 1e-8); max closed-form rel err = {worst_closed:.2e} (tol 1e-12)")))
}

/// Least squares with `b = A x_true + 0.5 ξ`, so that `F_* > 0` and the
/// component gradients do not vanish on the solution set.
pub fn noisy_ols(n: usize, d: usize, cond: f64, seed: u64, full_rank: bool) -> Result<SyntheticInstance> {
    let mut cfg = GeneratorConfig::new(n, d, cond, LossKind::SquaredResidual, seed);
    if full_rank {
        cfg = cfg.full_rank();
    }
    let mut inst = generate_ols_instance(&cfg).map_err(core)?;
    let mut rng = RunRng::new(seed, 9);
    let labels: Vec<f64> = inst.problem.labels().iter().map(|b| b + 0.5 * rng.standard_normal()).collect();
    inst.problem = FiniteSumProblem::new(inst.problem.design().to_vec(), n, d, labels, LossKind::SquaredResidual).map_err(core)?;
    Ok(inst)
}

fn random_vec(rng: &mut RunRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.standard_normal()).collect()
}

fn random_state(p: &FiniteSumProblem, method: Method, rng: &mut RunRng) -> ReducerState {
    let d = p.d();
    match method {
        Method::Svrp => ReducerState::svrp(p, &random_vec(rng, d, 2.0)),
        Method::Lsvrp => ReducerState::lsvrp(p, &random_vec(rng, d, 2.0), 1.0 / p.n() as f64),
        Method::Sapa => {
            let phis: Vec<Vec<f64>> = (0..p.n()).map(|_| random_vec(rng, d, 2.0)).collect();
            ReducerState::sapa_from_points(p, &phis)
        }
        _ => ReducerState::None,
    }
}

fn unbiasedness(samples: usize) -> Result<(bool, String)> {
    let inst = noisy_ols(50, 10, 10.0, 202, false)?;
    let p = &inst.problem;
    let mut rng = RunRng::new(202, 0);
    let mut worst: f64 = 0.0;
    for method in [Method::Svrp, Method::Lsvrp, Method::Sapa] {
        for _ in 0..samples {
            let state = random_state(p, method, &mut rng);
            let (res, scale) = unbiased_residual(p, &state);
            worst = worst.max(res / scale);
        }
    }
    Ok((worst <= 1e-12, format!("{samples} states per method; max |mean correction| / gradient scale = {worst:.2e} (tol 1e-12)")))
}

fn abc_and_sigma(samples: usize) -> Result<(bool, String)> {
    let inst = noisy_ols(50, 10, 10.0, 303, false)?;
    let p = &inst.problem;
    let reference = reference_optimum(p, REFERENCE_TOL).map_err(core)?;
    let set = reference.solution_set.clone().ok_or_else(|| BenchError::config("least squares reference lacks a solution set"))?;
    let mut rng = RunRng::new(303, 0);
    let mut min_abc = f64::INFINITY;
    let mut min_sigma = f64::INFINITY;
    let mut worst_closed: f64 = 0.0;
    let mut violations = 0usize;
    for method in [Method::Sppa, Method::Svrp, Method::Lsvrp, Method::Sapa] {
        for _ in 0..samples {
            let state = random_state(p, method, &mut rng);
            let x = random_vec(&mut rng, p.d(), 2.0);
            let rep = check_assumptions(p, method, &state, &x, &set, reference.fstar).map_err(core)?;
            // Rounding allowance: the bounds are sums of O(n) terms of size `scale`.
            let scale = rep.abc_bound.abs().max(rep.sigma_recursion_bound.abs()).max(1.0);
            let (a, s) = (rep.abc_margin / scale, rep.sigma_recursion_margin / scale);
            min_abc = min_abc.min(a);
            min_sigma = min_sigma.min(s);
            if a < -1e-12 || s < -1e-12 {
                violations += 1;
            }
            if method == Method::Sapa {
                let closed = sapa_sigma_closed_form(p, &state, &x, &set.x_hat).map_err(core)?;
                worst_closed = worst_closed.max((closed - rep.next_sigma_sq).abs() / closed.max(1.0));
            }
        }
    }
    let passed = violations == 0 && worst_closed <= 1e-10;
    Ok((
        passed,
        format!(
            "{samples} states per method; min relative ABC slack {min_abc:.2e}, min relative sigma slack {min_sigma:.2e}, {violations} violations; SAPA closed form max rel diff {worst_closed:.2e} (tol 1e-10)"
        ),
    ))
}

/// Small full-rank least-squares preset with known `μ` and `L`.
pub const RATE_PRESET: (usize, usize, f64, u64) = (50, 10, 2.0, 404);

fn rate_instance() -> Result<SyntheticInstance> {
    let (n, d, cond, seed) = RATE_PRESET;
    generate_ols_instance(&GeneratorConfig::new(n, d, cond, LossKind::SquaredResidual, seed).full_rank()).map_err(core)
}

fn reference_check(name: &str, got: f64, want: f64) -> Option<String> {
    if (got - want).abs() <= 1e-12 * want.abs().max(1.0) {
        None
    } else {
        Some(format!("{name} reference value {got} != {want}"))
    }
}

fn mean_over_seeds(traces: &[Vec<f64>]) -> Vec<f64> {
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|k| traces.iter().map(|t| t[k]).sum::<f64>() / traces.len() as f64).collect()
}

fn svrp_contraction(seeds: u64, rates: RateFns) -> Result<(bool, String)> {
    if let Some(msg) = (rates.svrp_rate_q)(1.0, 2.0, 0.1, 100).map(|r| reference_check("svrp_rate_q", r.q, 0.5)).map_err(core)? {
        return Ok((false, msg));
    }
    let inst = rate_instance()?;
    let p = &inst.problem;
    let reference = reference_optimum(p, REFERENCE_TOL).map_err(core)?;
    let mu = inst.meta.mu;
    let l = p.smoothness_constant();
    let alpha = 0.8 * rates::svrp_alpha_limit(mu, l);
    let m = (2.0 * rates::svrp_m_threshold(mu, l, alpha)).ceil() as u64;
    let rc = (rates.svrp_rate_q)(mu, l, alpha, m).map_err(core)?;
    if !rc.valid {
        return Ok((false, format!("svrp_rate_q reports invalid preset ({:?})", rc.violation)));
    }
    let stages = 10;
    let x0 = vec![0.0; p.d()];
    let cfg = SvrpConfig { alpha, m, outer: stages, outer_mode: OuterMode::RandomInner };
    let opts = TraceOptions::new(reference.fstar);
    let gaps: Vec<Vec<f64>> = (0..seeds)
        .into_par_iter()
        .map(|s| run_svrp(p, &cfg, &x0, Seed::new(404, s), &opts).map(|t| t.gaps()))
        .collect::<proxvr_core::Result<_>>()
        .map_err(core)?;
    let mean = mean_over_seeds(&gaps);
    if mean.len() != stages as usize + 1 {
        return Ok((false, format!("expected {} stage records, got {}", stages + 1, mean.len())));
    }
    let ratios: Vec<f64> = mean.windows(2).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let passed = ratios.iter().all(|r| *r <= rc.q + 0.05);
    Ok((
        passed,
        format!(
            "mu={mu:.4e} L={l:.4e} alpha={alpha:.4e} m={m} q={:.4} over {seeds} seeds; max stage ratio {worst:.4e} (bound q+0.05 = {:.4}); final mean gap {:.3e}",
            rc.q,
            rc.q + 0.05,
            mean[stages as usize]
        ),
    ))
}

fn sigma0(p: &FiniteSumProblem, method: Method, state: &ReducerState, x0: &[f64], set: &SolutionSet, fstar: f64) -> Result<f64> {
    Ok(check_assumptions(p, method, state, x0, set, fstar).map_err(core)?.sigma_sq)
}

fn linear_envelopes(seeds: u64, rates: RateFns) -> Result<(bool, String)> {
    let checks = [
        (rates.lsvrp_rate_q)(1.0, 2.0, 0.05, 0.5, 8.0).map(|r| reference_check("lsvrp_rate_q", r.q, 0.98)),
        (rates.sapa_rate_q)(1.0, 2.0, 0.05, 2, 8.0).map(|r| reference_check("sapa_rate_q", r.q, 0.98)),
    ];
    for c in checks {
        if let Some(msg) = c.map_err(core)? {
            return Ok((false, msg));
        }
    }
    let inst = rate_instance()?;
    let p = &inst.problem;
    let n = p.n();
    let reference = reference_optimum(p, REFERENCE_TOL).map_err(core)?;
    let set = reference.solution_set.clone().ok_or_else(|| BenchError::config("missing solution set"))?;
    let mu = inst.meta.mu;
    let l = p.smoothness_constant();
    let big_m = 4.0 * n as f64;
    let pr = 1.0 / n as f64;
    let alpha = 0.5 / (l * (2.0 + pr * big_m));
    let k_max = 20 * n as u64;
    let x0 = vec![0.0; p.d()];
    let opts = TraceOptions::new(reference.fstar).with_solution(&set).every(Cadence::Iterations(1));
    let d0 = set.distance_sq(&x0);
    let mut parts = Vec::new();
    let mut passed = true;
    for method in [Method::Lsvrp, Method::Sapa] {
        let (rc, state) = match method {
            Method::Lsvrp => ((rates.lsvrp_rate_q)(mu, l, alpha, pr, big_m), ReducerState::lsvrp(p, &x0, pr)),
            _ => ((rates.sapa_rate_q)(mu, l, alpha, n, big_m), ReducerState::sapa(p, &x0)),
        };
        let rc = rc.map_err(core)?;
        if !rc.valid {
            passed = false;
            parts.push(format!("{}: invalid constants ({:?})", method.name(), rc.violation));
            continue;
        }
        let v0 = d0 + alpha * alpha * big_m * sigma0(p, method, &state, &x0, &set, reference.fstar)?;
        let dists: Vec<Vec<f64>> = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let trace = match method {
                    Method::Lsvrp => run_lsvrp(p, &LsvrpConfig { alpha, p: pr, iterations: k_max }, &x0, Seed::new(505, s), &opts),
                    _ => run_sapa(p, &SapaConfig { alpha, iterations: k_max }, &x0, Seed::new(505, s), &opts),
                };
                trace.map(|t| t.records.iter().map(|r| r.dist2.unwrap_or(f64::INFINITY)).collect())
            })
            .collect::<proxvr_core::Result<_>>()
            .map_err(core)?;
        let mean = mean_over_seeds(&dists);
        let ok_len = mean.len() == k_max as usize + 1;
        let mut worst: f64 = 0.0;
        let mut violated = 0usize;
        for (k, dk) in mean.iter().enumerate() {
            let env = 1.05 * rc.envelope(v0, k as u64);
            worst = worst.max(dk / env);
            if *dk > env {
                violated += 1;
            }
        }
        passed &= ok_len && violated == 0;
        parts.push(format!(
            "{}: q={:.6} V0={v0:.4e}, max dist2/(1.05 V0 q^k) = {worst:.3e}, {violated} violations over {} steps",
            method.name(),
            rc.q,
            mean.len()
        ));
    }
    Ok((passed, format!("M=4n alpha={alpha:.4e} p=1/n, {seeds} seeds; {}", parts.join("; "))))
}

/// Mean over seeds of `F(x̄_k) − F_*` for `k = 1..=K`, where `x̄_k` is the
/// `w`-weighted average of `x⁰..x^{k−1}`.
fn ergodic_gaps(p: &FiniteSumProblem, fstar: f64, traces: &[RunTrace], w: &[f64]) -> Vec<f64> {
    let d = p.d();
    let per_seed: Vec<Vec<f64>> = traces
        .par_iter()
        .map(|t| {
            let mut acc = vec![0.0; d];
            let mut total = 0.0;
            let mut out = Vec::with_capacity(t.records.len());
            for (k, r) in t.records.iter().enumerate().take(w.len()) {
                let x = r.x.as_ref().expect("iterates kept");
                total += w[k];
                for (a, xj) in acc.iter_mut().zip(x) {
                    *a += w[k] * xj;
                }
                let avg: Vec<f64> = acc.iter().map(|a| a / total).collect();
                out.push(p.value_unchecked(&avg) - fstar);
            }
            out
        })
        .collect();
    mean_over_seeds(&per_seed)
}

fn ergodic_rate(seeds: u64, rates: RateFns) -> Result<(bool, String)> {
    let checks = [
        reference_check("unified_ergodic_bound", (rates.unified_ergodic_bound)(1.0, 1.0, 0.1, 2.0, 0.5, 8.0, 10), 1.35),
        reference_check("sppa_ergodic_bound", (rates.sppa_ergodic_bound)(1.0, 1.0, 2.0, 0.5), 1.0),
    ];
    if let Some(msg) = checks.into_iter().flatten().next() {
        return Ok((false, msg));
    }
    let inst = noisy_ols(50, 10, 10.0, 606, false)?;
    let p = &inst.problem;
    let n = p.n();
    let reference = reference_optimum(p, REFERENCE_TOL).map_err(core)?;
    let set = reference.solution_set.clone().ok_or_else(|| BenchError::config("missing solution set"))?;
    let l = p.smoothness_constant();
    let x0 = vec![0.0; p.d()];
    let d0 = set.distance_sq(&x0);
    let k_max = 20 * n as u64;
    let opts = TraceOptions::new(reference.fstar).every(Cadence::Iterations(1)).keep_iterates();
    let mut parts = Vec::new();
    let mut passed = true;

    let schedule = StepSchedule::PolynomialDecay { c: 1.0 / (4.0 * l), exponent: 0.55 };
    let sigma1 = sigma0(p, Method::Sppa, &ReducerState::None, &x0, &set, reference.fstar)?;
    let traces: Vec<RunTrace> = (0..seeds)
        .into_par_iter()
        .map(|s| run_sppa(p, &SppaConfig { schedule, iterations: k_max }, &x0, Seed::new(606, s), &opts))
        .collect::<proxvr_core::Result<_>>()
        .map_err(core)?;
    let w: Vec<f64> = (0..k_max).map(|k| schedule.at(k)).collect();
    let gaps = ergodic_gaps(p, reference.fstar, &traces, &w);
    let (mut sa, mut sa2, mut worst, mut bad) = (0.0, 0.0, 0.0f64, 0usize);
    for (k, g) in gaps.iter().enumerate() {
        sa += w[k];
        sa2 += w[k] * w[k];
        let bound = (rates.sppa_ergodic_bound)(d0, sigma1, sa, sa2);
        worst = worst.max(g / bound);
        if *g > bound {
            bad += 1;
        }
    }
    passed &= bad == 0 && gaps.len() == k_max as usize;
    parts.push(format!("sppa (alpha_k = 1/(4L (k+1)^0.55), sigma1^2 = {sigma1:.4e}): max gap/bound {worst:.3e}, {bad} violations"));

    for method in [Method::Lsvrp, Method::Sapa] {
        // With p = 1/n both methods share (A, B, C, ρ) = (2L, 2, L/n, 1/n).
        let (a, b, c, rho) = (2.0 * l, 2.0, l / n as f64, 1.0 / n as f64);
        let big_m = b / rho;
        let alpha = 0.5 / (a + big_m * c);
        let pr = rho;
        let state = match method {
            Method::Lsvrp => ReducerState::lsvrp(p, &x0, pr),
            _ => ReducerState::sapa(p, &x0),
        };
        let s0 = sigma0(p, method, &state, &x0, &set, reference.fstar)?;
        let traces: Vec<RunTrace> = (0..seeds)
            .into_par_iter()
            .map(|s| match method {
                Method::Lsvrp => run_lsvrp(p, &LsvrpConfig { alpha, p: pr, iterations: k_max }, &x0, Seed::new(607, s), &opts),
                _ => run_sapa(p, &SapaConfig { alpha, iterations: k_max }, &x0, Seed::new(607, s), &opts),
            })
            .collect::<proxvr_core::Result<_>>()
            .map_err(core)?;
        let w = vec![1.0; k_max as usize];
        let gaps = ergodic_gaps(p, reference.fstar, &traces, &w);
        let (mut worst, mut bad) = (0.0f64, 0usize);
        for (k, g) in gaps.iter().enumerate() {
            let bound = (rates.unified_ergodic_bound)(d0, s0, alpha, a, c, big_m, k as u64 + 1);
            worst = worst.max(g / bound);
            if *g > bound {
                bad += 1;
            }
        }
        passed &= bad == 0 && gaps.len() == k_max as usize;
        parts.push(format!("{} (M = B/rho, alpha = 1/(2(A+MC))): max gap/bound {worst:.3e}, {bad} violations", method.name()));
    }
    Ok((passed, format!("{seeds} seeds, k = 1..{k_max}; {}", parts.join("; "))))
}

fn sweep_config(kind: ExperimentKind, preset: &SweepPreset, workers: usize, out_dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        problem: ProblemParams {
            n: preset.n,
            d: preset.d,
            cond: preset.cond,
            loss: LossName::Ols,
            spectrum: "rank-deficient".into(),
            label_noise: 0.1,
            seed: 1,
        },
        method: MethodParams {
            alpha_grid: preset.grid.clone(),
            cap: preset.cap,
            m: preset.m,
            outer: preset.outer,
            record_every: preset.record_every,
            eps: Some(0.01),
            ..Default::default()
        },
        seeds: SeedParams { count: preset.seeds, master: 2024 },
        out_dir: out_dir.to_path_buf(),
        workers,
    }
}

fn sweep_summary(config: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    match run_experiment(config)?.report {
        Report::Sweep { summary, .. } => Ok(summary),
        _ => Err(BenchError::config("sweep produced no summary")),
    }
}

fn stability(preset: &SweepPreset, workers: usize, scratch: &Path) -> Result<(bool, String)> {
    let config = sweep_config(ExperimentKind::SweepSapaSaga, preset, workers, &scratch.join("stability"));
    let cap = config.iteration_cap() as f64;
    let summary = sweep_summary(&config)?;
    let by = |m: Method| summary.iter().filter(|r| r.method == m).collect::<Vec<_>>();
    let (sapa, saga) = (by(Method::Sapa), by(Method::Saga));
    let mut small_ok = true;
    let mut small = Vec::new();
    for (a, g) in sapa.iter().zip(&saga).take(3) {
        let (x, y) = (a.median_cost, g.median_cost);
        let rel = (x - y).abs() / x.min(y);
        small_ok &= rel <= 0.2;
        small.push(format!("{:.3e}/L: {x} vs {y}", a.stepsize_l));
    }
    let witness = sapa.iter().zip(&saga).find(|(a, g)| g.median_cost >= cap && a.median_cost < cap);
    let reached_any = summary.iter().any(|r| r.reached > 0);
    let all_capped_small = sapa.iter().zip(&saga).take(3).all(|(a, g)| a.median_cost >= cap && g.median_cost >= cap);
    let detail = format!(
        "n={} d={} cond={} seeds={} cap={cap}; (a) smallest stepsizes SAPA vs SAGA medians [{}]{}; (b) {}; any run reached eps: {reached_any}",
        preset.n,
        preset.d,
        preset.cond,
        preset.seeds,
        small.join(", "),
        if all_capped_small { " (all capped)" } else { "" },
        match witness {
            Some((a, _)) => format!("at {:.3e}/L SAGA capped and SAPA median {}", a.stepsize_l, a.median_cost),
            None => "no stepsize with SAGA at cap and SAPA converged".into(),
        }
    );
    Ok((small_ok && witness.is_some(), detail))
}

fn tuned_comparison(preset: &SweepPreset, workers: usize, scratch: &Path) -> Result<(bool, String)> {
    let attempt = |seeds: u64| -> Result<(bool, String)> {
        let mut preset = preset.clone();
        preset.seeds = seeds;
        let config = sweep_config(ExperimentKind::SweepSvrpSvrg, &preset, workers, &scratch.join(format!("tuned-{seeds}")));
        let summary = sweep_summary(&config)?;
        let (Some(p), Some(g)) = (best_tuned(&summary, Method::Svrp), best_tuned(&summary, Method::Svrg)) else {
            return Ok((false, "empty sweep".into()));
        };
        let reached = summary.iter().filter(|r| r.reached > 0).count();
        Ok((
            p.median_cost <= g.median_cost,
            format!(
                "n={} d={} cond={} seeds={seeds}: best SVRP median {} at {:.3e}/L, best SVRG median {} at {:.3e}/L; {reached} (stepsize, method) cells reached eps",
                preset.n, preset.d, preset.cond, p.median_cost, p.stepsize_l, g.median_cost, g.stepsize_l
            ),
        ))
    };
    let (ok, detail) = attempt(preset.seeds)?;
    if ok {
        return Ok((ok, detail));
    }
    let (ok3, detail3) = attempt(3 * preset.seeds)?;
    Ok((ok3, format!("{detail}; rerun with 3x seeds: {detail3}")))
}

/// Tiny versions of the three experiments, each re-run from its manifest.
pub fn determinism_configs(workers: usize, root: &Path) -> Vec<ExperimentConfig> {
    let problem = ProblemParams { n: 40, d: 12, cond: 10.0, loss: LossName::Ols, spectrum: "rank-deficient".into(), label_noise: 0.1, seed: 3 };
    let grid = Some(vec![0.05, 0.5, 5.0]);
    let base = |kind: ExperimentKind, method: MethodParams| ExperimentConfig {
        kind,
        problem: problem.clone(),
        method,
        seeds: SeedParams { count: 3, master: 99 },
        out_dir: root.join(kind.name()),
        workers,
    };
    vec![
        base(ExperimentKind::CompareProx, MethodParams { outer: Some(4), ..Default::default() }),
        base(ExperimentKind::SweepSapaSaga, MethodParams { alpha_grid: grid.clone(), cap: Some(4000), record_every: Some(10), ..Default::default() }),
        base(ExperimentKind::SweepSvrpSvrg, MethodParams { alpha_grid: grid, m: Some(40), outer: Some(10), ..Default::default() }),
    ]
}

fn determinism(workers: usize, scratch: &Path) -> Result<(bool, String)> {
    let mut parts = Vec::new();
    let mut passed = true;
    for (idx, cfg) in determinism_configs(workers, &scratch.join("determinism")).into_iter().enumerate() {
        let first = run_experiment(&cfg)?;
        // Replay with a different worker count: results must not depend on scheduling.
        let mut manifest = first.manifest.clone();
        manifest.config.workers = if workers > 1 { 1 } else { 2 };
        let replay_dir = scratch.join("determinism").join(format!("replay-{idx}"));
        crate::io::create_dir(&replay_dir)?;
        let manifest_path = replay_dir.join("source-manifest.json");
        write_string(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
        let (_, mismatched) = replay(&manifest_path, &replay_dir.join("out"))?;
        passed &= mismatched.is_empty() && !first.manifest.artifacts.is_empty();
        parts.push(format!("{}: {} artifacts, {} mismatched", cfg.kind.name(), first.manifest.artifacts.len(), mismatched.len()));
    }
    Ok((passed, parts.join("; ")))
}

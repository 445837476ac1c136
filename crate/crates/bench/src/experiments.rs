//! The comparison and stepsize-sweep protocols.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use proxvr_core::diagnostics::{reference_optimum, ReferenceSolution};
use proxvr_core::methods::{MethodSpec, SapaConfig, Seed, SppaConfig, StepSchedule, SvrpConfig};
use proxvr_core::synthetic::{generate_instance, SyntheticInstance};
use proxvr_core::trace::{Cadence, Method, RunStatus, RunTrace, TraceOptions};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::io::{create_dir, fmt_f64, write_csv, GeneratorMeta};
use crate::manifest::{ExperimentManifest, ManifestStatus, RunSeed};
use crate::stats::{mean_and_sample_std, median};

pub const CURVES_FILE: &str = "curves.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub const REFERENCE_TOL: f64 = 1e-10;
const DEFAULT_STAGES: u64 = 20;
const DEFAULT_ALPHA_L: f64 = 0.2;
const SPPA_EXPONENT: f64 = 0.55;

fn epoch() -> &'static Instant {
    static EPOCH: OnceLock<Instant> = OnceLock::new();
    EPOCH.get_or_init(Instant::now)
}

/// Nanoseconds since the first call; used only for the secondary wall-time column.
pub fn monotonic_ns() -> u64 {
    epoch().elapsed().as_nanos() as u64
}

/// A generated problem with its reference optimum.
pub struct Prepared {
    pub instance: SyntheticInstance,
    pub reference: ReferenceSolution,
    pub l: f64,
    pub meta: GeneratorMeta,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let instance = generate_instance(&config.problem.generator()?)?;
    let reference = reference_optimum(&instance.problem, REFERENCE_TOL)?;
    let l = instance.problem.smoothness_constant();
    let meta = GeneratorMeta::from_instance(&instance);
    Ok(Prepared { instance, reference, l, meta })
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

#[derive(Debug, Clone)]
struct Job {
    spec: MethodSpec,
    stepsize: Option<f64>,
    /// Position of the stepsize in the grid, if any.
    grid_index: usize,
    seed_index: u64,
    cadence: Option<Cadence>,
    stop_gap: Option<f64>,
}

struct Finished {
    job: Job,
    trace: RunTrace,
}

fn run_jobs(prepared: &Prepared, config: &ExperimentConfig, jobs: Vec<Job>) -> Result<Vec<Finished>> {
    let problem = &prepared.instance.problem;
    let x0 = vec![0.0; problem.d()];
    let master = config.seeds.master;
    let pool = thread_pool(config.workers)?;
    let results: Vec<Result<Finished>> = pool.install(|| {
        jobs.into_par_iter()
            .map(|job| {
                let mut opts = TraceOptions::new(prepared.reference.fstar);
                opts.cadence = job.cadence;
                opts.stop_gap = job.stop_gap;
                opts.clock = Some(monotonic_ns);
                let trace = job.spec.run(problem, &x0, Seed::new(master, job.seed_index), &opts)?;
                Ok(Finished { job, trace })
            })
            .collect()
    });
    results.into_iter().collect()
}

fn run_seeds(config: &ExperimentConfig, jobs: &[Job]) -> Vec<RunSeed> {
    jobs.iter()
        .map(|j| RunSeed {
            method: j.spec.method().name().to_string(),
            stepsize: j.stepsize,
            seed_index: j.seed_index,
            master: config.seeds.master,
            stream: j.seed_index,
        })
        .collect()
}

/// Result of one experiment: where things went and what they contain.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: ExperimentManifest,
    pub report: Report,
}

#[derive(Debug, Clone)]
pub enum Report {
    Curves(Vec<CurveRow>),
    Sweep { rows: Vec<SweepRow>, summary: Vec<SummaryRow> },
    Verify(Vec<crate::verify::CriterionResult>),
}

/// Runs `config` and writes its artifacts and manifest into `config.out_dir`.
///
/// On failure a manifest with status `failed` is still written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    let started = Instant::now();
    let out_dir = config.out_dir.clone();
    create_dir(&out_dir)?;
    let mut manifest = ExperimentManifest::new(config);
    let result = match config.kind {
        ExperimentKind::CompareProx => compare_prox(config, &out_dir, &mut manifest),
        ExperimentKind::SweepSapaSaga => sweep_sapa_saga(config, &out_dir, &mut manifest),
        ExperimentKind::SweepSvrpSvrg => sweep_svrp_svrg(config, &out_dir, &mut manifest),
        ExperimentKind::Verify => crate::verify::verify_experiment(config, &out_dir, &mut manifest),
    };
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    match result {
        Ok(report) => {
            manifest.write(&out_dir)?;
            Ok(Outcome { out_dir, manifest, report })
        }
        Err(e) => {
            manifest.status = ManifestStatus::Failed;
            manifest.error = Some(e.to_string());
            let _ = manifest.write(&out_dir);
            Err(e)
        }
    }
}

/// Re-runs the experiment recorded in a manifest into `out_dir` and returns
/// the artifacts whose hashes differ.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    let recorded = ExperimentManifest::load(manifest_path)?;
    let mut config = recorded.config.clone();
    config.out_dir = out_dir.to_path_buf();
    let outcome = run_experiment(&config)?;
    let mut mismatched = Vec::new();
    for a in &recorded.artifacts {
        match outcome.manifest.artifacts.iter().find(|b| b.path == a.path) {
            Some(b) if b.sha256 == a.sha256 => {}
            _ => mismatched.push(a.path.clone()),
        }
    }
    Ok((outcome, mismatched))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub stage: u64,
    pub method: Method,
    pub mean_gap: f64,
    pub dev_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub runs: usize,
}

/// Gap at each normalized stage `⌊calls / unit⌋`, keeping the last record per stage.
pub fn stage_gaps(trace: &RunTrace, unit: u64, stages: u64) -> Vec<Option<f64>> {
    let mut out = vec![None; stages as usize + 1];
    for r in &trace.records {
        let s = if trace.method == Method::Svrp || trace.method == Method::Svrg { r.counter } else { r.oracle_calls / unit };
        if s <= stages {
            out[s as usize] = Some(r.fgap);
        }
    }
    out
}

fn compare_prox(config: &ExperimentConfig, out_dir: &Path, manifest: &mut ExperimentManifest) -> Result<Report> {
    let prepared = prepare(config)?;
    manifest.generator = Some(prepared.meta.clone());
    let n = prepared.instance.problem.n() as u64;
    let m = config.inner_m();
    let stages = config.method.outer.unwrap_or(DEFAULT_STAGES);
    let unit = m + n + 1;
    let budget = stages * unit;
    let alpha = config.method.alpha.unwrap_or(DEFAULT_ALPHA_L) / prepared.l;
    let schedule = StepSchedule::PolynomialDecay {
        c: config.method.sppa_c.unwrap_or(1.0),
        exponent: config.method.sppa_exponent.unwrap_or(SPPA_EXPONENT),
    };
    let outer_mode = config.outer_mode()?;
    let mut jobs = Vec::new();
    for j in 0..config.seeds.count {
        let base = Job { spec: MethodSpec::Sppa(SppaConfig { schedule, iterations: budget }), stepsize: None, grid_index: 0, seed_index: j, cadence: Some(Cadence::OracleCalls(unit)), stop_gap: None };
        jobs.push(base.clone());
        jobs.push(Job { spec: MethodSpec::Svrp(SvrpConfig { alpha, m, outer: stages, outer_mode }), stepsize: Some(alpha), cadence: None, ..base.clone() });
        jobs.push(Job { spec: MethodSpec::Sapa(SapaConfig { alpha, iterations: budget.saturating_sub(n) }), stepsize: Some(alpha), ..base });
    }
    manifest.runs = run_seeds(config, &jobs);
    let finished = run_jobs(&prepared, config, jobs)?;

    let mut run_rows = Vec::new();
    let mut curves = Vec::new();
    for method in [Method::Sppa, Method::Svrp, Method::Sapa] {
        let per_run: Vec<(u64, Vec<Option<f64>>)> = finished
            .iter()
            .filter(|f| f.trace.method == method)
            .map(|f| (f.job.seed_index, stage_gaps(&f.trace, unit, stages)))
            .collect();
        for (seed, gaps) in &per_run {
            for (s, g) in gaps.iter().enumerate() {
                if let Some(g) = g {
                    run_rows.push(vec![method.name().to_string(), seed.to_string(), s.to_string(), fmt_f64(*g)]);
                }
            }
        }
        for s in 0..=stages as usize {
            let values: Vec<f64> = per_run.iter().filter_map(|(_, g)| g[s]).collect();
            if values.is_empty() {
                continue;
            }
            let (mean, dev) = mean_and_sample_std(&values);
            curves.push(CurveRow {
                stage: s as u64,
                method,
                mean_gap: mean,
                dev_gap: dev,
                min_gap: values.iter().copied().fold(f64::INFINITY, f64::min),
                max_gap: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                runs: values.len(),
            });
        }
    }
    let curve_rows: Vec<Vec<String>> = curves
        .iter()
        .map(|c| {
            vec![
                c.stage.to_string(),
                c.method.name().to_string(),
                fmt_f64(c.mean_gap),
                fmt_f64(c.dev_gap),
                fmt_f64(c.min_gap),
                fmt_f64(c.max_gap),
                c.runs.to_string(),
            ]
        })
        .collect();
    let curves_path = out_dir.join(CURVES_FILE);
    write_csv(&curves_path, &["stage", "method", "mean_gap", "dev_gap", "min_gap", "max_gap", "runs"], &curve_rows)?;
    let runs_path = out_dir.join(RUNS_FILE);
    write_csv(&runs_path, &["method", "seed", "stage", "gap"], &run_rows)?;
    manifest.add_artifact(out_dir, &curves_path)?;
    manifest.add_artifact(out_dir, &runs_path)?;
    Ok(Report::Curves(curves))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub stepsize: f64,
    pub stepsize_l: f64,
    pub method: Method,
    pub seed: u64,
    /// Iterations (table methods) or oracle calls (two-loop methods) to reach
    /// the target, or the cap.
    pub cost: u64,
    pub reached: bool,
    pub status: RunStatus,
    pub final_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub stepsize: f64,
    pub stepsize_l: f64,
    pub method: Method,
    pub median_cost: f64,
    pub reached: usize,
    pub runs: usize,
}

pub fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::TargetReached => "reached",
        RunStatus::CapReached => "cap",
        RunStatus::Diverged => "diverged",
    }
}

fn sweep_rows(finished: &[Finished], l: f64, cap: u64, oracle_cost: bool) -> Vec<SweepRow> {
    let mut rows: Vec<(usize, SweepRow)> = finished
        .iter()
        .map(|f| {
            let reached = f.trace.status == RunStatus::TargetReached;
            let last = f.trace.records.last();
            let cost = match (reached, last) {
                (true, Some(r)) if oracle_cost => r.oracle_calls,
                (true, Some(r)) => r.counter,
                _ => cap,
            };
            let stepsize = f.job.stepsize.unwrap_or(f64::NAN);
            let row = SweepRow {
                stepsize,
                stepsize_l: stepsize * l,
                method: f.trace.method,
                seed: f.job.seed_index,
                cost,
                reached,
                status: f.trace.status,
                final_gap: last.map_or(f64::NAN, |r| r.fgap),
            };
            (f.job.grid_index, row)
        })
        .collect();
    rows.sort_by(|a, b| (a.0, a.1.method, a.1.seed).cmp(&(b.0, b.1.method, b.1.seed)));
    rows.into_iter().map(|(_, r)| r).collect()
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].stepsize.to_bits() == rows[i].stepsize.to_bits() && rows[j].method == rows[i].method {
            j += 1;
        }
        let group = &rows[i..j];
        let costs: Vec<f64> = group.iter().map(|r| r.cost as f64).collect();
        out.push(SummaryRow {
            stepsize: rows[i].stepsize,
            stepsize_l: rows[i].stepsize_l,
            method: rows[i].method,
            median_cost: median(&costs),
            reached: group.iter().filter(|r| r.reached).count(),
            runs: group.len(),
        });
        i = j;
    }
    out
}

/// Smallest median cost of `method` over the grid, with its stepsize.
pub fn best_tuned(summary: &[SummaryRow], method: Method) -> Option<&SummaryRow> {
    summary
        .iter()
        .filter(|r| r.method == method)
        .min_by(|a, b| a.median_cost.total_cmp(&b.median_cost).then(a.stepsize.total_cmp(&b.stepsize)))
}

fn write_sweep(out_dir: &Path, manifest: &mut ExperimentManifest, rows: &[SweepRow], summary: &[SummaryRow], cost_name: &str) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.stepsize),
                fmt_f64(r.stepsize_l),
                r.method.name().to_string(),
                r.seed.to_string(),
                r.cost.to_string(),
                r.reached.to_string(),
                status_name(r.status).to_string(),
                fmt_f64(r.final_gap),
            ]
        })
        .collect();
    let sweep_path = out_dir.join(SWEEP_FILE);
    write_csv(&sweep_path, &["stepsize", "stepsize_l", "method", "seed", cost_name, "reached", "status", "final_gap"], &body)?;
    let body: Vec<Vec<String>> = summary
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.stepsize),
                fmt_f64(r.stepsize_l),
                r.method.name().to_string(),
                fmt_f64(r.median_cost),
                r.reached.to_string(),
                r.runs.to_string(),
            ]
        })
        .collect();
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_csv(&summary_path, &["stepsize", "stepsize_l", "method", "median", "reached", "runs"], &body)?;
    manifest.add_artifact(out_dir, &sweep_path)?;
    manifest.add_artifact(out_dir, &summary_path)?;
    Ok(())
}

fn sweep_sapa_saga(config: &ExperimentConfig, out_dir: &Path, manifest: &mut ExperimentManifest) -> Result<Report> {
    let prepared = prepare(config)?;
    manifest.generator = Some(prepared.meta.clone());
    let n = prepared.instance.problem.n() as u64;
    let cap = config.iteration_cap();
    let every = config.method.record_every.unwrap_or((n / 10).max(1));
    let eps = config.eps();
    let mut jobs = Vec::new();
    for (g, scale) in config.alpha_grid().into_iter().enumerate() {
        let alpha = scale / prepared.l;
        for j in 0..config.seeds.count {
            for spec in [MethodSpec::Sapa(SapaConfig { alpha, iterations: cap }), MethodSpec::Saga(SapaConfig { alpha, iterations: cap })] {
                jobs.push(Job { spec, stepsize: Some(alpha), grid_index: g, seed_index: j, cadence: Some(Cadence::Iterations(every)), stop_gap: Some(eps) });
            }
        }
    }
    manifest.runs = run_seeds(config, &jobs);
    let finished = run_jobs(&prepared, config, jobs)?;
    let rows = sweep_rows(&finished, prepared.l, cap, false);
    let summary = summarize(&rows);
    write_sweep(out_dir, manifest, &rows, &summary, "iters_or_cap")?;
    Ok(Report::Sweep { rows, summary })
}

fn sweep_svrp_svrg(config: &ExperimentConfig, out_dir: &Path, manifest: &mut ExperimentManifest) -> Result<Report> {
    let prepared = prepare(config)?;
    manifest.generator = Some(prepared.meta.clone());
    let n = prepared.instance.problem.n() as u64;
    let m = config.inner_m();
    let unit = m + n + 1;
    let outer = match config.method.cap {
        Some(cap) => (cap / unit).max(1),
        None => config.method.outer.unwrap_or(DEFAULT_STAGES),
    };
    let budget = outer * unit;
    let eps = config.eps();
    let outer_mode = config.outer_mode()?;
    let mut jobs = Vec::new();
    for (g, scale) in config.alpha_grid().into_iter().enumerate() {
        let alpha = scale / prepared.l;
        let c = SvrpConfig { alpha, m, outer, outer_mode };
        for j in 0..config.seeds.count {
            for spec in [MethodSpec::Svrp(c), MethodSpec::Svrg(c)] {
                jobs.push(Job { spec, stepsize: Some(alpha), grid_index: g, seed_index: j, cadence: None, stop_gap: Some(eps) });
            }
        }
    }
    manifest.runs = run_seeds(config, &jobs);
    let finished = run_jobs(&prepared, config, jobs)?;
    let rows = sweep_rows(&finished, prepared.l, budget, true);
    let summary = summarize(&rows);
    write_sweep(out_dir, manifest, &rows, &summary, "oracle_calls_or_cap")?;
    Ok(Report::Sweep { rows, summary })
}

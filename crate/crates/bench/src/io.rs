//! Problem directories, CSV number formatting and artifact hashing.

use std::fs;
use std::path::{Path, PathBuf};

use proxvr_core::synthetic::SyntheticInstance;
use proxvr_core::{FiniteSumProblem, LossKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

/// Seventeen significant digits in scientific notation; round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| BenchError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| BenchError::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Writes a header and rows; every row must match the header width.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub loss_kind: String,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorMeta>,
}

/// Realized generator parameters, as recorded next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub kappa: f64,
    pub kappa_sq: f64,
    pub spectrum: String,
    pub label_noise: f64,
    pub seed: u64,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_nonzero: f64,
    pub mu: f64,
    pub l: f64,
    pub l_full: f64,
}

impl GeneratorMeta {
    pub fn from_instance(inst: &SyntheticInstance) -> Self {
        Self {
            kappa: inst.config.cond,
            kappa_sq: inst.config.cond * inst.config.cond,
            spectrum: inst.config.spectrum.name().to_string(),
            label_noise: inst.config.label_noise,
            seed: inst.config.seed,
            rank: inst.meta.rank,
            sigma_max: inst.meta.sigma_max,
            sigma_min_nonzero: inst.meta.sigma_min_nonzero,
            mu: inst.meta.mu,
            l: inst.problem.smoothness_constant(),
            l_full: inst.meta.l_full,
        }
    }
}

pub const DESIGN_FILE: &str = "design.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.json";

fn loss_from_name(s: &str) -> Option<LossKind> {
    match s {
        "ols" => Some(LossKind::SquaredResidual),
        "logistic" => Some(LossKind::Logistic),
        _ => None,
    }
}

/// Writes `design.csv`, `labels.csv` and `meta.json` into `dir`.
pub fn write_problem_dir(dir: &Path, problem: &FiniteSumProblem, generator: Option<GeneratorMeta>) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let design = dir.join(DESIGN_FILE);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&design)?;
    for i in 0..problem.n() {
        w.write_record(problem.row(i).iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush().map_err(|e| BenchError::io(&design, e))?;
    let labels = dir.join(LABELS_FILE);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&labels)?;
    for b in problem.labels() {
        w.write_record([fmt_f64(*b)])?;
    }
    w.flush().map_err(|e| BenchError::io(&labels, e))?;
    let meta = ProblemMeta { loss_kind: problem.loss().name().to_string(), n: problem.n(), d: problem.d(), generator };
    let meta_path = dir.join(META_FILE);
    write_string(&meta_path, &serde_json::to_string_pretty(&meta)?)?;
    Ok(vec![design, labels, meta_path])
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| BenchError::Format { path: path.into(), reason: format!("unparsable number on line {}", line + 1) })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_problem_dir(dir: &Path) -> Result<(FiniteSumProblem, ProblemMeta)> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| BenchError::io(&meta_path, e))?;
    let meta: ProblemMeta = serde_json::from_str(&text)?;
    let loss = loss_from_name(&meta.loss_kind)
        .ok_or_else(|| BenchError::Format { path: meta_path.clone(), reason: format!("unknown loss_kind '{}'", meta.loss_kind) })?;
    let design_path = dir.join(DESIGN_FILE);
    let rows = read_matrix(&design_path)?;
    if rows.len() != meta.n || rows.iter().any(|r| r.len() != meta.d) {
        return Err(BenchError::Format { path: design_path, reason: format!("expected {} rows of {} values", meta.n, meta.d) });
    }
    let labels_path = dir.join(LABELS_FILE);
    let labels = read_matrix(&labels_path)?;
    if labels.len() != meta.n || labels.iter().any(|r| r.len() != 1) {
        return Err(BenchError::Format { path: labels_path, reason: format!("expected {} single-value rows", meta.n) });
    }
    let design = rows.into_iter().flatten().collect();
    let labels = labels.into_iter().flatten().collect();
    let problem = FiniteSumProblem::new(design, meta.n, meta.d, labels, loss)?;
    Ok((problem, meta))
}

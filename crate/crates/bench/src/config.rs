//! Experiment configuration: a TOML document plus command-line overrides.

use std::path::{Path, PathBuf};

use proxvr_core::methods::OuterMode;
use proxvr_core::synthetic::{GeneratorConfig, Spectrum};
use proxvr_core::LossKind;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CompareProx,
    SweepSapaSaga,
    SweepSvrpSvrg,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CompareProx => "compare-prox",
            ExperimentKind::SweepSapaSaga => "sweep-sapa-saga",
            ExperimentKind::SweepSvrpSvrg => "sweep-svrp-svrg",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    Ols,
    Logistic,
}

impl From<LossName> for LossKind {
    fn from(l: LossName) -> Self {
        match l {
            LossName::Ols => LossKind::SquaredResidual,
            LossName::Logistic => LossKind::Logistic,
        }
    }
}

impl std::str::FromStr for LossName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "squared" | "least-squares" => Ok(LossName::Ols),
            "logistic" => Ok(LossName::Logistic),
            _ => Err(format!("unknown loss '{s}' (expected ols or logistic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub n: usize,
    pub d: usize,
    /// Ratio of the extreme nonzero singular values of `A`.
    pub cond: f64,
    pub loss: LossName,
    #[serde(default = "default_spectrum")]
    pub spectrum: String,
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    /// Seed of the data generator.
    #[serde(default = "default_data_seed")]
    pub seed: u64,
}

fn default_spectrum() -> String {
    Spectrum::RankDeficient.name().to_string()
}

fn default_label_noise() -> f64 {
    0.1
}

fn default_data_seed() -> u64 {
    1
}

impl ProblemParams {
    pub fn generator(&self) -> Result<GeneratorConfig> {
        let spectrum = Spectrum::from_name(&self.spectrum)
            .ok_or_else(|| BenchError::config(format!("unknown spectrum '{}'", self.spectrum)))?;
        let mut g = GeneratorConfig::new(self.n, self.d, self.cond, self.loss.into(), self.seed);
        g.spectrum = spectrum;
        g.label_noise = self.label_noise;
        g.validate().map_err(|e| BenchError::config(e.to_string()))?;
        Ok(g)
    }
}

/// Method parameters. Stepsizes are given in units of `1/L`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Explicit grid; when absent the default logarithmic grid is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    /// Inner iterations per stage; defaults to `2n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// Outer stages `S`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Iteration cap (table methods) or oracle-call budget (two-loop methods).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_mode: Option<String>,
    /// SPPA schedule `c / k^exponent`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sppa_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sppa_exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedParams {
    pub count: u64,
    pub master: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub problem: ProblemParams,
    #[serde(default)]
    pub method: MethodParams,
    pub seeds: SeedParams,
    pub out_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub const DEFAULT_EPS: f64 = 0.01;
pub const OLS_ITERATION_CAP: u64 = 40_000;
pub const LOGISTIC_ITERATION_CAP: u64 = 25_000_000;
pub const GRID_DECADE_POINTS: usize = 20;

/// `10^(j/20)` for `j` spanning `[10⁻³, 10]`, in units of `1/L`.
pub fn default_alpha_grid() -> Vec<f64> {
    let points = 4 * GRID_DECADE_POINTS;
    (0..=points).map(|j| 10f64.powf(-3.0 + j as f64 / GRID_DECADE_POINTS as f64)).collect()
}

/// Parses `lo:hi:per_decade` (log grid) or a comma-separated list.
pub fn parse_alpha_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| BenchError::config(format!("bad alpha grid '{s}': {what}"));
    if let Some((range, per)) = s.rsplit_once(':').filter(|_| s.matches(':').count() == 2) {
        let (lo, hi) = range.split_once(':').ok_or_else(|| bad("expected lo:hi:per_decade"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad("lo"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("hi"))?;
        let per: usize = per.trim().parse().map_err(|_| bad("per_decade"))?;
        if !(lo > 0.0 && hi > lo) || per == 0 {
            return Err(bad("need 0 < lo < hi and per_decade > 0"));
        }
        let (a, b) = (lo.log10(), hi.log10());
        let steps = ((b - a) * per as f64).round() as usize;
        return Ok((0..=steps).map(|j| 10f64.powf(a + (b - a) * j as f64 / steps.max(1) as f64)).collect());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad(t))).collect()
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Built-in defaults for each experiment, mirroring the shipped presets.
    pub fn preset(kind: ExperimentKind) -> Self {
        let problem = |n, d| ProblemParams {
            n,
            d,
            cond: 100.0,
            loss: LossName::Ols,
            spectrum: default_spectrum(),
            label_noise: default_label_noise(),
            seed: default_data_seed(),
        };
        let (problem, method, count) = match kind {
            ExperimentKind::CompareProx => (
                problem(1000, 500),
                MethodParams { alpha: Some(0.2), outer: Some(20), ..Default::default() },
                10,
            ),
            ExperimentKind::SweepSapaSaga => (
                problem(1000, 500),
                MethodParams { cap: Some(OLS_ITERATION_CAP), eps: Some(DEFAULT_EPS), record_every: Some(100), ..Default::default() },
                5,
            ),
            ExperimentKind::SweepSvrpSvrg => (
                problem(500, 500),
                MethodParams { m: Some(250), outer: Some(20), eps: Some(DEFAULT_EPS), ..Default::default() },
                5,
            ),
            ExperimentKind::Verify => (problem(50, 10), MethodParams::default(), 5),
        };
        Self {
            kind,
            problem,
            method,
            seeds: SeedParams { count, master: 2024 },
            out_dir: PathBuf::from(format!("out/{}", kind.name())),
            workers: default_workers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.generator()?;
        if self.seeds.count == 0 {
            return Err(BenchError::config("seed count must be positive"));
        }
        if self.workers == 0 {
            return Err(BenchError::config("workers must be positive"));
        }
        let m = &self.method;
        if let Some(a) = m.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(BenchError::config("alpha must be positive"));
            }
        }
        if let Some(grid) = &m.alpha_grid {
            if grid.is_empty() {
                return Err(BenchError::config("alpha grid is empty"));
            }
            if !grid.iter().all(|a| *a > 0.0 && a.is_finite()) {
                return Err(BenchError::config("alpha grid entries must be positive"));
            }
            if !grid.windows(2).all(|w| w[0] < w[1]) {
                return Err(BenchError::config("alpha grid must be strictly increasing"));
            }
        }
        if let Some(p) = m.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(BenchError::config("p must lie in (0, 1]"));
            }
        }
        if let Some(eps) = m.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(BenchError::config("eps must be positive"));
            }
        }
        for (name, v) in [("m", m.m), ("outer", m.outer), ("cap", m.cap), ("record_every", m.record_every)] {
            if v == Some(0) {
                return Err(BenchError::config(format!("{name} must be positive")));
            }
        }
        if let Some(c) = m.sppa_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(BenchError::config("sppa_c must be positive"));
            }
        }
        if let Some(e) = m.sppa_exponent {
            if !(e > 0.5 && e <= 1.0) {
                return Err(BenchError::config("sppa_exponent must lie in (0.5, 1]"));
            }
        }
        self.outer_mode()?;
        Ok(())
    }

    pub fn outer_mode(&self) -> Result<OuterMode> {
        match &self.method.outer_mode {
            None => Ok(OuterMode::RandomInner),
            Some(s) => OuterMode::from_name(s).ok_or_else(|| BenchError::config(format!("unknown outer mode '{s}'"))),
        }
    }

    pub fn inner_m(&self) -> u64 {
        self.method.m.unwrap_or(2 * self.problem.n as u64)
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        self.method.alpha_grid.clone().unwrap_or_else(default_alpha_grid)
    }

    pub fn eps(&self) -> f64 {
        self.method.eps.unwrap_or(DEFAULT_EPS)
    }

    pub fn iteration_cap(&self) -> u64 {
        self.method.cap.unwrap_or(match self.problem.loss {
            LossName::Ols => OLS_ITERATION_CAP,
            LossName::Logistic => LOGISTIC_ITERATION_CAP,
        })
    }
}

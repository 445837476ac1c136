//! Synthetic least-squares and logistic instances with a prescribed
//! singular-value spread.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, ThinSvd};
use crate::problem::{FiniteSumProblem, LossKind};
use crate::rng::RunRng;

const MATRIX_STREAM: u64 = 0;
const TRUTH_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Shape of the rescaled spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spectrum {
    /// Smallest singular value set to zero; the others mapped onto `[1, κ]`.
    RankDeficient,
    /// All singular values mapped onto `[1, κ]`.
    FullRank,
}

impl Spectrum {
    pub fn name(self) -> &'static str {
        match self {
            Spectrum::RankDeficient => "rank-deficient",
            Spectrum::FullRank => "full-rank",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "rank-deficient" => Some(Spectrum::RankDeficient),
            "full-rank" => Some(Spectrum::FullRank),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub d: usize,
    /// Ratio of the extreme nonzero singular values of `A`.
    pub cond: f64,
    pub loss: LossKind,
    /// Label flip probability (logistic only).
    pub label_noise: f64,
    pub seed: u64,
    pub spectrum: Spectrum,
}

impl GeneratorConfig {
    pub fn new(n: usize, d: usize, cond: f64, loss: LossKind, seed: u64) -> Self {
        Self { n, d, cond, loss, label_noise: 0.1, seed, spectrum: Spectrum::RankDeficient }
    }

    pub fn full_rank(mut self) -> Self {
        self.spectrum = Spectrum::FullRank;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d < 2 {
            return Err(Error::InvalidParameter("generator needs n >= 2 and d >= 2"));
        }
        if !(self.cond > 1.0 && self.cond.is_finite()) {
            return Err(Error::InvalidParameter("condition parameter must exceed 1"));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::InvalidParameter("label noise must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Realized properties of a generated design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMeta {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    pub sigma_min_nonzero: f64,
    /// `σ_min_nonzero² / n`: PL constant of the least-squares objective.
    pub mu: f64,
    /// `σ_max² / n`: smoothness constant of the full least-squares objective.
    pub l_full: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub problem: FiniteSumProblem,
    pub x_true: Vec<f64>,
    pub meta: DesignMeta,
    pub config: GeneratorConfig,
}

fn rescale(s: &[f64], cond: f64, spectrum: Spectrum) -> Vec<f64> {
    let r = s.len();
    let kept = match spectrum {
        Spectrum::RankDeficient => r - 1,
        Spectrum::FullRank => r,
    };
    let hi = s[0];
    let lo = s[kept - 1];
    let mut out = vec![0.0; r];
    for j in 0..kept {
        out[j] = if hi > lo { 1.0 + (s[j] - lo) * (cond - 1.0) / (hi - lo) } else { 1.0 };
    }
    out[0] = cond;
    out
}

/// Gaussian matrix with its spectrum rescaled: largest singular value `κ`,
/// smallest kept value `1`, and (for [`Spectrum::RankDeficient`]) the
/// smallest value set to zero. Row-major `n × d`.
pub fn generate_conditioned_matrix(n: usize, d: usize, cond: f64, seed: u64, spectrum: Spectrum) -> Result<(Vec<f64>, DesignMeta)> {
    if n.min(d) < 2 {
        return Err(Error::InvalidParameter("generator needs min(n, d) >= 2"));
    }
    if !(cond > 1.0 && cond.is_finite()) {
        return Err(Error::InvalidParameter("condition parameter must exceed 1"));
    }
    let mut rng = RunRng::new(seed, MATRIX_STREAM);
    let m: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
    let svd = ThinSvd::new(&m, n, d);
    let s = rescale(&svd.singular_values, cond, spectrum);
    let a = svd.recompose(&s);
    let rank = s.iter().filter(|v| **v > 0.0).count();
    let sigma_min_nonzero = s[rank - 1];
    let meta = DesignMeta {
        rank,
        sigma_max: s[0],
        sigma_min_nonzero,
        mu: sigma_min_nonzero * sigma_min_nonzero / n as f64,
        l_full: s[0] * s[0] / n as f64,
        singular_values: s,
    };
    Ok((a, meta))
}

fn planted_truth(cfg: &GeneratorConfig) -> Vec<f64> {
    let mut rng = RunRng::new(cfg.seed, TRUTH_STREAM);
    (0..cfg.d).map(|_| rng.standard_normal()).collect()
}

/// Noiseless least squares: `b = A x_true`.
pub fn generate_ols_instance(cfg: &GeneratorConfig) -> Result<SyntheticInstance> {
    cfg.validate()?;
    let (a, meta) = generate_conditioned_matrix(cfg.n, cfg.d, cfg.cond, cfg.seed, cfg.spectrum)?;
    let x_true = planted_truth(cfg);
    let b: Vec<f64> = a.chunks_exact(cfg.d).map(|row| dot(row, &x_true)).collect();
    let problem = FiniteSumProblem::new(a, cfg.n, cfg.d, b, LossKind::SquaredResidual)?;
    Ok(SyntheticInstance { problem, x_true, meta, config: *cfg })
}

/// Planted logistic model: `b_i = sign⟨a_i, x_true⟩` (zero maps to `+1`),
/// each label flipped independently with probability `label_noise`.
pub fn generate_logistic_instance(cfg: &GeneratorConfig) -> Result<SyntheticInstance> {
    cfg.validate()?;
    let (a, meta) = generate_conditioned_matrix(cfg.n, cfg.d, cfg.cond, cfg.seed, cfg.spectrum)?;
    let x_true = planted_truth(cfg);
    let mut rng = RunRng::new(cfg.seed, NOISE_STREAM);
    let b: Vec<f64> = a
        .chunks_exact(cfg.d)
        .map(|row| {
            let label = if dot(row, &x_true) >= 0.0 { 1.0 } else { -1.0 };
            if rng.uniform01() < cfg.label_noise { -label } else { label }
        })
        .collect();
    let problem = FiniteSumProblem::new(a, cfg.n, cfg.d, b, LossKind::Logistic)?;
    Ok(SyntheticInstance { problem, x_true, meta, config: *cfg })
}

pub fn generate_instance(cfg: &GeneratorConfig) -> Result<SyntheticInstance> {
    match cfg.loss {
        LossKind::SquaredResidual => generate_ols_instance(cfg),
        LossKind::Logistic => generate_logistic_instance(cfg),
    }
}

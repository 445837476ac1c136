use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// Geometric rate `q̂` fitted to a gap sequence: `exp` of the least-squares
/// slope of `ln(gap_k)` against `k`, after discarding `burn_in` entries
/// (default: 10% of the series).
pub fn empirical_rate(gaps: &[f64], burn_in: Option<usize>) -> Result<f64> {
    let burn = burn_in.unwrap_or(gaps.len() / 10);
    if gaps.len() < burn + 10 {
        return Err(Error::Undefined("need at least ten gaps after burn-in"));
    }
    let tail = &gaps[burn..];
    if tail.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::Undefined("gaps must be positive and finite after burn-in"));
    }
    let m = tail.len() as f64;
    let mean_k = (m - 1.0) / 2.0;
    let logs: Vec<f64> = tail.iter().map(|g| libm::log(*g)).collect();
    let mean_y = logs.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in logs.iter().enumerate() {
        let dx = k as f64 - mean_k;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    Ok(libm::exp(sxy / sxx))
}

/// Outcome of a target-accuracy query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accuracy {
    /// First recorded point at or below the target.
    Reached { counter: u64, oracle_calls: u64 },
    CapReached,
}

impl Accuracy {
    pub fn oracle_calls(self) -> Option<u64> {
        match self {
            Accuracy::Reached { oracle_calls, .. } => Some(oracle_calls),
            Accuracy::CapReached => None,
        }
    }

    pub fn counter(self) -> Option<u64> {
        match self {
            Accuracy::Reached { counter, .. } => Some(counter),
            Accuracy::CapReached => None,
        }
    }
}

/// First record with `F(x) − F_* ≤ eps`.
pub fn iterations_to_accuracy(trace: &RunTrace, eps: f64) -> Accuracy {
    trace
        .records
        .iter()
        .find(|r| r.fgap <= eps)
        .map_or(Accuracy::CapReached, |r| Accuracy::Reached { counter: r.counter, oracle_calls: r.oracle_calls })
}

/// Convex combination `Σ w_t x^t / Σ w_t` of the iterates stored in `trace`.
pub fn weighted_average_iterate(trace: &RunTrace, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != trace.records.len() {
        return Err(Error::DimensionMismatch { expected: trace.records.len(), got: weights.len() });
    }
    let iterates = trace
        .records
        .iter()
        .map(|r| r.x.as_deref())
        .collect::<Option<Vec<&[f64]>>>()
        .ok_or(Error::InvalidParameter("trace does not store iterates"))?;
    weighted_average(&iterates, weights)
}

pub fn weighted_average(iterates: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != iterates.len() {
        return Err(Error::DimensionMismatch { expected: iterates.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("weights must not all vanish"));
    }
    let d = iterates.first().map_or(0, |x| x.len());
    let mut out = vec![0.0; d];
    for (x, w) in iterates.iter().zip(weights) {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        for (o, xi) in out.iter_mut().zip(x.iter()) {
            *o += w / total * xi;
        }
    }
    Ok(out)
}

use crate::error::{Error, Result};

/// Stepsize sequence `α_k`, `k = 0, 1, …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `α_k = c / (k + 1)^exponent`
    PolynomialDecay { c: f64, exponent: f64 },
}

impl StepSchedule {
    #[inline]
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::PolynomialDecay { c, exponent } => c / libm::pow((k + 1) as f64, exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant(a) if a > 0.0 && a.is_finite() => Ok(()),
            StepSchedule::Constant(_) => Err(Error::InvalidParameter("constant stepsize must be positive")),
            StepSchedule::PolynomialDecay { c, exponent } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParameter("decay scale must be positive"));
                }
                if !(exponent > 0.5 && exponent <= 1.0) {
                    return Err(Error::InvalidParameter("decay exponent must lie in (0.5, 1]"));
                }
                Ok(())
            }
        }
    }
}

//! Finite-sum problems with linear-composite components.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq};

/// Scalar loss `φ(t; b)` applied to the margin `t = ⟨a_i, x⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `φ(t; b) = ½ (t − b)²`
    SquaredResidual,
    /// `φ(t; b) = log(1 + exp(−b t))`, `b ∈ {−1, +1}`
    Logistic,
}

impl LossKind {
    #[inline]
    pub fn value(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::SquaredResidual => 0.5 * (t - b) * (t - b),
            LossKind::Logistic => softplus(-b * t),
        }
    }

    /// `φ′(t; b)`
    #[inline]
    pub fn derivative(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::SquaredResidual => t - b,
            LossKind::Logistic => -b * sigmoid(-b * t),
        }
    }

    /// `φ″(t; b)`
    #[inline]
    pub fn second_derivative(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::SquaredResidual => 1.0,
            LossKind::Logistic => {
                let s = sigmoid(b * t);
                s * (1.0 - s)
            }
        }
    }

    /// Lipschitz constant of `φ′` in `t`.
    pub fn curvature_bound(self) -> f64 {
        match self {
            LossKind::SquaredResidual => 1.0,
            LossKind::Logistic => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::SquaredResidual => "ols",
            LossKind::Logistic => "logistic",
        }
    }
}

/// `log(1 + eᶻ)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// `1 / (1 + e⁻ᶻ)` without overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `F(x) = (1/n) Σ_i φ(⟨a_i, x⟩; b_i)` over a dense row-major design matrix.
///
/// Immutable after construction; the squared row norms are cached because
/// every prox and gradient step needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSumProblem {
    n: usize,
    d: usize,
    design: Vec<f64>,
    labels: Vec<f64>,
    loss: LossKind,
    row_norms_sq: Vec<f64>,
}

impl FiniteSumProblem {
    pub fn new(design: Vec<f64>, n: usize, d: usize, labels: Vec<f64>, loss: LossKind) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("n and d must be at least 1"));
        }
        if design.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: design.len() });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if !design.iter().chain(&labels).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("problem data"));
        }
        if loss == LossKind::Logistic {
            if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &b)| b != 1.0 && b != -1.0) {
                return Err(Error::InvalidLabel { row, label });
            }
        }
        let row_norms_sq = design.chunks_exact(d).map(norm_sq).collect();
        Ok(Self { n, d, design, labels, loss, row_norms_sq })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    #[inline]
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norms_sq[i]
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `⟨a_i, x⟩`, unchecked.
    #[inline]
    pub fn margin(&self, i: usize, x: &[f64]) -> f64 {
        dot(self.row(i), x)
    }

    /// `φ′(⟨a_i, x⟩; b_i)`: the scalar multiplying `a_i` in `∇f_i(x)`.
    #[inline]
    pub fn gradient_scale(&self, i: usize, x: &[f64]) -> f64 {
        self.loss.derivative(self.margin(i, x), self.labels[i])
    }

    /// `out += t · ∇f_i(x)`, unchecked.
    #[inline]
    pub fn add_gradient(&self, i: usize, x: &[f64], t: f64, out: &mut [f64]) {
        let g = self.gradient_scale(i, x);
        axpy(t * g, self.row(i), out);
    }

    pub fn validate_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(())
    }

    fn validate_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        Ok(())
    }

    /// `f_i(x) = φ(⟨a_i, x⟩; b_i)` (0-based `i`).
    pub fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.validate_index(i)?;
        self.validate_point(x)?;
        Ok(self.loss.value(self.margin(i, x), self.labels[i]))
    }

    /// `∇f_i(x) = φ′(⟨a_i, x⟩; b_i) · a_i`.
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.validate_index(i)?;
        self.validate_point(x)?;
        let mut g = vec![0.0; self.d];
        self.add_gradient(i, x, 1.0, &mut g);
        Ok(g)
    }

    pub fn full_value(&self, x: &[f64]) -> Result<f64> {
        self.validate_point(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate_point(x)?;
        let mut g = vec![0.0; self.d];
        self.full_gradient_into(x, &mut g);
        Ok(g)
    }

    /// `F(x)` without input validation; non-finite inputs propagate.
    pub fn value_unchecked(&self, x: &[f64]) -> f64 {
        let total: f64 = (0..self.n)
            .map(|i| self.loss.value(self.margin(i, x), self.labels[i]))
            .sum();
        total / self.n as f64
    }

    pub fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let w = 1.0 / self.n as f64;
        for i in 0..self.n {
            self.add_gradient(i, x, w, out);
        }
    }

    /// Uniform Lipschitz constant `L` of the component gradients:
    /// `φ″_max · max_i ‖a_i‖²`.
    pub fn smoothness_constant(&self) -> f64 {
        let max_row = self.row_norms_sq.iter().copied().fold(0.0, f64::max);
        self.loss.curvature_bound() * max_row
    }
}

//! Exact proximity operators of the component losses.
//!
//! For `f_i(x) = φ(⟨a_i, x⟩; b_i)` the rank-one composition rule reduces
//! `prox_{α f_i}` to a scalar prox of `φ` with parameter `λ = α ‖a_i‖²`:
//!
//! ```text
//! p = argmin_t φ(t; b) + (t − s)² / (2λ),   s = ⟨a_i, x⟩
//! prox_{α f_i}(x) = x − α φ′(p; b) a_i
//! ```
//!
//! The second line uses the scalar optimality condition `p − s = −λ φ′(p)`,
//! which avoids dividing by `‖a_i‖²`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::problem::{FiniteSumProblem, LossKind};

/// Root-finding tolerance used by the method runners.
pub const DEFAULT_PROX_TOL: f64 = 1e-12;

/// Iteration cap of the safeguarded Newton solve. The residual is strictly
/// increasing, so reaching it means the kernel is broken.
pub const MAX_PROX_ITERS: usize = 200;

/// One scalar prox problem `argmin_t φ(t; b) + (t − s)²/(2λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarProxQuery {
    pub s: f64,
    pub lambda: f64,
    pub b: f64,
    pub tol: f64,
}

impl ScalarProxQuery {
    pub fn new(s: f64, lambda: f64, b: f64) -> Self {
        Self { s, lambda, b, tol: DEFAULT_PROX_TOL }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("prox parameter lambda must be positive"));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-6) {
            return Err(Error::InvalidParameter("prox tolerance must lie in (0, 1e-6]"));
        }
        if !self.s.is_finite() || !self.b.is_finite() {
            return Err(Error::NonFinite("scalar prox input"));
        }
        Ok(())
    }

    pub fn solve(&self, loss: LossKind) -> Result<f64> {
        match loss {
            LossKind::SquaredResidual => scalar_prox_square(self.s, self.lambda, self.b),
            LossKind::Logistic => scalar_prox_logistic(self.s, self.lambda, self.b, self.tol),
        }
    }
}

/// `argmin_t ½(t − b)² + (t − s)²/(2λ) = (s + λ b)/(1 + λ)`.
pub fn scalar_prox_square(s: f64, lambda: f64, b: f64) -> Result<f64> {
    ScalarProxQuery::new(s, lambda, b).validate()?;
    Ok((s + lambda * b) / (1.0 + lambda))
}

/// Scalar prox of `t ↦ log(1 + exp(−b t))`.
///
/// Safeguarded Newton on `r(t) = t − s + λ φ′(t; b)`, which is strictly
/// increasing with `r′ ≥ 1`. Since `|φ′| < 1` the root lies in `[s − λ, s + λ]`;
/// any Newton step leaving the current bracket is replaced by bisection.
pub fn scalar_prox_logistic(s: f64, lambda: f64, b: f64, tol: f64) -> Result<f64> {
    ScalarProxQuery { s, lambda, b, tol }.validate()?;
    if b != 1.0 && b != -1.0 {
        return Err(Error::InvalidParameter("logistic label must be -1 or +1"));
    }
    Ok(logistic_root(s, lambda, b, tol)?)
}

fn logistic_root(s: f64, lambda: f64, b: f64, tol: f64) -> Result<f64> {
    let loss = LossKind::Logistic;
    let residual = |t: f64| t - s + lambda * loss.derivative(t, b);
    let (mut lo, mut hi) = (s - lambda, s + lambda);
    let mut t = s;
    let mut prev_step = hi - lo;
    for _ in 0..MAX_PROX_ITERS {
        let r = residual(t);
        if r.abs() <= tol {
            return Ok(t);
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = 1.0 + lambda * loss.second_derivative(t, b);
        let mut next = t - r / slope;
        // Bisect when Newton leaves the bracket or fails to halve the step.
        if !(next > lo && next < hi) || (next - t).abs() > 0.5 * prev_step {
            next = 0.5 * (lo + hi);
        }
        prev_step = (next - t).abs();
        // Bracket exhausted at working precision: t is as good as it gets.
        if next == t || next == lo || next == hi {
            return Ok(t);
        }
        t = next;
    }
    Err(Error::ProxNoConvergence(MAX_PROX_ITERS))
}

/// Multiplier `c` such that `prox_{α f_i}(x) = x + c · a_i`.
#[inline]
pub(crate) fn prox_shift(problem: &FiniteSumProblem, i: usize, alpha: f64, x: &[f64], tol: f64) -> Result<f64> {
    let nrm = problem.row_norm_sq(i);
    if nrm == 0.0 {
        return Ok(0.0);
    }
    let s = problem.margin(i, x);
    let b = problem.label(i);
    let lambda = alpha * nrm;
    match problem.loss() {
        LossKind::SquaredResidual => Ok(alpha * (b - s) / (1.0 + lambda)),
        LossKind::Logistic => {
            if !s.is_finite() {
                return Err(Error::NonFinite("prox input"));
            }
            let p = logistic_root(s, lambda, b, tol)?;
            Ok(-alpha * LossKind::Logistic.derivative(p, b))
        }
    }
}

/// In-place `x ← prox_{α f_i}(x)`.
#[inline]
pub fn prox_component_in_place(problem: &FiniteSumProblem, i: usize, alpha: f64, x: &mut [f64], tol: f64) -> Result<()> {
    let c = prox_shift(problem, i, alpha, x, tol)?;
    if c != 0.0 {
        axpy(c, problem.row(i), x);
    }
    Ok(())
}

/// `prox_{α f_i}(x) = argmin_y f_i(y) + ‖y − x‖²/(2α)`.
pub fn prox_component(problem: &FiniteSumProblem, i: usize, alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
    prox_component_with_tol(problem, i, alpha, x, DEFAULT_PROX_TOL)
}

pub fn prox_component_with_tol(
    problem: &FiniteSumProblem,
    i: usize,
    alpha: f64,
    x: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter("stepsize alpha must be positive"));
    }
    if i >= problem.n() {
        return Err(Error::IndexOutOfRange { index: i, n: problem.n() });
    }
    problem.validate_point(x)?;
    let mut y = x.to_vec();
    prox_component_in_place(problem, i, alpha, &mut y, tol)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist_sq, norm_sq};
    use crate::rng::RunRng;
    use alloc::vec;
    use nalgebra::{DMatrix, DVector};

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        while (b - a).abs() > tol {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        0.5 * (a + b)
    }

    fn bisection_root(r: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if r(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Damped Newton on `f_i(y) + ‖y − x‖²/(2α)` in the full dimension.
    fn full_prox_oracle(p: &FiniteSumProblem, i: usize, alpha: f64, x: &[f64]) -> Vec<f64> {
        let d = p.d();
        let a = DVector::from_column_slice(p.row(i));
        let b = p.label(i);
        let loss = p.loss();
        let xv = DVector::from_column_slice(x);
        let obj = |y: &DVector<f64>| loss.value(a.dot(y), b) + (y - &xv).norm_squared() / (2.0 * alpha);
        let mut y = xv.clone();
        for _ in 0..100 {
            let t = a.dot(&y);
            let g = &a * loss.derivative(t, b) + (&y - &xv) / alpha;
            if g.norm() < 1e-15 {
                break;
            }
            let h = &a * a.transpose() * loss.second_derivative(t, b) + DMatrix::identity(d, d) / alpha;
            let step = h.cholesky().unwrap().solve(&g);
            let mut eta = 1.0;
            let f0 = obj(&y);
            while obj(&(&y - &step * eta)) > f0 - 1e-4 * eta * g.dot(&step) && eta > 1e-12 {
                eta *= 0.5;
            }
            y -= step * eta;
        }
        y.as_slice().to_vec()
    }

    #[test]
    fn square_examples() {
        assert_eq!(scalar_prox_square(0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(scalar_prox_square(2.0, 1.0, 0.0).unwrap(), 1.0);
        let oracle = golden_section(
            |t| 0.5 * (t + 2.0) * (t + 2.0) + (t - 1.3) * (t - 1.3) / (2.0 * 0.7),
            -10.0,
            10.0,
            1e-12,
        );
        let got = scalar_prox_square(1.3, 0.7, -2.0).unwrap();
        // Comparing objective values limits golden section to ~sqrt(eps).
        assert!((got - oracle).abs() < 1e-7);
        assert!((got + 0.1 / 1.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(scalar_prox_square(1.0, 0.0, 0.0).is_err());
        assert!(scalar_prox_square(1.0, -1.0, 0.0).is_err());
        assert!(scalar_prox_logistic(1.0, 0.0, 1.0, 1e-12).is_err());
        assert!(scalar_prox_logistic(1.0, 1.0, 0.5, 1e-12).is_err());
        assert!(scalar_prox_logistic(1.0, 1.0, 1.0, 1e-3).is_err());
        let p = FiniteSumProblem::new(vec![1.0, 2.0], 1, 2, vec![1.0], LossKind::Logistic).unwrap();
        assert!(prox_component(&p, 0, 0.0, &[0.0, 0.0]).is_err());
        assert!(prox_component(&p, 0, -1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn logistic_vanishing_stepsize_is_identity() {
        for &(s, b) in &[(0.3, 1.0), (-4.0, -1.0), (12.0, 1.0), (0.0, -1.0)] {
            let t = scalar_prox_logistic(s, 1e-12, b, 1e-12).unwrap();
            assert!((t - s).abs() < 1e-10);
        }
    }

    #[test]
    fn logistic_antisymmetry() {
        let mut rng = RunRng::new(11, 0);
        for _ in 0..1000 {
            let s = 5.0 * rng.standard_normal();
            let lam = libm::exp(3.0 * rng.standard_normal());
            let b = if rng.uniform01() < 0.5 { 1.0 } else { -1.0 };
            let t1 = scalar_prox_logistic(s, lam, b, 1e-12).unwrap();
            let t2 = scalar_prox_logistic(-s, lam, -b, 1e-12).unwrap();
            assert!((t1 + t2).abs() <= 1e-12 * (1.0 + lam), "{t1} {t2}");
        }
    }

    #[test]
    fn logistic_matches_bisection_oracle() {
        let (s, lam, b) = (0.5, 2.0, 1.0);
        let r = |t: f64| t - s + lam * LossKind::Logistic.derivative(t, b);
        let oracle = bisection_root(r, s - lam, s + lam);
        let got = scalar_prox_logistic(s, lam, b, 1e-12).unwrap();
        assert!((got - oracle).abs() < 1e-10);
    }

    #[test]
    fn logistic_large_arguments_converge() {
        for &(s, lam) in &[(1e6, 1e6), (-1e6, 1e-3), (40.0, 1e8), (-700.0, 5.0)] {
            for b in [1.0, -1.0] {
                assert!(scalar_prox_logistic(s, lam, b, 1e-12).is_ok());
            }
        }
    }

    #[test]
    fn zero_row_and_component_minimizer_are_fixed_points() {
        let p = FiniteSumProblem::new(vec![0.0, 0.0, 1.0, 2.0], 2, 2, vec![1.0, 5.0], LossKind::SquaredResidual).unwrap();
        let x = [1.0, 2.0];
        assert_eq!(prox_component(&p, 0, 3.0, &x).unwrap(), x.to_vec());
        assert_eq!(prox_component(&p, 1, 3.0, &x).unwrap(), x.to_vec());
        let p = FiniteSumProblem::new(vec![0.0, 0.0], 1, 2, vec![1.0], LossKind::Logistic).unwrap();
        assert_eq!(prox_component(&p, 0, 3.0, &x).unwrap(), x.to_vec());
    }

    fn random_instance(loss: LossKind, d: usize, rng: &mut RunRng) -> (FiniteSumProblem, f64, Vec<f64>) {
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
        let p = FiniteSumProblem::new(row, 1, d, vec![b], loss).unwrap();
        let alpha = libm::exp(2.0 * rng.standard_normal());
        let x: Vec<f64> = (0..d).map(|_| 2.0 * rng.standard_normal()).collect();
        (p, alpha, x)
    }

    #[test]
    fn ols_matches_closed_form() {
        let mut rng = RunRng::new(12, 0);
        for _ in 0..500 {
            let (p, alpha, x) = random_instance(LossKind::SquaredResidual, 6, &mut rng);
            let got = prox_component(&p, 0, alpha, &x).unwrap();
            let a = p.row(0);
            let c = alpha * (p.label(0) - crate::linalg::dot(a, &x)) / (alpha * norm_sq(a) + 1.0);
            for j in 0..6 {
                let want = x[j] + c * a[j];
                assert!((got[j] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn logistic_matches_full_dimensional_oracle() {
        let mut rng = RunRng::new(13, 0);
        for _ in 0..300 {
            let (p, alpha, x) = random_instance(LossKind::Logistic, 3, &mut rng);
            let got = prox_component(&p, 0, alpha, &x).unwrap();
            let want = full_prox_oracle(&p, 0, alpha, &x);
            assert!(dist_sq(&got, &want).sqrt() < 1e-8);
        }
    }

    #[test]
    fn optimality_residual_and_implicit_identity() {
        let mut rng = RunRng::new(14, 0);
        for loss in [LossKind::SquaredResidual, LossKind::Logistic] {
            for _ in 0..500 {
                let (p, alpha, x) = random_instance(loss, 5, &mut rng);
                let e: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
                let mut shifted = x.clone();
                axpy(alpha, &e, &mut shifted);
                let y = prox_component(&p, 0, alpha, &shifted).unwrap();
                let g = p.component_gradient(0, &y).unwrap();
                // (shifted − y)/α = ∇f(y)
                let res: f64 = (0..5).map(|j| ((shifted[j] - y[j]) / alpha - g[j]).powi(2)).sum::<f64>().sqrt();
                assert!(res <= 10.0 * DEFAULT_PROX_TOL * (1.0 + p.row_norm_sq(0)) * (1.0 + 1.0 / alpha) + 1e-12);
                // y = x − α(∇f(y) − e)
                let back: f64 = (0..5).map(|j| (y[j] - (x[j] - alpha * (g[j] - e[j]))).powi(2)).sum::<f64>().sqrt();
                assert!(back <= 1e-8 * (1.0 + crate::linalg::norm(&x)));
            }
        }
    }

    #[test]
    fn firmly_nonexpansive_on_samples() {
        let mut rng = RunRng::new(15, 0);
        for loss in [LossKind::SquaredResidual, LossKind::Logistic] {
            for _ in 0..10_000 {
                let (p, alpha, x) = random_instance(loss, 4, &mut rng);
                let y: Vec<f64> = (0..4).map(|_| 2.0 * rng.standard_normal()).collect();
                let px = prox_component(&p, 0, alpha, &x).unwrap();
                let py = prox_component(&p, 0, alpha, &y).unwrap();
                let lhs = dist_sq(&px, &py);
                let inner: f64 = (0..4).map(|j| (px[j] - py[j]) * (x[j] - y[j])).sum();
                assert!(lhs <= dist_sq(&x, &y) * (1.0 + 1e-12) + 1e-20);
                assert!(lhs <= inner + 1e-10 * (1.0 + lhs));
            }
        }
    }
}

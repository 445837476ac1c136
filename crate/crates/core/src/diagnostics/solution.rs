use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, ThinSvd};
use crate::problem::{FiniteSumProblem, LossKind};

/// The affine minimizer set `x̂ + null(A)` of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    /// Minimum-norm minimizer.
    pub x_hat: Vec<f64>,
    /// Orthonormal basis of the row space of `A` (`rank × d`, row-major).
    row_basis: Vec<f64>,
    rank: usize,
    d: usize,
}

impl SolutionSet {
    pub fn from_svd(x_hat: Vec<f64>, svd: &ThinSvd) -> Self {
        let rank = svd.numerical_rank();
        let d = svd.cols;
        let row_basis = svd.v_t[..rank * d].to_vec();
        Self { x_hat, row_basis, rank, d }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Squared distance from `x` to the solution set.
    pub fn distance_sq(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.x_hat).map(|(a, b)| a - b).collect();
        self.row_basis.chunks_exact(self.d).map(|v| {
            let c = dot(v, &diff);
            c * c
        }).sum()
    }

    /// Nearest point of the solution set.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = x.iter().zip(&self.x_hat).map(|(a, b)| a - b).collect();
        let mut p = x.to_vec();
        for v in self.row_basis.chunks_exact(self.d) {
            axpy(-dot(v, &diff), v, &mut p);
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    ClosedFormOls,
    FullBatchSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub fstar: f64,
    pub x_ref: Vec<f64>,
    pub grad_norm: f64,
    pub method: ReferenceMethod,
    /// Explicit minimizer set, available for least squares only.
    pub solution_set: Option<SolutionSet>,
}

/// Iteration cap of the full-batch logistic solver.
pub const REFERENCE_MAX_ITERS: usize = 200;

/// Minimizer and optimal value of `F`.
///
/// Least squares uses the minimum-norm solution from an SVD of the design.
/// Logistic problems use a damped Newton method with Armijo backtracking,
/// stopping once `‖∇F‖ ≤ tol`.
pub fn reference_optimum(problem: &FiniteSumProblem, tol: f64) -> Result<ReferenceSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive"));
    }
    match problem.loss() {
        LossKind::SquaredResidual => Ok(least_squares(problem)),
        LossKind::Logistic => newton_logistic(problem, tol),
    }
}

fn least_squares(problem: &FiniteSumProblem) -> ReferenceSolution {
    let (n, d) = (problem.n(), problem.d());
    let svd = ThinSvd::new(problem.design(), n, d);
    let rank = svd.numerical_rank();
    let r = svd.rank_len();
    let b = problem.labels();
    let mut x_hat = vec![0.0; d];
    for k in 0..rank {
        let utb: f64 = (0..n).map(|i| svd.u[i * r + k] * b[i]).sum();
        axpy(utb / svd.singular_values[k], svd.right_vector(k), &mut x_hat);
    }
    let set = SolutionSet::from_svd(x_hat.clone(), &svd);
    let fstar = problem.value_unchecked(&x_hat);
    let mut g = vec![0.0; d];
    problem.full_gradient_into(&x_hat, &mut g);
    ReferenceSolution {
        fstar,
        x_ref: x_hat,
        grad_norm: norm(&g),
        method: ReferenceMethod::ClosedFormOls,
        solution_set: Some(set),
    }
}

fn newton_logistic(problem: &FiniteSumProblem, tol: f64) -> Result<ReferenceSolution> {
    let (n, d) = (problem.n(), problem.d());
    let design = DMatrix::from_row_slice(n, d, problem.design());
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut f = problem.value_unchecked(&x);
    let trace_scale = problem.row_norms_sq().iter().sum::<f64>() / (n * d) as f64;
    let mut ridge = 1e-12 * trace_scale.max(f64::MIN_POSITIVE);
    for _ in 0..REFERENCE_MAX_ITERS {
        problem.full_gradient_into(&x, &mut g);
        let gn = norm(&g);
        if gn <= tol {
            return Ok(ReferenceSolution {
                fstar: f,
                x_ref: x,
                grad_norm: gn,
                method: ReferenceMethod::FullBatchSolve,
                solution_set: None,
            });
        }
        let w: Vec<f64> = (0..n)
            .map(|i| problem.loss().second_derivative(problem.margin(i, &x), problem.label(i)) / n as f64)
            .collect();
        let mut weighted = design.clone();
        for (i, wi) in w.iter().enumerate() {
            weighted.row_mut(i).scale_mut(*wi);
        }
        let hess = design.transpose() * weighted;
        let rhs = DVector::from_iterator(d, g.iter().map(|v| -v));
        let step = loop {
            let mut h = hess.clone();
            for j in 0..d {
                h[(j, j)] += ridge;
            }
            match h.cholesky() {
                Some(ch) => break ch.solve(&rhs),
                None => ridge *= 10.0,
            }
            if !ridge.is_finite() {
                return Err(Error::SolverNoConvergence { iterations: 0, grad_norm: gn });
            }
        };
        let slope: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; d];
        for _ in 0..60 {
            for j in 0..d {
                trial[j] = x[j] + t * step[j];
            }
            let ft = problem.value_unchecked(&trial);
            if ft <= f + 1e-4 * t * slope {
                x.copy_from_slice(&trial);
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Rounding floor: accept a tiny step only if the gradient shrinks.
            let mut gt = vec![0.0; d];
            problem.full_gradient_into(&trial, &mut gt);
            if norm(&gt) < gn {
                x.copy_from_slice(&trial);
                f = problem.value_unchecked(&x);
            } else {
                return Err(Error::SolverNoConvergence { iterations: 0, grad_norm: gn });
            }
        }
    }
    problem.full_gradient_into(&x, &mut g);
    Err(Error::SolverNoConvergence { iterations: REFERENCE_MAX_ITERS, grad_norm: norm(&g) })
}

/// Exact distance from `x` to `argmin F` for least-squares problems.
pub fn distance_to_argmin(problem: &FiniteSumProblem, reference: &ReferenceSolution, x: &[f64]) -> Result<f64> {
    problem.validate_point(x)?;
    match (&reference.solution_set, problem.loss()) {
        (Some(set), LossKind::SquaredResidual) => Ok(libm::sqrt(set.distance_sq(x))),
        _ => Err(Error::Unsupported("distance to argmin needs a least-squares problem")),
    }
}

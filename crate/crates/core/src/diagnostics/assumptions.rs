use alloc::vec;
use alloc::vec::Vec;

use super::solution::SolutionSet;
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm, norm_sq};
use crate::methods::ReducerState;
use crate::problem::{FiniteSumProblem, LossKind};
use crate::prox::{prox_component_in_place, DEFAULT_PROX_TOL};
use crate::trace::Method;

/// Variance-assumption constants `(A, B, C, ρ)` of a method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rho: f64,
}

impl AbcConstants {
    pub fn for_method(method: Method, l: f64, n: usize, p: Option<f64>) -> Result<Self> {
        let two_l = 2.0 * l;
        match method {
            Method::Sppa | Method::Svrp => Ok(Self { a: two_l, b: 2.0, c: 0.0, rho: 0.0 }),
            Method::Lsvrp => {
                let p = p.ok_or(Error::InvalidParameter("L-SVRP constants need p"))?;
                Ok(Self { a: two_l, b: 2.0, c: p * l, rho: p })
            }
            Method::Sapa => Ok(Self { a: two_l, b: 2.0, c: l / n as f64, rho: 1.0 / n as f64 }),
            _ => Err(Error::Unsupported("variance constants are defined for the proximal methods")),
        }
    }
}

/// Exact, enumerated certificates of the variance assumptions at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// `‖(1/n) Σ_i e_i‖ / scale`.
    pub unbiased_residual: f64,
    /// Bound minus `E‖v‖²`; non-negative when the bound holds.
    pub abc_margin: f64,
    /// Recursion bound minus `E[σ²_{k+1}]`.
    pub sigma_recursion_margin: f64,
    /// The method's `D` (zero or `−2‖∇F(x̃)‖²`).
    pub d_value: f64,
    pub expected_v_sq: f64,
    pub abc_bound: f64,
    pub sigma_sq: f64,
    pub next_sigma_sq: f64,
    pub sigma_recursion_bound: f64,
    /// Number of enumerated branches (`n`, or `2n` for L-SVRP).
    pub branches: usize,
}

fn grad_diff_sq(problem: &FiniteSumProblem, i: usize, x: &[f64], y: &[f64]) -> f64 {
    let c = problem.gradient_scale(i, x) - problem.gradient_scale(i, y);
    c * c * problem.row_norm_sq(i)
}

fn mean_grad_diff_sq(problem: &FiniteSumProblem, x: &[f64], y: &[f64]) -> f64 {
    (0..problem.n()).map(|i| grad_diff_sq(problem, i, x, y)).sum::<f64>() / problem.n() as f64
}

/// `‖(1/n) Σ_i e_i‖` and the gradient scale it is measured against.
pub fn unbiased_residual(problem: &FiniteSumProblem, state: &ReducerState) -> (f64, f64) {
    let n = problem.n();
    let d = problem.d();
    let mean = state.mean_correction(problem);
    let mut e = vec![0.0; d];
    let mut scale = 0.0;
    for i in 0..n {
        state.correction_into(problem, i, &mut e);
        scale += norm(&e) / n as f64;
    }
    let agg = match state {
        ReducerState::SvrpAnchor { gbar, .. } | ReducerState::LsvrpAnchor { gbar, .. } => norm(gbar),
        ReducerState::SapaTable { gsum, .. } => norm(gsum) / n as f64,
        ReducerState::None => 0.0,
    };
    (norm(&mean), (scale + agg).max(f64::MIN_POSITIVE))
}

fn sapa_sigma_sq(problem: &FiniteSumProblem, table: &[f64], x_star: &[f64]) -> f64 {
    let d = problem.d();
    let mut acc = 0.0;
    for i in 0..problem.n() {
        let gs = problem.gradient_scale(i, x_star);
        let row = &table[i * d..(i + 1) * d];
        let a = problem.row(i);
        acc += row.iter().zip(a).map(|(r, aj)| (r - gs * aj) * (r - gs * aj)).sum::<f64>();
    }
    acc / problem.n() as f64
}

/// Context needed to evaluate `σ_k²` for a given method and state.
struct Sigma<'a> {
    problem: &'a FiniteSumProblem,
    set: &'a SolutionSet,
}

impl Sigma<'_> {
    fn anchor(&self, u: &[f64]) -> f64 {
        mean_grad_diff_sq(self.problem, u, &self.set.project(u))
    }

    fn sppa(&self) -> f64 {
        let x_star = &self.set.x_hat;
        (0..self.problem.n())
            .map(|i| {
                let g = self.problem.gradient_scale(i, x_star);
                g * g * self.problem.row_norm_sq(i)
            })
            .sum::<f64>()
            / self.problem.n() as f64
    }
}

fn require_ols(problem: &FiniteSumProblem) -> Result<()> {
    if problem.loss() != LossKind::SquaredResidual {
        return Err(Error::Unsupported("sigma-based checks need a least-squares problem"));
    }
    Ok(())
}

fn method_matches(method: Method, state: &ReducerState) -> bool {
    matches!(
        (method, state),
        (Method::Sppa, ReducerState::None)
            | (Method::Svrp, ReducerState::SvrpAnchor { .. })
            | (Method::Lsvrp, ReducerState::LsvrpAnchor { .. })
            | (Method::Sapa, ReducerState::SapaTable { .. })
    )
}

/// Verify the variance assumptions at the state `(state, x)` by enumerating
/// every sampled index (and, for L-SVRP, both Bernoulli outcomes).
///
/// For SAPA `x_star` is the minimizer nearest to `x⁰`; any minimizer yields
/// the same component gradients. `fstar` is the optimal value.
pub fn check_assumptions(
    problem: &FiniteSumProblem,
    method: Method,
    state: &ReducerState,
    x: &[f64],
    solution: &SolutionSet,
    fstar: f64,
) -> Result<AssumptionReport> {
    require_ols(problem)?;
    problem.validate_point(x)?;
    if !method_matches(method, state) {
        return Err(Error::InvalidParameter("reducer state does not belong to the method"));
    }
    let n = problem.n();
    let d = problem.d();
    let l = problem.smoothness_constant();
    let gap = problem.value_unchecked(x) - fstar;
    let sig = Sigma { problem, set: solution };

    let (res, scale) = unbiased_residual(problem, state);
    let mut e = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut expected_v_sq = 0.0;
    for i in 0..n {
        state.correction_into(problem, i, &mut e);
        v.iter_mut().for_each(|t| *t = 0.0);
        problem.add_gradient(i, x, 1.0, &mut v);
        axpy(-1.0, &e, &mut v);
        expected_v_sq += norm_sq(&v) / n as f64;
    }

    let nf = n as f64;
    let (sigma_sq, next_sigma_sq, d_value, rho, c, branches) = match state {
        ReducerState::None => {
            let s = sig.sppa();
            (s, s, 0.0, 0.0, 0.0, n)
        }
        ReducerState::SvrpAnchor { anchor, gbar } => {
            let s = sig.anchor(anchor);
            // The anchor is fixed within a stage: every branch keeps σ².
            let next = (0..n).map(|_| sig.anchor(anchor)).sum::<f64>() / nf;
            (s, next, -2.0 * norm_sq(gbar), 0.0, 0.0, n)
        }
        ReducerState::LsvrpAnchor { anchor, p, .. } => {
            let s = sig.anchor(anchor);
            let moved = sig.anchor(x);
            let mut next = 0.0;
            for _ in 0..n {
                next += (p * moved + (1.0 - p) * s) / nf;
            }
            (s, next, 0.0, *p, p * l, 2 * n)
        }
        ReducerState::SapaTable { phi_grads, .. } => {
            let x_star = &solution.x_hat;
            let s = sapa_sigma_sq(problem, phi_grads, x_star);
            let mut next = 0.0;
            let mut table = phi_grads.clone();
            for i in 0..n {
                let saved: Vec<f64> = table[i * d..(i + 1) * d].to_vec();
                let g = problem.gradient_scale(i, x);
                for (t, aj) in table[i * d..(i + 1) * d].iter_mut().zip(problem.row(i)) {
                    *t = g * aj;
                }
                next += sapa_sigma_sq(problem, &table, x_star) / nf;
                table[i * d..(i + 1) * d].copy_from_slice(&saved);
            }
            (s, next, 0.0, 1.0 / nf, l / nf, n)
        }
    };

    let abc_bound = 4.0 * l * gap + 2.0 * sigma_sq + d_value;
    let sigma_recursion_bound = (1.0 - rho) * sigma_sq + 2.0 * c * gap;
    Ok(AssumptionReport {
        unbiased_residual: res / scale,
        abc_margin: abc_bound - expected_v_sq,
        sigma_recursion_margin: sigma_recursion_bound - next_sigma_sq,
        d_value,
        expected_v_sq,
        abc_bound,
        sigma_sq,
        next_sigma_sq,
        sigma_recursion_bound,
        branches,
    })
}

/// Closed form of SAPA's expected next `σ²`:
/// `(1 − 1/n)σ² + (1/n)·(1/n)Σ‖∇f_i(x) − ∇f_i(x*)‖²`.
pub fn sapa_sigma_closed_form(problem: &FiniteSumProblem, state: &ReducerState, x: &[f64], x_star: &[f64]) -> Result<f64> {
    let ReducerState::SapaTable { phi_grads, .. } = state else {
        return Err(Error::InvalidParameter("expected a gradient table"));
    };
    let nf = problem.n() as f64;
    let s = sapa_sigma_sq(problem, phi_grads, x_star);
    Ok((1.0 - 1.0 / nf) * s + mean_grad_diff_sq(problem, x, x_star) / nf)
}

/// Slack of the one-step descent inequality
///
/// ```text
/// E[dist(x⁺)² + α²Mσ₊²] ≤ dist(x)² + α²(M + B − ρM)σ² − 2α(1 − α(A + MC))(F(x) − F_*) + α²D
/// ```
///
/// with the expectation computed exactly over all branches.
pub fn descent_slack(
    problem: &FiniteSumProblem,
    method: Method,
    state: &ReducerState,
    x: &[f64],
    solution: &SolutionSet,
    fstar: f64,
    alpha: f64,
    big_m: f64,
) -> Result<f64> {
    let report = check_assumptions(problem, method, state, x, solution, fstar)?;
    let p = match state {
        ReducerState::LsvrpAnchor { p, .. } => Some(*p),
        _ => None,
    };
    let k = AbcConstants::for_method(method, problem.smoothness_constant(), problem.n(), p)?;
    let n = problem.n();
    let d = problem.d();
    let mut e = vec![0.0; d];
    let mut expected_dist = 0.0;
    for i in 0..n {
        state.correction_into(problem, i, &mut e);
        let mut y = x.to_vec();
        axpy(alpha, &e, &mut y);
        prox_component_in_place(problem, i, alpha, &mut y, DEFAULT_PROX_TOL)?;
        expected_dist += solution.distance_sq(&y) / n as f64;
    }
    let gap = problem.value_unchecked(x) - fstar;
    let lhs = expected_dist + alpha * alpha * big_m * report.next_sigma_sq;
    let rhs = solution.distance_sq(x) + alpha * alpha * (big_m + k.b - k.rho * big_m) * report.sigma_sq
        - 2.0 * alpha * (1.0 - alpha * (k.a + big_m * k.c)) * gap
        + alpha * alpha * report.d_value;
    Ok(rhs - lhs)
}

/// Slack of the co-coercivity sum inequality at a minimizer `y`:
/// `2L(F(x) − F(y)) − (1/n)Σ‖∇f_i(x) − ∇f_i(y)‖²`.
pub fn cocoercivity_slack(problem: &FiniteSumProblem, x: &[f64], y: &[f64]) -> f64 {
    let l = problem.smoothness_constant();
    2.0 * l * (problem.value_unchecked(x) - problem.value_unchecked(y)) - mean_grad_diff_sq(problem, x, y)
}

/// Slack of quadratic growth `F(x) − F_* − (μ/2)·dist(x, argmin F)²`.
pub fn quadratic_growth_slack(problem: &FiniteSumProblem, solution: &SolutionSet, fstar: f64, mu: f64, x: &[f64]) -> f64 {
    problem.value_unchecked(x) - fstar - 0.5 * mu * solution.distance_sq(x)
}

/// Implicit gradient `w = (x − x⁺)/α + e` of one unified step.
pub fn implicit_gradient(x: &[f64], x_next: &[f64], alpha: f64, e: &[f64]) -> Vec<f64> {
    x.iter().zip(x_next).zip(e).map(|((a, b), ei)| (a - b) / alpha + ei).collect()
}

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, norm, sub};
use crate::problem::FiniteSumProblem;

/// Steps between full re-summations of the SAPA/SAGA gradient table.
pub const SAPA_RESYNC_INTERVAL: u64 = 100_000;

/// Variance-reduction memory of a run.
///
/// Each variant yields the correction `e_i` for a sampled component `i`;
/// averaged over `i` the correction vanishes exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum ReducerState {
    /// Plain stochastic proximal point: `e = 0`.
    None,
    /// `e_i = ∇f_i(x̃) − ∇F(x̃)` with a per-stage anchor `x̃`.
    SvrpAnchor { anchor: Vec<f64>, gbar: Vec<f64> },
    /// Same correction with an anchor refreshed with probability `p`.
    LsvrpAnchor { anchor: Vec<f64>, gbar: Vec<f64>, p: f64 },
    /// `e_i = ∇f_i(φ_i) − (1/n) Σ_j ∇f_j(φ_j)`; stores the gradients
    /// `∇f_j(φ_j)` row-major (`n × d`) and their sum.
    SapaTable { phi_grads: Vec<f64>, gsum: Vec<f64>, d: usize },
}

impl ReducerState {
    pub fn svrp(problem: &FiniteSumProblem, anchor: &[f64]) -> Self {
        let mut gbar = vec![0.0; problem.d()];
        problem.full_gradient_into(anchor, &mut gbar);
        ReducerState::SvrpAnchor { anchor: anchor.to_vec(), gbar }
    }

    pub fn lsvrp(problem: &FiniteSumProblem, anchor: &[f64], p: f64) -> Self {
        let mut gbar = vec![0.0; problem.d()];
        problem.full_gradient_into(anchor, &mut gbar);
        ReducerState::LsvrpAnchor { anchor: anchor.to_vec(), gbar, p }
    }

    /// Table initialized with `φ_i = x⁰` for every `i`.
    pub fn sapa(problem: &FiniteSumProblem, x0: &[f64]) -> Self {
        let (n, d) = (problem.n(), problem.d());
        let mut phi_grads = vec![0.0; n * d];
        for (i, row) in phi_grads.chunks_exact_mut(d).enumerate() {
            problem.add_gradient(i, x0, 1.0, row);
        }
        let gsum = column_sum(&phi_grads, d);
        ReducerState::SapaTable { phi_grads, gsum, d }
    }

    /// Table with an individual point `φ_i` per component.
    pub fn sapa_from_points(problem: &FiniteSumProblem, phis: &[Vec<f64>]) -> Self {
        let (n, d) = (problem.n(), problem.d());
        assert_eq!(phis.len(), n);
        let mut phi_grads = vec![0.0; n * d];
        for (i, row) in phi_grads.chunks_exact_mut(d).enumerate() {
            problem.add_gradient(i, &phis[i], 1.0, row);
        }
        let gsum = column_sum(&phi_grads, d);
        ReducerState::SapaTable { phi_grads, gsum, d }
    }

    /// `out ← e_i`.
    #[inline]
    pub fn correction_into(&self, problem: &FiniteSumProblem, i: usize, out: &mut [f64]) {
        match self {
            ReducerState::None => out.iter_mut().for_each(|v| *v = 0.0),
            ReducerState::SvrpAnchor { anchor, gbar } | ReducerState::LsvrpAnchor { anchor, gbar, .. } => {
                let g = problem.gradient_scale(i, anchor);
                let a = problem.row(i);
                for ((o, &aj), &gb) in out.iter_mut().zip(a).zip(gbar) {
                    *o = g * aj - gb;
                }
            }
            ReducerState::SapaTable { phi_grads, gsum, d } => {
                let inv_n = 1.0 / problem.n() as f64;
                let row = &phi_grads[i * d..(i + 1) * d];
                for ((o, &r), &s) in out.iter_mut().zip(row).zip(gsum) {
                    *o = r - inv_n * s;
                }
            }
        }
    }

    pub fn correction(&self, problem: &FiniteSumProblem, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; problem.d()];
        self.correction_into(problem, i, &mut e);
        e
    }

    /// The stored `∇f_i(φ_i)` row of a gradient table.
    pub fn table_row(&self, i: usize) -> Option<&[f64]> {
        match self {
            ReducerState::SapaTable { phi_grads, d, .. } => Some(&phi_grads[i * d..(i + 1) * d]),
            _ => None,
        }
    }

    /// Replace slot `i` with `new_grad` and update the running sum in `O(d)`.
    #[inline]
    pub fn replace_table_row(&mut self, i: usize, new_grad: &[f64]) {
        if let ReducerState::SapaTable { phi_grads, gsum, d } = self {
            let row = &mut phi_grads[i * *d..(i + 1) * *d];
            for ((r, s), &g) in row.iter_mut().zip(gsum.iter_mut()).zip(new_grad) {
                *s += g - *r;
                *r = g;
            }
        }
    }

    /// Replace slot `i` with `c · a_i` (the gradient of a linear composite).
    #[inline]
    pub fn replace_table_row_scaled(&mut self, i: usize, c: f64, a: &[f64]) {
        if let ReducerState::SapaTable { phi_grads, gsum, d } = self {
            let row = &mut phi_grads[i * *d..(i + 1) * *d];
            for ((r, s), &aj) in row.iter_mut().zip(gsum.iter_mut()).zip(a) {
                let g = c * aj;
                *s += g - *r;
                *r = g;
            }
        }
    }

    /// Recompute the running sum of a gradient table from scratch.
    pub fn resync(&mut self) {
        if let ReducerState::SapaTable { phi_grads, gsum, d } = self {
            *gsum = column_sum(phi_grads, *d);
        }
    }

    /// Relative error of the cached aggregate (anchor gradient or table sum)
    /// against a fresh recomputation.
    pub fn aggregate_error(&self, problem: &FiniteSumProblem) -> f64 {
        match self {
            ReducerState::None => 0.0,
            ReducerState::SvrpAnchor { anchor, gbar } | ReducerState::LsvrpAnchor { anchor, gbar, .. } => {
                let fresh = problem.full_gradient(anchor).unwrap_or_else(|_| vec![f64::NAN; problem.d()]);
                norm(&sub(gbar, &fresh)) / norm(&fresh).max(f64::MIN_POSITIVE)
            }
            ReducerState::SapaTable { phi_grads, gsum, d } => {
                let fresh = column_sum(phi_grads, *d);
                let scale: f64 = phi_grads.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
                norm(&sub(gsum, &fresh)) / scale
            }
        }
    }

    /// `(1/n) Σ_i e_i`, which is zero up to rounding.
    pub fn mean_correction(&self, problem: &FiniteSumProblem) -> Vec<f64> {
        let d = problem.d();
        let mut acc = vec![0.0; d];
        let mut e = vec![0.0; d];
        let w = 1.0 / problem.n() as f64;
        for i in 0..problem.n() {
            self.correction_into(problem, i, &mut e);
            axpy(w, &e, &mut acc);
        }
        acc
    }
}

fn column_sum(table: &[f64], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d];
    for row in table.chunks_exact(d) {
        axpy(1.0, row, &mut s);
    }
    s
}

//! Dense vector kernels on `f64` slices and a thin wrapper over an SVD.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

/// `y += t * x`
#[inline]
pub fn axpy(t: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += t * xi;
    }
}

#[inline]
pub fn scale(t: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= t;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` of a row-major
/// `rows × cols` matrix, with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub rows: usize,
    pub cols: usize,
    /// `rows × r`, row-major.
    pub u: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// `r × cols`, row-major; row `j` is the `j`-th right singular vector.
    pub v_t: Vec<f64>,
}

impl ThinSvd {
    pub fn new(data: &[f64], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        let m = DMatrix::from_row_slice(rows, cols, data);
        let svd = m.svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let s = svd.singular_values;
        let r = s.len();

        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

        let mut u_out = vec![0.0; rows * r];
        let mut v_out = vec![0.0; r * cols];
        let mut s_out = Vec::with_capacity(r);
        for (dst, &src) in order.iter().enumerate() {
            s_out.push(s[src]);
            for i in 0..rows {
                u_out[i * r + dst] = u[(i, src)];
            }
            for j in 0..cols {
                v_out[dst * cols + j] = v_t[(src, j)];
            }
        }
        Self {
            rows,
            cols,
            u: u_out,
            singular_values: s_out,
            v_t: v_out,
        }
    }

    pub fn rank_len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn right_vector(&self, j: usize) -> &[f64] {
        &self.v_t[j * self.cols..(j + 1) * self.cols]
    }

    /// Number of singular values above `max(rows, cols) · ε · σ_max`.
    pub fn numerical_rank(&self) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        let tol = (self.rows.max(self.cols) as f64) * f64::EPSILON * smax * 16.0;
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    /// Rebuild `U diag(s) Vᵀ` with replacement singular values.
    pub fn recompose(&self, s: &[f64]) -> Vec<f64> {
        let r = self.rank_len();
        assert_eq!(s.len(), r);
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            let row = &mut out[i * self.cols..(i + 1) * self.cols];
            for (k, &sk) in s.iter().enumerate() {
                let w = self.u[i * r + k] * sk;
                if w != 0.0 {
                    axpy(w, self.right_vector(k), row);
                }
            }
        }
        out
    }
}

/// Orthonormal basis (as rows) of the null space of a `rows × cols` matrix,
/// completed from the right singular vectors of its SVD.
pub fn null_space_basis(svd: &ThinSvd) -> Vec<Vec<f64>> {
    let rank = svd.numerical_rank();
    let cols = svd.cols;
    let mut basis: Vec<Vec<f64>> = (rank..svd.rank_len())
        .map(|j| svd.right_vector(j).to_vec())
        .collect();
    if svd.rank_len() < cols {
        // Wide matrix: complete the thin V with Gram-Schmidt on unit vectors.
        let mut all: Vec<Vec<f64>> = (0..svd.rank_len())
            .map(|j| svd.right_vector(j).to_vec())
            .collect();
        for e in 0..cols {
            if all.len() == cols {
                break;
            }
            let mut v = vec![0.0; cols];
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &all {
                    let c = dot(b, &v);
                    axpy(-c, b, &mut v);
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                scale(1.0 / nv, &mut v);
                all.push(v.clone());
                basis.push(v);
            }
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_recomposes() {
        let a = [3.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let svd = ThinSvd::new(&a, 4, 3);
        let s = &svd.singular_values;
        assert!(s[0] >= s[1] && s[1] >= s[2]);
        let back = svd.recompose(s);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn null_space_of_wide_matrix() {
        // 1 x 3 matrix [1 1 0] has a two-dimensional null space.
        let svd = ThinSvd::new(&[1.0, 1.0, 0.0], 1, 3);
        let basis = null_space_basis(&svd);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!((b[0] + b[1]).abs() < 1e-12);
            assert!((norm(b) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-12);
    }
}

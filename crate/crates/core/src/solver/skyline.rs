//! Profile (skyline) LU factorization without pivoting.
//!
//! Gaussian elimination needs no pivoting on a nonsingular M-matrix: every
//! leading principal submatrix is again an M-matrix, so every pivot is
//! positive. Fill-in stays inside the row profile of `L` and the column
//! profile of `U`, which the mesh ordering keeps narrow.

use crate::assemble::SparseSystem;
use crate::error::{Error, Result};
use crate::scalar::{sup_norm, Scalar};

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// `P A Pᵀ = L U` with unit lower `L` stored by rows and `U` stored by columns.
#[derive(Debug, Clone)]
pub struct SkylineLu<T> {
    n: usize,
    /// `perm[j]` is the factored position of original unknown `j`.
    perm: Vec<usize>,
    row_start: Vec<usize>,
    col_start: Vec<usize>,
    l_ptr: Vec<usize>,
    u_ptr: Vec<usize>,
    l_vals: Vec<T>,
    u_vals: Vec<T>,
}

impl<T: Scalar> SkylineLu<T> {
    /// Factors `system` after permuting unknowns by `perm` (identity if `None`).
    pub fn factor(system: &SparseSystem<T>, perm: Option<Vec<usize>>) -> Result<Self> {
        let n = system.dim();
        let perm = perm.unwrap_or_else(|| (0..n).collect());
        debug_assert_eq!(perm.len(), n);
        let mut inv = vec![0; n];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }

        let mut row_start: Vec<usize> = (0..n).collect();
        let mut col_start: Vec<usize> = (0..n).collect();
        for (p, &j) in inv.iter().enumerate() {
            for (c, _) in system.row(j) {
                let q = perm[c];
                if q < p {
                    row_start[p] = row_start[p].min(q);
                } else if q > p {
                    col_start[q] = col_start[q].min(p);
                }
            }
        }

        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut u_ptr = Vec::with_capacity(n + 1);
        l_ptr.push(0);
        u_ptr.push(0);
        for p in 0..n {
            l_ptr.push(l_ptr[p] + (p - row_start[p]));
            u_ptr.push(u_ptr[p] + (p - col_start[p] + 1));
        }
        let mut l_vals = vec![T::zero(); l_ptr[n]];
        let mut u_vals = vec![T::zero(); u_ptr[n]];
        for (p, &j) in inv.iter().enumerate() {
            for (c, v) in system.row(j) {
                let q = perm[c];
                if q < p {
                    l_vals[l_ptr[p] + q - row_start[p]] += v;
                } else {
                    u_vals[u_ptr[q] + p - col_start[q]] += v;
                }
            }
        }

        let mut lu = SkylineLu {
            n,
            perm,
            row_start,
            col_start,
            l_ptr,
            u_ptr,
            l_vals,
            u_vals,
        };
        lu.eliminate()?;
        Ok(lu)
    }

    fn eliminate(&mut self) -> Result<()> {
        for p in 0..self.n {
            let fr = self.row_start[p];
            let lp = self.l_ptr[p];
            for k in fr..p {
                let start = fr.max(self.col_start[k]);
                let s = {
                    let lrow = &self.l_vals[lp + start - fr..lp + k - fr];
                    let up = self.u_ptr[k];
                    let fc = self.col_start[k];
                    let ucol = &self.u_vals[up + start - fc..up + k - fc];
                    dot(lrow, ucol)
                };
                let pivot = self.u_vals[self.u_ptr[k + 1] - 1];
                let at = lp + k - fr;
                self.l_vals[at] = (self.l_vals[at] - s) / pivot;
            }

            let fc = self.col_start[p];
            let up = self.u_ptr[p];
            for k in fc..=p {
                let frk = self.row_start[k];
                let start = frk.max(fc);
                let s = {
                    let lk = self.l_ptr[k];
                    let lrow = &self.l_vals[lk + start - frk..lk + k - frk];
                    let ucol = &self.u_vals[up + start - fc..up + k - fc];
                    dot(lrow, ucol)
                };
                self.u_vals[up + k - fc] = self.u_vals[up + k - fc] - s;
            }
            let pivot = self.u_vals[self.u_ptr[p + 1] - 1];
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return Err(Error::SingularFactorization {
                    pivot: p,
                    value: pivot.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// Solves `A x = c`.
    pub fn solve(&self, c: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = vec![T::zero(); n];
        for (j, &p) in self.perm.iter().enumerate() {
            y[p] = c[j];
        }
        for p in 0..n {
            let fr = self.row_start[p];
            let lp = self.l_ptr[p];
            let s = dot(&self.l_vals[lp..lp + p - fr], &y[fr..p]);
            y[p] = y[p] - s;
        }
        for q in (0..n).rev() {
            let fc = self.col_start[q];
            let up = self.u_ptr[q];
            let xq = y[q] / self.u_vals[up + q - fc];
            y[q] = xq;
            for (k, u) in (fc..q).zip(&self.u_vals[up..up + q - fc]) {
                y[k] = y[k] - *u * xq;
            }
        }
        let mut x = vec![T::zero(); n];
        for (j, &p) in self.perm.iter().enumerate() {
            x[j] = y[p];
        }
        x
    }

    /// Number of stored factor entries.
    pub fn stored(&self) -> usize {
        self.l_vals.len() + self.u_vals.len()
    }
}

/// Result of [`solve_system`].
#[derive(Debug, Clone)]
pub struct LinearSolve<T> {
    pub u: Vec<T>,
    /// `‖A u + b‖∞`.
    pub residual: T,
    /// Backward-error scale `‖A‖∞ ‖u‖∞ + ‖b‖∞` the residual is measured against.
    pub scale: T,
    pub refinements: usize,
}

/// Mesh-major ordering `(l, i) ↦ i + l N`, which keeps the profile at about
/// `N d` entries per row.
pub fn mesh_major(m: usize, n: usize) -> Vec<usize> {
    let mut perm = vec![0; m * n];
    for i in 0..n {
        for l in 0..m {
            perm[l + i * m] = i + l * n;
        }
    }
    perm
}

/// `A u + b` accumulated in `f64`.
fn residual_wide<T: Scalar>(system: &SparseSystem<T>, u: &[f64]) -> Vec<f64> {
    (0..system.dim())
        .map(|j| system.row(j).map(|(c, v)| v.to_f64_lossy() * u[c]).sum::<f64>() + system.b[j].to_f64_lossy())
        .collect()
}

fn sup_wide(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Solves `A u = -b` by factorization plus iterative refinement until
/// `‖A u + b‖∞ ≤ tol · (‖A‖∞ ‖u‖∞ + ‖b‖∞)`.
///
/// Residuals and the iterate are carried in `f64`, so an `f32` factorization
/// still reaches an `f32`-accurate solution.
pub fn solve_system<T: Scalar>(system: &SparseSystem<T>, tol: T) -> Result<LinearSolve<T>> {
    let perm = system.layout().map(|(m, n)| mesh_major(m, n));
    let lu = SkylineLu::factor(system, perm)?;
    let rhs: Vec<T> = system.b.iter().map(|&v| T::zero() - v).collect();
    let mut u: Vec<f64> = lu.solve(&rhs).iter().map(|v| v.to_f64_lossy()).collect();
    let a_norm = system.norm_inf().to_f64_lossy();
    let b_norm = sup_norm(&system.b).to_f64_lossy();
    let tol = tol.to_f64_lossy();
    let max_refinements = if T::epsilon().to_f64_lossy() > 1e-10 { 12 } else { 3 };
    let mut refinements = 0;
    loop {
        let res = residual_wide(system, &u);
        let r_norm = sup_wide(&res);
        let scale = a_norm * sup_wide(&u) + b_norm;
        if r_norm <= tol * scale || refinements == max_refinements || !r_norm.is_finite() {
            return Ok(LinearSolve {
                u: u.iter().map(|&v| T::lit(v)).collect(),
                residual: T::lit(r_norm),
                scale: T::lit(scale),
                refinements,
            });
        }
        let neg: Vec<T> = res.iter().map(|&v| T::lit(-v)).collect();
        let corr = lu.solve(&neg);
        for (x, c) in u.iter_mut().zip(corr) {
            *x += c.to_f64_lossy();
        }
        refinements += 1;
    }
}

//! Runtime M-matrix certificate: Z-pattern plus a positive vector `W` with `A W > 0`.

use crate::assemble::{Scheme, SparseSystem};
use crate::scalar::Scalar;

/// Positive test vector `W_{l,i} = 1 + l ε + i η` (1-based `l`, `i`) with
/// `ε = r Δx / (μ β̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness<T> {
    pub eps: T,
    pub eta: T,
}

impl<T: Scalar> Witness<T> {
    pub fn base_eps(scheme: &Scheme<T>) -> T {
        scheme.model.r * scheme.grid.dx / (scheme.model.mu * scheme.beta_bar)
    }

    pub fn new(scheme: &Scheme<T>, eta: T) -> Self {
        Witness {
            eps: Self::base_eps(scheme),
            eta,
        }
    }

    /// `η = (d + λ) ε / 2`, the midpoint of `(0, (d + λ) ε)`.
    pub fn stated(scheme: &Scheme<T>) -> Self {
        let eps = Self::base_eps(scheme);
        let s = &scheme.stencil;
        Self::new(scheme, T::lit(0.5) * (T::of_usize(s.d) + s.lam) * eps)
    }

    /// `η = (d - 1 + λ) ε / 2`.
    ///
    /// An invest row interpolates at `x_l - (d - 1 + λ) Δx`, so its slack is
    /// `(d - 1 + λ) ε - η`; this is the midpoint of the interval that keeps
    /// both the invest and the disinvest rows positive.
    pub fn interior(scheme: &Scheme<T>) -> Self {
        let eps = Self::base_eps(scheme);
        Self::new(scheme, T::lit(0.5) * scheme.stencil.shift_in_cells() * eps)
    }

    pub fn vector(&self, scheme: &Scheme<T>) -> Vec<T> {
        let (m, n) = (scheme.m(), scheme.n());
        let mut w = Vec::with_capacity(m * n);
        for i in 0..n {
            for l in 0..m {
                w.push(T::one() + T::of_usize(l + 1) * self.eps + T::of_usize(i + 1) * self.eta);
            }
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MMatrixReport<T> {
    /// Every off-diagonal entry is `≤ 0`.
    pub offdiag_ok: bool,
    /// Every diagonal entry is `> 0`.
    pub diag_ok: bool,
    /// `A W > 0` componentwise.
    pub witness_ok: bool,
    /// `min_j (A W)_j`.
    pub min_slack: T,
    /// Row attaining `min_slack`.
    pub worst_row: usize,
    /// Rows with `(A W)_j ≤ 0`.
    pub failing_rows: usize,
}

impl<T: Scalar> MMatrixReport<T> {
    pub fn passed(&self) -> bool {
        self.offdiag_ok && self.diag_ok && self.witness_ok
    }
}

/// Checks the sign pattern of `system` and positivity of `A · witness`.
pub fn verify_m_matrix<T: Scalar>(system: &SparseSystem<T>, witness: &[T]) -> MMatrixReport<T> {
    let mut offdiag_ok = true;
    let mut diag_ok = true;
    let mut min_slack = T::infinity();
    let mut worst_row = 0;
    let mut failing_rows = 0;
    for j in 0..system.dim() {
        let mut acc = T::zero();
        let mut has_diag = false;
        for (c, v) in system.row(j) {
            if c == j {
                has_diag = true;
                if !(v > T::zero()) {
                    diag_ok = false;
                }
            } else if v > T::zero() {
                offdiag_ok = false;
            }
            acc = acc + v * witness[c];
        }
        diag_ok &= has_diag;
        if !(acc > T::zero()) {
            failing_rows += 1;
        }
        if acc < min_slack {
            min_slack = acc;
            worst_row = j;
        }
    }
    MMatrixReport {
        offdiag_ok,
        diag_ok,
        witness_ok: failing_rows == 0,
        min_slack,
        worst_row,
        failing_rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{assemble, Control, ControlField};
    use crate::grid::build_grid;
    use crate::model::{FirmModel, GainSpec};
    use approx::assert_relative_eq;

    #[test]
    fn planted_positive_offdiagonal_is_caught() {
        let sys = SparseSystem::from_rows(
            vec![vec![(0, 2.0), (1, 0.5)], vec![(0, -1.0), (1, 2.0)]],
            vec![0.0, 0.0],
        )
        .unwrap();
        let r = verify_m_matrix(&sys, &[1.0, 1.0]);
        assert!(!r.offdiag_ok);
        assert!(r.diag_ok);
        assert!(!r.passed());
    }

    #[test]
    fn continuation_rows_have_slack_r() {
        let mut model = FirmModel::reference();
        model.n_levels = 1;
        model.gain = GainSpec::Constant { beta_bar: 2.0 };
        let s = Scheme::new(model, build_grid(10.0, 201).unwrap()).unwrap();
        let sys = assemble(&s, &ControlField::initial(s.m(), 1)).unwrap();
        // constant vector picks out the row sum: r on continuation rows
        let ones = vec![1.0; s.len()];
        let sums = sys.mul_vec(&ones);
        for l in 1..s.m() - 1 {
            assert_relative_eq!(sums[l], s.model.r, epsilon = 1e-10);
        }
        assert_relative_eq!(sums[s.m() - 1], 0.0, epsilon = 1e-10);
        let w = Witness::stated(&s).vector(&s);
        let r = verify_m_matrix(&sys, &w);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn interior_witness_covers_switch_rows() {
        // d = 1, λ = 0.2: the stated η exceeds the invest-row slack
        let model = FirmModel::reference();
        let s = Scheme::new(model, build_grid(10.0, 2001).unwrap()).unwrap();
        assert_eq!(s.stencil.d, 1);
        assert_relative_eq!(s.stencil.lam, 0.2, epsilon = 1e-9);
        let mut c = ControlField::initial(s.m(), s.n());
        for l in 1..s.m() - 1 {
            c.set(l, 0, Control::Invest);
            c.set(l, s.n() - 1, Control::Disinvest);
        }
        let sys = assemble(&s, &c).unwrap();
        let good = verify_m_matrix(&sys, &Witness::interior(&s).vector(&s));
        assert!(good.passed(), "{good:?}");
        let stated = Witness::stated(&s);
        let bad = verify_m_matrix(&sys, &stated.vector(&s));
        assert!(bad.offdiag_ok && !bad.witness_ok);
        // slack on an invest row: (d - 1 + λ) ε - η
        assert_relative_eq!(bad.min_slack, 0.2 * stated.eps - stated.eta, epsilon = 1e-12);
    }
}

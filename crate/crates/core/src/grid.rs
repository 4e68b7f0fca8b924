//! Equity mesh, monotone stencil selection and the geometry of the
//! interpolated switching cost.

use crate::error::{Error, Result};
use crate::model::FirmModel;
use crate::scalar::Scalar;

/// Uniform mesh `x_l = l Δx`, `l = 0..M`, on `[0, x_max]` in shifted equity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub m_points: usize,
    pub x_max: T,
    pub dx: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(x_max: T, m_points: usize) -> Result<Self> {
        if !(x_max > T::zero()) || !x_max.is_finite() {
            return Err(Error::NonPositiveDomain(x_max.to_f64_lossy()));
        }
        if m_points < 3 {
            return Err(Error::TooFewPoints(m_points));
        }
        Ok(Grid {
            m_points,
            x_max,
            dx: x_max / T::of_usize(m_points - 1),
        })
    }

    /// Abscissa of node `l` (0-based). The last node is `x_max` exactly.
    #[inline]
    pub fn x(&self, l: usize) -> T {
        if l + 1 == self.m_points {
            self.x_max
        } else {
            T::of_usize(l) * self.dx
        }
    }

    /// Index of the node closest to `x`, clamped to the mesh.
    #[inline]
    pub fn nearest(&self, x: T) -> usize {
        if !(x > T::zero()) {
            return 0;
        }
        let l = (x / self.dx).round().to_usize().unwrap_or(usize::MAX);
        l.min(self.m_points - 1)
    }

    pub fn abscissae(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.m_points).map(|l| self.x(l))
    }
}

/// Grid with exact endpoints; see [`Grid::new`].
pub fn build_grid<T: Scalar>(x_max: T, m_points: usize) -> Result<Grid<T>> {
    Grid::new(x_max, m_points)
}

/// Offset and weight of the interpolation `W_{i+1}(x_l - 2γh)`.
///
/// With `2γh/Δx = (d - 1) + lam`, the interpolated value is
/// `lam W_{l-d, i+1} + (1 - lam) W_{l-d+1, i+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchStencil<T> {
    pub d: usize,
    pub lam: T,
}

impl<T: Scalar> SwitchStencil<T> {
    pub fn new(model: &FirmModel<T>, grid: &Grid<T>) -> Self {
        let ratio = T::lit(2.0) * model.gamma * model.h / grid.dx;
        let mut whole = ratio.floor();
        // Snap exact grid multiples that division rounded just below an integer.
        let near = ratio.round();
        if (ratio - near).abs() <= T::lit(64.0) * T::epsilon() * ratio.max(T::one()) {
            whole = near;
        }
        let lam = (ratio - whole).max(T::zero());
        SwitchStencil {
            d: 1 + whole.to_usize().unwrap_or(0),
            lam,
        }
    }

    /// Whether node `l` (0-based) can reach the interpolation nodes on the mesh.
    #[inline]
    pub fn invest_reachable(&self, l: usize) -> bool {
        l >= self.d
    }

    /// Interpolation nodes and weights for node `l`; zero weights are omitted.
    pub fn weights(&self, l: usize) -> Option<impl Iterator<Item = (usize, T)>> {
        if !self.invest_reachable(l) {
            return None;
        }
        let lo = (l - self.d, self.lam);
        let hi = (l - self.d + 1, T::one() - self.lam);
        Some([lo, hi].into_iter().filter(|(_, w)| *w != T::zero()))
    }

    /// Switching cost in mesh units, `(d - 1) + lam`.
    pub fn shift_in_cells(&self) -> T {
        T::of_usize(self.d - 1) + self.lam
    }
}

pub fn switch_stencil<T: Scalar>(model: &FirmModel<T>, grid: &Grid<T>) -> SwitchStencil<T> {
    SwitchStencil::new(model, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StencilKind {
    Central,
    Forward,
    Backward,
}

/// Central differencing whenever the positive coefficient condition
/// `2 C2 ≥ |C1| Δx` allows it, upwinding otherwise.
pub fn stencil_kind<T: Scalar>(c1: T, c2: T, dx: T) -> StencilKind {
    if T::lit(2.0) * c2 >= c1.abs() * dx {
        StencilKind::Central
    } else if c1 >= T::zero() {
        StencilKind::Forward
    } else {
        StencilKind::Backward
    }
}

/// Row of `-(L̃W)_l` for a continuation node: coefficients of
/// `W_{l-1}`, `W_l`, `W_{l+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeRow<T> {
    pub lower: T,
    pub diag: T,
    pub upper: T,
    pub kind: StencilKind,
}

impl<T: Scalar> PdeRow<T> {
    pub fn new(c1: T, c2: T, r: T, dx: T) -> Self {
        let kind = stencil_kind(c1, c2, dx);
        let diff = c2 / (dx * dx);
        let two = T::lit(2.0);
        let (lower, diag, upper) = match kind {
            StencilKind::Central => {
                let adv = c1 / (two * dx);
                (-(diff - adv), r + two * diff, -(diff + adv))
            }
            StencilKind::Forward => {
                let adv = c1 / dx;
                (-diff, r + two * diff + adv, -(diff + adv))
            }
            StencilKind::Backward => {
                let adv = -c1 / dx;
                (-(diff + adv), r + two * diff + adv, -diff)
            }
        };
        PdeRow {
            lower,
            diag,
            upper,
            kind,
        }
    }
}

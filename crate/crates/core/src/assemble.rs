//! Direct-control discretization: one linear row per node, selected by the
//! node's control, assembled into the block system `A U + B = 0`.
//!
//! Unknowns are laid out level by level, `j = l + i M` (0-based `l`, `i`).
//! Every row is one of
//!
//! | control    | row                                             | `b` |
//! |------------|-------------------------------------------------|-----|
//! | Dirichlet  | `W_{0,i}`                                       | 0   |
//! | Continue   | `-(L̃W)_{l,i}`                                   | 0   |
//! | Dividend   | `(W_{l,i} - W_{l-1,i}) / Δx`                    | -1  |
//! | Disinvest  | `W_{l,i} - W_{l,i-1}`                           | 0   |
//! | Invest     | `W_{l,i} - lam W_{l-d,i+1} - (1-lam) W_{l-d+1,i+1}` | 0 |

use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{Grid, PdeRow, SwitchStencil};
use crate::model::FirmModel;
use crate::scalar::Scalar;

/// Which term of the variational inequality a node enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Control {
    /// `(ρ, θ, ψ) = (1, 1, 1)`: the linear PDE holds.
    Continue,
    /// `(1, 1, 0)`: pay dividends, `w' = 1`.
    Dividend,
    /// `(1, 0, ·)`: switch down one capital level.
    Disinvest,
    /// `(0, ·, ·)`: switch up one capital level.
    Invest,
}

impl Control {
    /// Tie-breaking order of the policy improvement step.
    pub const PRIORITY: [Control; 4] = [
        Control::Continue,
        Control::Dividend,
        Control::Disinvest,
        Control::Invest,
    ];

    /// Canonical `(ρ, θ, ψ)` bits.
    pub fn bits(self) -> (u8, u8, u8) {
        match self {
            Control::Continue => (1, 1, 1),
            Control::Dividend => (1, 1, 0),
            Control::Disinvest => (1, 0, 1),
            Control::Invest => (0, 1, 1),
        }
    }

    pub fn from_bits(rho: bool, theta: bool, psi: bool) -> Self {
        match (rho, theta, psi) {
            (false, _, _) => Control::Invest,
            (true, false, _) => Control::Disinvest,
            (true, true, false) => Control::Dividend,
            (true, true, true) => Control::Continue,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Control::Continue => "continue",
            Control::Dividend => "dividend",
            Control::Disinvest => "disinvest",
            Control::Invest => "invest",
        }
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Precomputed discretization of a model on a grid.
#[derive(Debug, Clone)]
pub struct Scheme<T> {
    pub model: FirmModel<T>,
    pub grid: Grid<T>,
    pub stencil: SwitchStencil<T>,
    pub beta_bar: T,
    pde: Vec<PdeRow<T>>,
}

impl<T: Scalar> Scheme<T> {
    pub fn new(model: FirmModel<T>, grid: Grid<T>) -> Result<Self> {
        if model.n_levels == 0 {
            return Err(Error::InvalidModel("model has no capital levels".into()));
        }
        if !(model.r > T::zero()) {
            return Err(Error::InvalidModel("discount rate must be positive".into()));
        }
        let beta_bar = model.beta_bar()?;
        let stencil = SwitchStencil::new(&model, &grid);
        let m = grid.m_points;
        let mut pde = Vec::with_capacity(m * model.n_levels);
        for i in 0..model.n_levels {
            for l in 0..m {
                let (c1, c2) = model.coefficients(grid.x(l), i)?;
                pde.push(PdeRow::new(c1, c2, model.r, grid.dx));
            }
        }
        Ok(Scheme {
            model,
            grid,
            stencil,
            beta_bar,
            pde,
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.grid.m_points
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.model.n_levels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m() * self.n()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, l: usize, i: usize) -> usize {
        l + i * self.m()
    }

    /// Continuation row at node `(l, i)`.
    #[inline]
    pub fn pde_row(&self, l: usize, i: usize) -> &PdeRow<T> {
        &self.pde[self.index(l, i)]
    }

    /// Why `control` cannot be used at `(l, i)`, if it cannot.
    pub fn inadmissible(&self, l: usize, i: usize, control: Control) -> Option<&'static str> {
        if l == 0 {
            return None;
        }
        if l + 1 == self.m() && control != Control::Dividend {
            return Some("the last node is forced to pay dividends");
        }
        match control {
            Control::Invest if i + 1 == self.n() => Some("no investment from the top level"),
            Control::Invest if !self.stencil.invest_reachable(l) => Some("interpolation point leaves the grid"),
            Control::Disinvest if i == 0 => Some("no disinvestment from the lowest level"),
            _ => None,
        }
    }

    #[inline]
    pub fn is_admissible(&self, l: usize, i: usize, control: Control) -> bool {
        self.inadmissible(l, i, control).is_none()
    }

    /// `w` linearly interpolated on level `i + 1` at `x_l - 2γh`.
    pub fn interpolated_up(&self, w: &[T], l: usize, i: usize) -> Option<T> {
        if i + 1 >= self.n() {
            return None;
        }
        let base = (i + 1) * self.m();
        self.stencil
            .weights(l)
            .map(|ws| ws.map(|(k, wt)| wt * w[base + k]).sum())
    }

    /// Residual of the row `control` would assemble at `(l, i)`, without
    /// admissibility checks. Node `l = 0` always yields the Dirichlet residual.
    #[inline]
    pub fn residual_unchecked(&self, w: &[T], l: usize, i: usize, control: Control) -> T {
        let j = self.index(l, i);
        if l == 0 {
            return w[j];
        }
        match control {
            Control::Continue => {
                let row = &self.pde[j];
                let up = if l + 1 < self.m() { w[j + 1] } else { T::zero() };
                row.lower * w[j - 1] + row.diag * w[j] + row.upper * up
            }
            Control::Dividend => (w[j] - w[j - 1]) / self.grid.dx - T::one(),
            Control::Disinvest => w[j] - w[j - self.m()],
            Control::Invest => match self.interpolated_up(w, l, i) {
                Some(v) => w[j] - v,
                None => T::infinity(),
            },
        }
    }
}

/// Per-node controls, laid out like the unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlField {
    m: usize,
    n: usize,
    data: Vec<Control>,
}

impl ControlField {
    /// Continuation everywhere with the dividend condition forced at `x_max`.
    pub fn initial(m: usize, n: usize) -> Self {
        let mut data = vec![Control::Continue; m * n];
        for i in 0..n {
            data[m - 1 + i * m] = Control::Dividend;
        }
        ControlField { m, n, data }
    }

    pub fn from_fn(m: usize, n: usize, mut f: impl FnMut(usize, usize) -> Control) -> Self {
        let mut data = Vec::with_capacity(m * n);
        for i in 0..n {
            for l in 0..m {
                data.push(f(l, i));
            }
        }
        ControlField { m, n, data }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize) -> Control {
        self.data[l + i * self.m]
    }

    #[inline]
    pub fn set(&mut self, l: usize, i: usize, c: Control) {
        self.data[l + i * self.m] = c;
    }

    pub fn as_slice(&self) -> &[Control] {
        &self.data
    }

    /// Number of nodes whose control differs.
    pub fn diff_count(&self, other: &ControlField) -> usize {
        self.data.iter().zip(&other.data).filter(|(a, b)| a != b).count()
    }

    pub fn validate<T: Scalar>(&self, scheme: &Scheme<T>) -> Result<()> {
        if self.m != scheme.m() || self.n != scheme.n() {
            return Err(Error::ShapeMismatch(format!(
                "controls are {}x{}, scheme is {}x{}",
                self.m,
                self.n,
                scheme.m(),
                scheme.n()
            )));
        }
        for i in 0..self.n {
            for l in 0..self.m {
                let c = self.get(l, i);
                if let Some(reason) = scheme.inadmissible(l, i, c) {
                    return Err(Error::InadmissibleControl {
                        l,
                        i,
                        control: c.name(),
                        reason,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Value per node, laid out level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface<T> {
    m: usize,
    n: usize,
    w: Vec<T>,
}

impl<T: Scalar> ValueSurface<T> {
    pub fn zeros(m: usize, n: usize) -> Self {
        ValueSurface {
            m,
            n,
            w: vec![T::zero(); m * n],
        }
    }

    pub fn from_vec(m: usize, n: usize, w: Vec<T>) -> Result<Self> {
        if w.len() != m * n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {m}x{n} surface",
                w.len()
            )));
        }
        Ok(ValueSurface { m, n, w })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize) -> T {
        self.w[l + i * self.m]
    }

    /// Values of level `i` along the mesh.
    pub fn level(&self, i: usize) -> &[T] {
        &self.w[i * self.m..(i + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<T> {
        self.w
    }
}

/// Square sparse matrix in compressed rows together with the constant vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem<T> {
    dim: usize,
    layout: Option<(usize, usize)>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> SparseSystem<T> {
    /// Builds a system from `(column, value)` rows; entries are sorted by column.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>, b: Vec<T>) -> Result<Self> {
        let dim = rows.len();
        if b.len() != dim {
            return Err(Error::ShapeMismatch("right-hand side length".into()));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, v) in row {
                if c >= dim {
                    return Err(Error::ShapeMismatch(format!("column {c} out of range")));
                }
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseSystem {
            dim,
            layout: None,
            row_ptr,
            cols,
            vals,
            b,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(M, N)` when the system was assembled on a mesh.
    pub fn layout(&self) -> Option<(usize, usize)> {
        self.layout
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[j]..self.row_ptr[j + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn row_len(&self, j: usize) -> usize {
        self.row_ptr[j + 1] - self.row_ptr[j]
    }

    pub fn diag(&self, j: usize) -> T {
        self.row(j).find(|(c, _)| *c == j).map(|(_, v)| v).unwrap_or(T::zero())
    }

    pub fn mul_vec(&self, u: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|j| self.row(j).map(|(c, v)| v * u[c]).sum())
            .collect()
    }

    /// `A u + b`.
    pub fn residual(&self, u: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|j| self.row(j).map(|(c, v)| v * u[c]).sum::<T>() + self.b[j])
            .collect()
    }

    /// Largest absolute row sum of `A`.
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|j| self.row(j).map(|(_, v)| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Writes `A` as `row col value` lines with 1-based indices.
    pub fn write_coo<W: Write>(&self, mut out: W) -> io::Result<()> {
        for j in 0..self.dim {
            for (c, v) in self.row(j) {
                writeln!(out, "{} {} {}", j + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    /// Writes `B`, one value per line.
    pub fn write_rhs<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in &self.b {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// Assembles `A(ρ, θ, ψ)` and `B(ρ, θ, ψ)` for the given controls.
pub fn assemble<T: Scalar>(scheme: &Scheme<T>, controls: &ControlField) -> Result<SparseSystem<T>> {
    controls.validate(scheme)?;
    let (m, n) = (scheme.m(), scheme.n());
    let inv_dx = T::one() / scheme.grid.dx;
    let mut rows = Vec::with_capacity(m * n);
    let mut b = Vec::with_capacity(m * n);
    for i in 0..n {
        for l in 0..m {
            let j = scheme.index(l, i);
            let mut row = Vec::with_capacity(3);
            let mut bj = T::zero();
            if l == 0 {
                row.push((j, T::one()));
            } else {
                match controls.get(l, i) {
                    Control::Continue => {
                        let p = scheme.pde_row(l, i);
                        row.push((j - 1, p.lower));
                        row.push((j, p.diag));
                        row.push((j + 1, p.upper));
                    }
                    Control::Dividend => {
                        row.push((j - 1, -inv_dx));
                        row.push((j, inv_dx));
                        bj = -T::one();
                    }
                    Control::Disinvest => {
                        row.push((j - m, -T::one()));
                        row.push((j, T::one()));
                    }
                    Control::Invest => {
                        row.push((j, T::one()));
                        let base = (i + 1) * m;
                        for (k, w) in scheme.stencil.weights(l).expect("validated") {
                            row.push((base + k, -w));
                        }
                    }
                }
            }
            rows.push(row);
            b.push(bj);
        }
    }
    let mut sys = SparseSystem::from_rows(rows, b)?;
    sys.layout = Some((m, n));
    Ok(sys)
}

/// Residual `(A U + B)_j` that `control` would produce at node `(l, i)`.
pub fn row_residual<T: Scalar>(
    scheme: &Scheme<T>,
    w: &ValueSurface<T>,
    l: usize,
    i: usize,
    control: Control,
) -> Result<T> {
    if let Some(reason) = scheme.inadmissible(l, i, control) {
        return Err(Error::InadmissibleControl {
            l,
            i,
            control: control.name(),
            reason,
        });
    }
    Ok(scheme.residual_unchecked(w.as_slice(), l, i, control))
}

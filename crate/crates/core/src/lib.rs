//! Value of a cash-constrained firm that pays dividends and switches between
//! discrete capital levels.
//!
//! The HJB variational inequality is discretized with a monotone
//! direct-control finite-difference scheme ([`assemble`]) and solved by
//! policy iteration ([`solver`]). [`regions`] reads the free boundaries off the
//! converged controls, [`checks`] certifies the discrete solution and [`mc`]
//! cross-validates it by simulating the controlled diffusion.
//!
//! Everything is generic over [`Scalar`] (`f32`, `f64`); the aliases below fix `f64`.

pub mod assemble;
pub mod checks;
pub mod error;
pub mod grid;
pub mod mc;
pub mod model;
pub mod regions;
pub mod scalar;
pub mod solver;

pub use assemble::{assemble, row_residual, Control, ControlField, Scheme, SparseSystem, ValueSurface};
pub use error::{Error, Result};
pub use grid::{build_grid, stencil_kind, switch_stencil, Grid, StencilKind, SwitchStencil};
pub use model::{DebtSpec, FirmModel, GainSpec, Violation};
pub use scalar::Scalar;
pub use solver::{policy_iteration, solve_linear, verify_m_matrix, Solution, SolverConfig, Witness};

pub type Model = FirmModel<f64>;
pub type Mesh = Grid<f64>;
pub type Discretization = Scheme<f64>;
pub type Surface = ValueSurface<f64>;
pub type System = SparseSystem<f64>;
pub type Config = SolverConfig<f64>;
pub type Solved = Solution<f64>;

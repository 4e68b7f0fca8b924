//! Linear solves, M-matrix certificates and policy iteration.

pub mod mmatrix;
pub mod policy;
pub mod skyline;

pub use mmatrix::{verify_m_matrix, MMatrixReport, Witness};
pub use policy::{
    improve_policy, policy_iteration, IterationLog, IterationRecord, MMatrixChecks, Solution, SolverConfig,
};
pub use skyline::{solve_system, LinearSolve, SkylineLu};

use crate::assemble::{SparseSystem, ValueSurface};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves an assembled system `A U + B = 0` for its value surface.
pub fn solve_linear<T: Scalar>(system: &SparseSystem<T>, tol_lin: T) -> Result<(ValueSurface<T>, T)> {
    let (m, n) = system
        .layout()
        .ok_or_else(|| Error::ShapeMismatch("system was not assembled on a mesh".into()))?;
    let s = solve_system(system, tol_lin)?;
    Ok((ValueSurface::from_vec(m, n, s.u)?, s.residual))
}

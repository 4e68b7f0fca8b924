//! Policy iteration: alternate an exact linear solve for the current
//! controls with a pointwise argmin over the admissible residuals.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::assemble::{assemble, Control, ControlField, Scheme, ValueSurface};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::solver::mmatrix::{verify_m_matrix, MMatrixReport, Witness};
use crate::solver::skyline::solve_system;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Stop once `‖W^{q+1} - W^q‖∞ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    /// Backward-error target of each linear solve.
    pub tol_lin: T,
    /// Verify the M-matrix certificate of every assembled operator.
    pub check_m_matrix: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            tol: T::lit(1e-8),
            max_iter: 200,
            tol_lin: T::lit(1e-12).max(T::lit(64.0) * T::epsilon()),
            check_m_matrix: true,
        }
    }
}

/// M-matrix certificates of one iterate's operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MMatrixChecks<T> {
    /// Witness with `η = (d + λ) ε / 2`.
    pub stated: MMatrixReport<T>,
    /// Witness with `η = (d - 1 + λ) ε / 2`.
    pub interior: MMatrixReport<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub q: usize,
    pub sup_change: T,
    pub controls_changed: usize,
    pub lin_residual: T,
    /// `min (W^{q+1} - W^q)`.
    pub mono_slack: T,
    /// Nodes whose best and second-best residual differ by less than `1e-10`.
    pub near_ties: usize,
    pub m_matrix: Option<MMatrixChecks<T>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationLog<T> {
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Scalar> IterationLog<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with columns `q, sup_change, controls_changed, lin_residual, mono_slack`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "q,sup_change,controls_changed,lin_residual,mono_slack")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{},{:e},{:e}",
                r.q, r.sup_change, r.controls_changed, r.lin_residual, r.mono_slack
            )?;
        }
        Ok(())
    }

    pub fn min_mono_slack(&self) -> T {
        self.records.iter().map(|r| r.mono_slack).fold(T::infinity(), T::min)
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub w: ValueSurface<T>,
    /// Controls of the last linear solve, i.e. the controls `w` satisfies.
    pub controls: ControlField,
    pub log: IterationLog<T>,
    pub converged: bool,
}

impl<T: Scalar> Solution<T> {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

/// Best admissible control at `(l, i)` other than `skip`, with its residual and
/// the runner-up residual. Ties keep `prev`, then follow [`Control::PRIORITY`].
fn argmin<T: Scalar>(
    scheme: &Scheme<T>,
    wv: &[T],
    l: usize,
    i: usize,
    prev: Control,
    skip: Option<Control>,
) -> (Control, T, T) {
    let allowed = |c: Control| Some(c) != skip && scheme.is_admissible(l, i, c);
    let mut best = prev;
    let mut best_val = T::infinity();
    let mut second = T::infinity();
    let prev_ok = allowed(prev);
    if prev_ok {
        best_val = scheme.residual_unchecked(wv, l, i, prev);
    }
    for c in Control::PRIORITY {
        if (prev_ok && c == prev) || !allowed(c) {
            continue;
        }
        let v = scheme.residual_unchecked(wv, l, i, c);
        if v < best_val {
            second = best_val;
            best_val = v;
            best = c;
        } else if v < second {
            second = v;
        }
    }
    (best, best_val, second)
}

/// Argmin of the admissible residuals at every free node.
///
/// Exact ties keep the previous control, then follow [`Control::PRIORITY`].
/// Returns the new field and the number of nodes with an argmin margin below `1e-10`.
pub fn improve_policy<T: Scalar>(
    scheme: &Scheme<T>,
    w: &ValueSurface<T>,
    previous: &ControlField,
) -> (ControlField, usize) {
    let (m, n) = (scheme.m(), scheme.n());
    let margin = T::lit(1e-10);
    let wv = w.as_slice();
    let per_level: Vec<(Vec<Control>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(m);
            let mut ties = 0;
            for l in 0..m {
                let prev = previous.get(l, i);
                if l == 0 {
                    out.push(prev);
                    continue;
                }
                if l + 1 == m {
                    out.push(Control::Dividend);
                    continue;
                }
                let (best, best_val, second) = argmin(scheme, wv, l, i, prev, None);
                if second - best_val < margin {
                    ties += 1;
                }
                out.push(best);
            }
            (out, ties)
        })
        .collect();
    let ties = per_level.iter().map(|(_, t)| *t).sum();
    let mut it = per_level.into_iter().flat_map(|(c, _)| c);
    let field = ControlField::from_fn(m, n, |_, _| it.next().expect("sized"));
    (field, ties)
}

/// Runs policy iteration from `(ρ, θ, ψ) = (1, 1, 1)` and `W = 0`.
///
/// Reaching `max_iter` is not an error: the last iterate is returned with
/// `converged = false`.
pub fn policy_iteration<T: Scalar>(scheme: &Scheme<T>, config: &SolverConfig<T>) -> Result<Solution<T>> {
    let (m, n) = (scheme.m(), scheme.n());
    let mut controls = ControlField::initial(m, n);
    let mut w_prev = ValueSurface::zeros(m, n);
    let mut log = IterationLog::default();
    let witnesses = config.check_m_matrix.then(|| {
        (
            Witness::stated(scheme).vector(scheme),
            Witness::interior(scheme).vector(scheme),
        )
    });

    for q in 0..config.max_iter.max(1) {
        let system = assemble(scheme, &controls)?;
        let m_matrix = witnesses.as_ref().map(|(stated, interior)| MMatrixChecks {
            stated: verify_m_matrix(&system, stated),
            interior: verify_m_matrix(&system, interior),
        });
        let solve = solve_system(&system, config.tol_lin)?;
        let w = ValueSurface::from_vec(m, n, solve.u)?;

        let mut sup_change = T::zero();
        let mut mono_slack = T::infinity();
        for (a, b) in w.as_slice().iter().zip(w_prev.as_slice()) {
            let delta = *a - *b;
            sup_change = sup_change.max(delta.abs());
            mono_slack = mono_slack.min(delta);
        }
        let (next, near_ties) = improve_policy(scheme, &w, &controls);
        let controls_changed = next.diff_count(&controls);
        log.records.push(IterationRecord {
            q,
            sup_change,
            controls_changed,
            lin_residual: solve.residual,
            mono_slack,
            near_ties,
            m_matrix,
        });

        if sup_change <= config.tol {
            return Ok(Solution {
                w,
                controls,
                log,
                converged: true,
            });
        }
        if q + 1 == config.max_iter.max(1) {
            return Ok(Solution {
                w,
                controls,
                log,
                converged: false,
            });
        }
        controls = next;
        w_prev = w;
    }
    unreachable!("loop returns on its last iteration")
}

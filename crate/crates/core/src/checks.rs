//! Invariant suite for a solved surface.
//!
//! Each check reports the worst observed margin (negative means violated)
//! so reports stay informative when everything passes.

use std::fmt;

use crate::assemble::{Control, Scheme, ValueSurface};
use crate::scalar::Scalar;
use crate::solver::policy::IterationLog;
use crate::solver::Solution;

/// Tolerances of [`invariant_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack on the growth bound `W ≤ x + μβ̄/r`.
    pub growth: f64,
    /// Slack on the obstacle inequalities.
    pub obstacle: f64,
    /// Relative slack of the VI certificate, scaled by `1 + |W|`.
    pub vi: f64,
    /// Round-off allowance of the slope bound, scaled by `1 + |W|`.
    pub slope: f64,
    /// Allowed decrease between successive iterates.
    pub monotone: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            growth: 1e-6,
            obstacle: 1e-8,
            vi: 1e-7,
            slope: 1e-12,
            monotone: 1e-10 * 35.0,
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest margin found; `≥ 0` when the inequality holds without slack.
    pub worst: f64,
    /// Node `(l, i)` (0-based) attaining `worst`, if any.
    pub at: Option<(usize, usize)>,
    /// Whether a failure should stop a run.
    pub hard: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{verdict} {} (worst margin {:.3e}", self.name, self.worst)?;
        if let Some((l, i)) = self.at {
            write!(f, " at l={l}, level={}", i + 1)?;
        }
        f.write_str(")")
    }
}

/// Running minimum of a margin over the nodes.
struct Worst {
    value: f64,
    at: Option<(usize, usize)>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: f64::INFINITY,
            at: None,
        }
    }

    fn see(&mut self, margin: f64, l: usize, i: usize) {
        if margin < self.value || margin.is_nan() {
            self.value = margin;
            self.at = Some((l, i));
        }
    }

    fn check(self, name: &'static str, slack: f64, hard: bool) -> Check {
        Check {
            name,
            passed: self.value >= -slack,
            worst: self.value,
            at: self.at,
            hard,
        }
    }
}

fn f<T: Scalar>(v: T) -> f64 {
    v.to_f64_lossy()
}

/// `0 ≤ W ≤ μβ̄/r + x_max`.
pub fn check_bounds<T: Scalar>(scheme: &Scheme<T>, w: &ValueSurface<T>) -> Check {
    let cap = f(scheme.model.mu * scheme.beta_bar / scheme.model.r + scheme.grid.x_max);
    let mut worst = Worst::new();
    for i in 0..scheme.n() {
        for l in 0..scheme.m() {
            let v = f(w.get(l, i));
            worst.see(v.min(cap - v), l, i);
        }
    }
    worst.check("bounds", 0.0, false)
}

/// `W_{l,i} ≥ W_{l-1,i} + Δx` for `l ≥ 1`, up to `tol (1 + |W|)` of round-off.
pub fn check_slope<T: Scalar>(scheme: &Scheme<T>, w: &ValueSurface<T>, tol: f64) -> Check {
    let dx = f(scheme.grid.dx);
    let mut worst = Worst::new();
    let mut ok = true;
    for i in 0..scheme.n() {
        for l in 1..scheme.m() {
            let (hi, lo) = (f(w.get(l, i)), f(w.get(l - 1, i)));
            let margin = hi - lo - dx;
            ok &= margin >= -tol * (1.0 + hi.abs());
            worst.see(margin, l, i);
        }
    }
    let mut c = worst.check("slope", f64::INFINITY, true);
    c.passed = ok;
    c
}

/// `W_{l,i} ≤ x_l + μβ̄/r + tol`.
pub fn check_growth<T: Scalar>(scheme: &Scheme<T>, w: &ValueSurface<T>, tol: f64) -> Check {
    let perp = f(scheme.model.mu * scheme.beta_bar / scheme.model.r);
    let mut worst = Worst::new();
    for i in 0..scheme.n() {
        for l in 0..scheme.m() {
            worst.see(f(scheme.grid.x(l)) + perp - f(w.get(l, i)), l, i);
        }
    }
    worst.check("growth", tol, false)
}

/// `W_{l,i} ≥ W_{l,i-1} - tol` for every level above the first.
pub fn check_disinvest_obstacle<T: Scalar>(scheme: &Scheme<T>, w: &ValueSurface<T>, tol: f64) -> Check {
    let mut worst = Worst::new();
    for i in 1..scheme.n() {
        for l in 1..scheme.m() {
            worst.see(f(w.get(l, i) - w.get(l, i - 1)), l, i);
        }
    }
    worst.check("obstacle_disinvest", tol, false)
}

/// `W_{l,i} ≥ W_{i+1}(x_l - 2γh) - tol` wherever the interpolation is on the mesh.
pub fn check_invest_obstacle<T: Scalar>(scheme: &Scheme<T>, w: &ValueSurface<T>, tol: f64) -> Check {
    let wv = w.as_slice();
    let mut worst = Worst::new();
    for i in 0..scheme.n().saturating_sub(1) {
        for l in 1..scheme.m() {
            if let Some(up) = scheme.interpolated_up(wv, l, i) {
                worst.see(f(wv[scheme.index(l, i)] - up), l, i);
            }
        }
    }
    worst.check("obstacle_invest", tol, false)
}

/// Discrete VI certificate at every free node: the smallest admissible
/// residual vanishes and none is negative, both within `tol (1 + |W|)`.
///
/// `worst` is the smallest of `tol (1 + |W|) - |min residual|` and
/// `residual + tol (1 + |W|)`, so it is negative exactly on failure.
pub fn vi_certificate<T: Scalar>(scheme: &Scheme<T>, w: &ValueSurface<T>, tol: f64) -> Check {
    let wv = w.as_slice();
    let mut worst = Worst::new();
    for i in 0..scheme.n() {
        for l in 1..scheme.m() - 1 {
            let slack = tol * (1.0 + f(wv[scheme.index(l, i)]).abs());
            let mut lowest = f64::INFINITY;
            for c in Control::PRIORITY {
                if scheme.is_admissible(l, i, c) {
                    lowest = lowest.min(f(scheme.residual_unchecked(wv, l, i, c)));
                }
            }
            worst.see((slack - lowest.abs()).min(lowest + slack), l, i);
        }
    }
    worst.check("vi_certificate", 0.0, false)
}

/// `min (W^{q+1} - W^q) ≥ -tol` over all iterations.
pub fn check_monotone<T: Scalar>(log: &IterationLog<T>, tol: f64) -> Check {
    let mut worst = Worst::new();
    for r in &log.records {
        worst.see(f(r.mono_slack), r.q, 0);
    }
    let mut c = worst.check("monotone_iterates", tol, false);
    c.at = None;
    c
}

/// Sign pattern plus `A W > 0` for the witness with `η = (d - 1 + λ) ε / 2`, every iteration.
pub fn check_m_matrix<T: Scalar>(log: &IterationLog<T>) -> Check {
    m_matrix_check(log, "m_matrix", true, |c| c.interior)
}

/// Same as [`check_m_matrix`] with `η = (d + λ) ε / 2`.
pub fn check_m_matrix_stated<T: Scalar>(log: &IterationLog<T>) -> Check {
    m_matrix_check(log, "m_matrix_stated_witness", false, |c| c.stated)
}

fn m_matrix_check<T: Scalar>(
    log: &IterationLog<T>,
    name: &'static str,
    hard: bool,
    pick: impl Fn(&crate::solver::policy::MMatrixChecks<T>) -> crate::solver::mmatrix::MMatrixReport<T>,
) -> Check {
    let mut worst = Worst::new();
    let mut ok = !log.is_empty();
    for r in &log.records {
        match &r.m_matrix {
            Some(checks) => {
                let rep = pick(checks);
                ok &= rep.passed();
                worst.see(f(rep.min_slack), r.q, 0);
            }
            None => ok = false,
        }
    }
    Check {
        name,
        passed: ok,
        worst: worst.value,
        at: None,
        hard,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub checks: Vec<Check>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Every check marked hard passed.
    pub fn hard_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs every check on a solution.
pub fn invariant_suite<T: Scalar>(scheme: &Scheme<T>, solution: &Solution<T>, tol: &Tolerances) -> InvariantReport {
    let w = &solution.w;
    let mut checks = vec![
        check_bounds(scheme, w),
        check_slope(scheme, w, tol.slope),
        check_growth(scheme, w, tol.growth),
        check_disinvest_obstacle(scheme, w, tol.obstacle),
        check_invest_obstacle(scheme, w, tol.obstacle),
        vi_certificate(scheme, w, tol.vi),
        check_monotone(&solution.log, tol.monotone),
    ];
    if solution.log.records.iter().all(|r| r.m_matrix.is_some()) {
        checks.push(check_m_matrix(&solution.log));
        checks.push(check_m_matrix_stated(&solution.log));
    }
    InvariantReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::model::{FirmModel, GainSpec};
    use crate::solver::{policy_iteration, SolverConfig};

    fn scheme(n: usize, m: usize) -> Scheme<f64> {
        let mut model = FirmModel::reference();
        model.n_levels = n;
        model.gain = GainSpec::Constant { beta_bar: 2.0 };
        Scheme::new(model, build_grid(10.0, m).unwrap()).unwrap()
    }

    fn surface(s: &Scheme<f64>, f: impl Fn(usize, usize) -> f64) -> ValueSurface<f64> {
        let w = (0..s.n())
            .flat_map(|i| (0..s.m()).map(move |l| (l, i)))
            .map(|(l, i)| f(l, i))
            .collect();
        ValueSurface::from_vec(s.m(), s.n(), w).unwrap()
    }

    #[test]
    fn slope_catches_flat_step() {
        let s = scheme(1, 11);
        let w = surface(&s, |l, _| if l == 5 { 4.0 } else { l as f64 });
        let c = check_slope(&s, &w, 1e-12);
        assert!(!c.passed);
        assert_eq!(c.at, Some((5, 0)));
        assert!(check_slope(&s, &surface(&s, |l, _| l as f64), 1e-12).passed);
    }

    #[test]
    fn bounds_and_growth() {
        let s = scheme(1, 11);
        // μβ̄/r = 25 and x_max = 10
        assert!(check_bounds(&s, &surface(&s, |_, _| 35.0)).passed);
        assert!(!check_bounds(&s, &surface(&s, |_, _| 35.5)).passed);
        assert!(!check_bounds(&s, &surface(&s, |_, _| -1e-9)).passed);
        let g = check_growth(&s, &surface(&s, |l, _| l as f64 + 25.0), 1e-6);
        assert!(g.passed && g.worst.abs() < 1e-12);
        assert!(!check_growth(&s, &surface(&s, |l, _| l as f64 + 25.1), 1e-6).passed);
    }

    #[test]
    fn obstacles() {
        let s = scheme(2, 11);
        let below = surface(&s, |l, i| l as f64 - i as f64);
        assert!(!check_disinvest_obstacle(&s, &below, 1e-8).passed);
        assert!(check_invest_obstacle(&s, &below, 1e-8).passed);
        let above = surface(&s, |l, i| l as f64 + i as f64);
        assert!(check_disinvest_obstacle(&s, &above, 1e-8).passed);
        assert!(!check_invest_obstacle(&s, &above, 1e-8).passed);
    }

    #[test]
    fn zero_surface_fails_certificate() {
        // dividend residual -1 everywhere
        let s = scheme(1, 11);
        let c = vi_certificate(&s, &surface(&s, |_, _| 0.0), 1e-7);
        assert!(!c.passed);
        assert!((c.worst + 1.0).abs() < 1e-6);
    }

    #[test]
    fn suite_passes_on_small_solve() {
        let mut model = FirmModel::reference();
        model.n_levels = 3;
        model.gain = GainSpec::Constant { beta_bar: 2.0 };
        model.gamma = 0.05;
        let s = Scheme::new(model, build_grid(10.0, 201).unwrap()).unwrap();
        let sol = policy_iteration(&s, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        let rep = invariant_suite(&s, &sol, &Tolerances::default());
        for c in &rep.checks {
            if c.name != "m_matrix_stated_witness" {
                assert!(c.passed, "{c}");
            }
        }
        assert!(rep.hard_passed());
    }
}

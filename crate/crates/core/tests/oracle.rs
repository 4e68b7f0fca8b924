//! Single level, constant gain, no switching cost: the value function is known
//! in closed form and pins both the barrier and the surface.

use firmvi::regions::{classify, extract_boundaries};
use firmvi::{build_grid, policy_iteration, FirmModel, GainSpec, Scalar, Scheme, SolverConfig};

const MU: f64 = 0.25;
const SIGMA: f64 = 0.40;
const R: f64 = 0.02;
const BETA: f64 = 2.0;

struct ClosedForm {
    theta_plus: f64,
    theta_minus: f64,
    barrier: f64,
}

impl ClosedForm {
    fn new() -> Self {
        let a = 0.5 * SIGMA * SIGMA * BETA * BETA;
        let b = MU * BETA;
        let disc = (b * b + 4.0 * a * R).sqrt();
        let theta_plus = (-b + disc) / (2.0 * a);
        let theta_minus = (-b - disc) / (2.0 * a);
        let barrier = (theta_minus.powi(2) / theta_plus.powi(2)).ln() / (theta_plus - theta_minus);
        ClosedForm {
            theta_plus,
            theta_minus,
            barrier,
        }
    }

    fn value(&self, x: f64) -> f64 {
        let (p, m, b) = (self.theta_plus, self.theta_minus, self.barrier);
        let scale = p * (p * b).exp() - m * (m * b).exp();
        if x <= b {
            ((p * x).exp() - (m * x).exp()) / scale
        } else {
            ((p * b).exp() - (m * b).exp()) / scale + (x - b)
        }
    }
}

fn model<T: Scalar>() -> FirmModel<T> {
    FirmModel {
        mu: T::lit(MU),
        sigma: T::lit(SIGMA),
        r: T::lit(R),
        gamma: T::zero(),
        k1: T::lit(1e-6),
        h: T::lit(1e-6),
        n_levels: 1,
        gain: GainSpec::Constant { beta_bar: T::lit(BETA) },
        debt: firmvi::DebtSpec::Linear { lambda: T::lit(0.10) },
    }
}

#[test]
fn closed_form_constants() {
    let cf = ClosedForm::new();
    assert!((cf.theta_plus - 0.039_025_1).abs() < 1e-6, "{}", cf.theta_plus);
    assert!((cf.theta_minus + 1.601_525_1).abs() < 1e-6, "{}", cf.theta_minus);
    assert!((cf.barrier - 4.528_38).abs() < 1e-4, "{}", cf.barrier);
    // Smooth fit puts v(b*) at the perpetuity μβ/r.
    assert!((cf.value(cf.barrier) - MU * BETA / R).abs() < 1e-9);
    assert_eq!(cf.value(0.0), 0.0);
}

fn check<T: Scalar>(m_points: usize, tol: f64, barrier_cells: f64) {
    let cf = ClosedForm::new();
    let scheme = Scheme::new(model::<T>(), build_grid(T::lit(10.0), m_points).unwrap()).unwrap();
    let config = SolverConfig {
        tol: T::lit(tol),
        ..SolverConfig::default()
    };
    let solution = policy_iteration(&scheme, &config).unwrap();
    assert!(
        solution.converged,
        "not converged after {} iterations",
        solution.iterations()
    );

    let bounds = extract_boundaries(&classify(&scheme, &solution).unwrap(), &scheme);
    let dx = scheme.grid.dx.to_f64_lossy();
    let b = bounds.b[0].to_f64_lossy();
    assert!(
        (b - cf.barrier).abs() <= barrier_cells * dx,
        "barrier {b} vs {}",
        cf.barrier
    );

    let mut err = 0.0_f64;
    for l in 0..scheme.m() {
        let x = scheme.grid.x(l).to_f64_lossy();
        err = err.max((solution.w.get(l, 0).to_f64_lossy() - cf.value(x)).abs());
    }
    assert!(err <= 5e-3 * cf.value(cf.barrier), "sup error {err}");
}

#[test]
fn matches_closed_form_f64() {
    check::<f64>(4001, 1e-8, 3.0);
}

// Single precision cannot resolve second differences on the fine grid, and
// the barrier node flips on round-off once the iterates are that close.
#[test]
fn matches_closed_form_f32_on_a_coarse_grid() {
    check::<f32>(201, 1e-2, 4.0);
}

//! Monte Carlo estimate of the discounted dividend stream under the solved policy.
//!
//! Paths are Euler steps of the shifted equity diffusion. After every step
//! the label of the nearest node decides the action: switch levels, pay the
//! excess over `b_i` and reflect, or do nothing. Paths stop at bankruptcy
//! (`x ≤ 0`) or at the horizon.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::assemble::Scheme;
use crate::error::{Error, Result};
use crate::model::DebtSpec;
use crate::regions::{classify, extract_boundaries, Boundaries, Label, RegionMap};
use crate::scalar::Scalar;
use crate::solver::Solution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Brownian-bridge test for ruin between two positive samples.
    pub bridge: bool,
}

impl SimConfig {
    /// `dt = (Δx / (σ β̄))² / 4`, so a typical step spans about half a cell.
    pub fn for_scheme<T: Scalar>(scheme: &Scheme<T>) -> Self {
        let s = (scheme.model.sigma * scheme.beta_bar).to_f64_lossy();
        let dx = scheme.grid.dx.to_f64_lossy();
        SimConfig {
            dt: 0.25 * (dx / s).powi(2),
            n_paths: 20_000,
            horizon: 300.0,
            seed: 0,
            bridge: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidSimConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidSimConfig("n_paths must be at least 1".into()));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidSimConfig(format!(
                "horizon must be ≥ 0, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub start_x: f64,
    /// 0-based level of the start state.
    pub level: usize,
    pub n_paths: usize,
    pub mean: f64,
    pub std_err: f64,
    pub bankruptcy_fraction: f64,
    /// Mean ruin time over the ruined paths, if any.
    pub mean_bankruptcy_time: Option<f64>,
    /// Steps that ended beyond `x_max`.
    pub overflow_events: u64,
}

impl SimResult {
    /// `(mean - reference) / std_err`.
    pub fn z_score(&self, reference: f64) -> f64 {
        if self.std_err > 0.0 {
            (self.mean - reference) / self.std_err
        } else if self.mean == reference {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - reference)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    value: f64,
    ruin: Option<f64>,
    overflow: u64,
}

/// Feedback policy read off a region map.
#[derive(Debug, Clone)]
pub struct Policy {
    m: usize,
    n: usize,
    dx: f64,
    x_max: f64,
    labels: Vec<Label>,
    /// Dividend barrier per level, shifted coordinates.
    pub barriers: Vec<f64>,
    /// `2 γ h`.
    shift: f64,
    r: f64,
    /// `μ β(k_i)`, `σ β(k_i)` and `(1 - γ) k_i` per level.
    drift: Vec<f64>,
    vol: Vec<f64>,
    debt_free: Vec<f64>,
    debt_slope: f64,
}

impl Policy {
    pub fn new<T: Scalar>(scheme: &Scheme<T>, map: &RegionMap, bounds: &Boundaries<T>) -> Result<Self> {
        let model = &scheme.model;
        let n = scheme.n();
        if map.m() != scheme.m() || map.n() != n || bounds.b.len() != n {
            return Err(Error::ShapeMismatch("region map does not match the scheme".into()));
        }
        let mut drift = Vec::with_capacity(n);
        let mut vol = Vec::with_capacity(n);
        let mut debt_free = Vec::with_capacity(n);
        for i in 0..n {
            let beta = model.gain_at(i)?;
            drift.push((model.mu * beta).to_f64_lossy());
            vol.push((model.sigma * beta).to_f64_lossy());
            debt_free.push(((T::one() - model.gamma) * model.level(i)?).to_f64_lossy());
        }
        let DebtSpec::Linear { lambda } = model.debt;
        Ok(Policy {
            m: scheme.m(),
            n,
            dx: scheme.grid.dx.to_f64_lossy(),
            x_max: scheme.grid.x_max.to_f64_lossy(),
            labels: map.labels().to_vec(),
            barriers: bounds.b.iter().map(|b| b.to_f64_lossy()).collect(),
            shift: (T::lit(2.0) * model.gamma * model.h).to_f64_lossy(),
            r: model.r.to_f64_lossy(),
            drift,
            vol,
            debt_free,
            debt_slope: lambda.to_f64_lossy(),
        })
    }

    /// Policy of a converged solution.
    pub fn from_solution<T: Scalar>(scheme: &Scheme<T>, solution: &Solution<T>) -> Result<Self> {
        let map = classify(scheme, solution)?;
        let bounds = extract_boundaries(&map, scheme);
        Self::new(scheme, &map, &bounds)
    }

    fn label(&self, x: f64, i: usize) -> Label {
        let l = if x > 0.0 {
            ((x / self.dx).round() as usize).min(self.m - 1)
        } else {
            0
        };
        self.labels[l + i * self.m]
    }

    #[inline]
    fn c1(&self, x: f64, i: usize) -> f64 {
        self.drift[i] - self.debt_slope * (self.debt_free[i] - x).max(0.0)
    }

    /// Applies switches until the state rests, then pays any dividend.
    /// Returns the payment.
    fn act(&self, x: &mut f64, i: &mut usize) -> f64 {
        for _ in 0..self.n {
            match self.label(*x, *i) {
                Label::Invest if *i + 1 < self.n => {
                    *x -= self.shift;
                    *i += 1;
                }
                Label::Disinvest if *i > 0 => *i -= 1,
                Label::Dividend => {
                    let b = self.barriers[*i];
                    if *x > b {
                        let pay = *x - b;
                        *x = b;
                        return pay;
                    }
                    return 0.0;
                }
                _ => return 0.0,
            }
        }
        0.0
    }

    fn path(&self, x0: f64, level: usize, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> PathOutcome {
        let (mut x, mut i) = (x0, level);
        let mut out = PathOutcome {
            value: 0.0,
            ruin: None,
            overflow: 0,
        };
        if x <= 0.0 {
            out.ruin = Some(0.0);
            return out;
        }
        out.value += self.act(&mut x, &mut i);
        let sqrt_dt = cfg.dt.sqrt();
        let step_discount = (-self.r * cfg.dt).exp();
        let steps = (cfg.horizon / cfg.dt).ceil() as u64;
        let mut discount = 1.0;
        for n in 1..=steps {
            let xi: f64 = rng.sample(StandardNormal);
            let s = self.vol[i];
            let next = x + self.c1(x, i) * cfg.dt + s * sqrt_dt * xi;
            let t = n as f64 * cfg.dt;
            discount *= step_discount;
            let crossed = next <= 0.0
                || (cfg.bridge && s > 0.0 && {
                    // crossing probability of the bridge; below e^-40 it is not sampled
                    let a = 2.0 * x * next / (s * s * cfg.dt);
                    a < 40.0 && rng.random::<f64>() < (-a).exp()
                });
            if crossed {
                out.ruin = Some(t);
                return out;
            }
            x = next;
            if x > self.x_max {
                out.overflow += 1;
            }
            let pay = self.act(&mut x, &mut i);
            if pay > 0.0 {
                out.value += discount * pay;
            }
        }
        out
    }

    /// Estimates the value of starting at `x` on the 0-based level `level`.
    pub fn simulate(&self, x: f64, level: usize, cfg: &SimConfig) -> Result<SimResult> {
        cfg.validate()?;
        if level >= self.n || !(x >= 0.0) || x > self.x_max {
            return Err(Error::StartOutsideGrid { x, level });
        }
        let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(p as u64);
                self.path(x, level, cfg, &mut rng)
            })
            .collect();
        Ok(summarize(x, level, &outcomes))
    }
}

fn summarize(x: f64, level: usize, outcomes: &[PathOutcome]) -> SimResult {
    let n = outcomes.len();
    let mean = outcomes.iter().map(|o| o.value).sum::<f64>() / n as f64;
    let var = if n > 1 {
        outcomes.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let ruined: Vec<f64> = outcomes.iter().filter_map(|o| o.ruin).collect();
    SimResult {
        start_x: x,
        level,
        n_paths: n,
        mean,
        std_err: (var / n as f64).sqrt(),
        bankruptcy_fraction: ruined.len() as f64 / n as f64,
        mean_bankruptcy_time: (!ruined.is_empty()).then(|| ruined.iter().sum::<f64>() / ruined.len() as f64),
        overflow_events: outcomes.iter().map(|o| o.overflow).sum(),
    }
}

/// [`Policy::from_solution`] followed by [`Policy::simulate`]; refuses unconverged solutions.
pub fn simulate_policy<T: Scalar>(
    scheme: &Scheme<T>,
    solution: &Solution<T>,
    start: (f64, usize),
    cfg: &SimConfig,
) -> Result<SimResult> {
    Policy::from_solution(scheme, solution)?.simulate(start.0, start.1, cfg)
}

//! Economic primitives of the firm: capital levels, the gain function and the
//! cost of the credit line.
//!
//! Capital levels are indexed from `0` in code (`k_0 = k1`, `k_{N-1} = k1 + (N-1) h`);
//! files written by the CLI use 1-based level numbers.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{positive_part, Scalar};

/// Gain function `β` evaluated on the capital levels.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSpec<T> {
    /// `β(x) = beta_bar (1 - exp(-eta x / beta_bar))`.
    Exponential { beta_bar: T, eta: T },
    /// `β ≡ beta_bar`.
    Constant { beta_bar: T },
    /// Explicit values at the capital levels, as `(level, value)` pairs sorted by level.
    Table(Vec<(T, T)>),
}

impl<T: Scalar> GainSpec<T> {
    /// Evaluates the closed-form variants at an arbitrary capital amount.
    /// Tables only answer at their own abscissae.
    pub fn eval(&self, x: T) -> Result<T> {
        match self {
            GainSpec::Exponential { beta_bar, eta } => Ok(*beta_bar * (T::one() - (-(*eta) * x / *beta_bar).exp())),
            GainSpec::Constant { beta_bar } => Ok(*beta_bar),
            GainSpec::Table(rows) => {
                let tol = T::lit(1e-9) * (T::one() + x.abs());
                rows.iter()
                    .find(|(k, _)| (*k - x).abs() <= tol)
                    .map(|(_, v)| *v)
                    .ok_or(Error::MissingGainEntry {
                        level: x.to_f64_lossy(),
                    })
            }
        }
    }
}

/// Cost of the credit line `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DebtSpec<T> {
    /// `α(x) = lambda x`.
    Linear { lambda: T },
}

impl<T: Scalar> DebtSpec<T> {
    #[inline]
    pub fn cost(&self, debt: T) -> T {
        match *self {
            DebtSpec::Linear { lambda } => lambda * debt,
        }
    }

    /// Smallest slope of `α` over `[0, ∞)`.
    pub fn min_slope(&self) -> T {
        match *self {
            DebtSpec::Linear { lambda } => lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmModel<T> {
    pub mu: T,
    pub sigma: T,
    /// Discount rate.
    pub r: T,
    /// Proportional switching (and liquidation) cost.
    pub gamma: T,
    pub k1: T,
    /// Spacing of the capital levels.
    pub h: T,
    pub n_levels: usize,
    pub gain: GainSpec<T>,
    pub debt: DebtSpec<T>,
}

/// A violated standing assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositive(&'static str),
    NoLevels,
    GammaOutOfRange,
    /// `gamma = 0` with several levels: switching round trips cost nothing.
    FreeSwitching,
    DebtSlopeTooLow,
    DebtNonZeroAtOrigin,
    GainUnavailable(usize),
    GainDecreasing {
        level: usize,
    },
    GainNotBounded,
    GainNonPositive {
        level: usize,
    },
    GainTableLength {
        expected: usize,
        found: usize,
    },
    NonFinite(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositive(name) => write!(f, "{name} must be > 0"),
            Violation::NoLevels => write!(f, "n_levels must be >= 1"),
            Violation::GammaOutOfRange => write!(f, "gamma out of [0,1)"),
            Violation::FreeSwitching => write!(f, "gamma must be > 0 when there is more than one level"),
            Violation::DebtSlopeTooLow => write!(f, "debt slope ≤ r"),
            Violation::DebtNonZeroAtOrigin => write!(f, "debt cost must vanish at 0"),
            Violation::GainUnavailable(i) => write!(f, "gain undefined at level {}", i + 1),
            Violation::GainDecreasing { level } => {
                write!(f, "gain decreases between levels {} and {}", level, level + 1)
            }
            Violation::GainNotBounded => write!(f, "gain must be bounded by beta_bar"),
            Violation::GainNonPositive { level } => {
                write!(f, "gain must be positive at level {}", level + 1)
            }
            Violation::GainTableLength { expected, found } => {
                write!(f, "gain table has {found} entries, expected {expected}")
            }
            Violation::NonFinite(name) => write!(f, "{name} is not finite"),
        }
    }
}

impl<T: Scalar> FirmModel<T> {
    /// Returns every violated assumption; the model is admissible iff the list is empty.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let named = [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("r", self.r),
            ("gamma", self.gamma),
            ("k1", self.k1),
            ("h", self.h),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                out.push(Violation::NonFinite(name));
            }
        }
        for (name, v) in [("mu", self.mu), ("sigma", self.sigma), ("r", self.r), ("k1", self.k1)] {
            if !(v > T::zero()) {
                out.push(Violation::NonPositive(name));
            }
        }
        if !(self.h > T::zero()) {
            out.push(Violation::NonPositive("h"));
        }
        if self.n_levels == 0 {
            out.push(Violation::NoLevels);
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            out.push(Violation::GammaOutOfRange);
        }
        if self.gamma == T::zero() && self.n_levels > 1 {
            out.push(Violation::FreeSwitching);
        }
        if !(self.debt.min_slope() > self.r) {
            out.push(Violation::DebtSlopeTooLow);
        }
        if self.debt.cost(T::zero()) != T::zero() {
            out.push(Violation::DebtNonZeroAtOrigin);
        }
        if let GainSpec::Table(rows) = &self.gain {
            if rows.len() != self.n_levels {
                out.push(Violation::GainTableLength {
                    expected: self.n_levels,
                    found: rows.len(),
                });
            }
        }
        let mut prev: Option<T> = None;
        let mut values = Vec::with_capacity(self.n_levels);
        for i in 0..self.n_levels {
            match self.gain_at(i) {
                Ok(v) => {
                    if !(v > T::zero()) {
                        out.push(Violation::GainNonPositive { level: i });
                    }
                    if let Some(p) = prev {
                        if v < p {
                            out.push(Violation::GainDecreasing { level: i });
                        }
                    }
                    prev = Some(v);
                    values.push(v);
                }
                Err(_) => out.push(Violation::GainUnavailable(i)),
            }
        }
        if let GainSpec::Exponential { beta_bar, eta } = self.gain {
            if !(beta_bar > T::zero()) {
                out.push(Violation::NonPositive("beta_bar"));
            }
            if !(eta > T::zero()) {
                out.push(Violation::NonPositive("eta"));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            out.push(Violation::GainNotBounded);
        }
        out
    }

    /// Capital level `k_i` (0-based `i`).
    pub fn level(&self, i: usize) -> Result<T> {
        self.check_level(i)?;
        Ok(self.k1 + T::of_usize(i) * self.h)
    }

    /// `β(k_i)`.
    pub fn gain_at(&self, i: usize) -> Result<T> {
        let k = self.level(i)?;
        self.gain.eval(k)
    }

    /// `β(k_N)`, the largest gain over the capital levels.
    pub fn beta_bar(&self) -> Result<T> {
        if self.n_levels == 0 {
            return Err(Error::InvalidModel("model has no capital levels".into()));
        }
        self.gain_at(self.n_levels - 1)
    }

    /// Drift and diffusion coefficients of the shifted generator at equity `x ≥ 0`:
    /// `C1 = μβ(k_i) - α(((1-γ)k_i - x)^+)`, `C2 = σ²β(k_i)²/2`.
    pub fn coefficients(&self, x: T, i: usize) -> Result<(T, T)> {
        let beta = self.gain_at(i)?;
        let k = self.level(i)?;
        let debt = positive_part((T::one() - self.gamma) * k - x);
        let c1 = self.mu * beta - self.debt.cost(debt);
        let c2 = self.sigma * self.sigma * beta * beta / T::lit(2.0);
        Ok((c1, c2))
    }

    /// `μ β̄ / r`, the perpetuity value of the largest cash flow.
    pub fn perpetuity_bound(&self) -> Result<T> {
        Ok(self.mu * self.beta_bar()? / self.r)
    }

    fn check_level(&self, i: usize) -> Result<()> {
        if i >= self.n_levels {
            Err(Error::LevelOutOfRange {
                index: i,
                levels: self.n_levels,
            })
        } else {
            Ok(())
        }
    }
}

impl FirmModel<f64> {
    /// Parameter set of the reference experiment: linear debt `λ = 0.10`,
    /// exponential gain `β̄ = 2, η = 1`, `γ = 1e-3`, 20 levels up to `k_max = 10`,
    /// with uniform levels `k1 = h = k_max / N`.
    pub fn reference() -> Self {
        let n = 20;
        let k_max = 10.0;
        let h = k_max / n as f64;
        FirmModel {
            mu: 0.25,
            sigma: 0.40,
            r: 0.02,
            gamma: 1e-3,
            k1: h,
            h,
            n_levels: n,
            gain: GainSpec::Exponential {
                beta_bar: 2.0,
                eta: 1.0,
            },
            debt: DebtSpec::Linear { lambda: 0.10 },
        }
    }
}

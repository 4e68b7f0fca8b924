//! Control regions, free boundaries and their shape.
//!
//! A node's [`Label`] is read off its control. Where several terms of the
//! variational inequality vanish at once (paying dividends while switching,
//! say) the argmin picks only one of them, so shape statements are checked
//! against the binding sets instead: a node belongs to a region when that
//! region's residual is zero, whichever control the solver kept.

use std::fmt;

use crate::assemble::{Control, ControlField, Scheme, ValueSurface};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::Solution;

/// Region label of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Liquidation,
    Continuation,
    Dividend,
    Disinvest,
    Invest,
}

impl Label {
    pub fn from_control(l: usize, c: Control) -> Self {
        if l == 0 {
            return Label::Liquidation;
        }
        match c {
            Control::Continue => Label::Continuation,
            Control::Dividend => Label::Dividend,
            Control::Disinvest => Label::Disinvest,
            Control::Invest => Label::Invest,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Liquidation => "liquidation",
            Label::Continuation => "continuation",
            Label::Dividend => "dividend",
            Label::Disinvest => "disinvest",
            Label::Invest => "invest",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Label::Liquidation => 0,
            Label::Continuation => CONT,
            Label::Dividend => DIV,
            Label::Disinvest => DOWN,
            Label::Invest => UP,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const CONT: u8 = 1;
const DIV: u8 = 2;
const DOWN: u8 = 4;
const UP: u8 = 8;

/// The six areas of the optimal-control picture, plus the liquidation edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Area {
    Liquidation,
    Continuation,
    Disinvest,
    Invest,
    Dividend,
    DisinvestDividend,
    InvestDividend,
}

impl Area {
    pub const SIX: [Area; 6] = [
        Area::Disinvest,
        Area::Invest,
        Area::Continuation,
        Area::InvestDividend,
        Area::DisinvestDividend,
        Area::Dividend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Area::Liquidation => "liquidation",
            Area::Continuation => "continuation",
            Area::Disinvest => "disinvest",
            Area::Invest => "invest",
            Area::Dividend => "dividend",
            Area::DisinvestDividend => "disinvest+dividend",
            Area::InvestDividend => "invest+dividend",
        }
    }
}

/// Labels plus binding-set membership for every node, level-major like the unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    m: usize,
    n: usize,
    labels: Vec<Label>,
    members: Vec<u8>,
}

impl RegionMap {
    /// Map whose binding sets are the labels themselves.
    pub fn from_labels(m: usize, n: usize, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != m * n {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {m} x {n} map",
                labels.len()
            )));
        }
        let members = labels.iter().map(|l| l.bit()).collect();
        Ok(RegionMap { m, n, labels, members })
    }

    /// Builds the map from one row of labels per level.
    pub fn from_rows(rows: &[Vec<Label>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch("ragged label rows".into()));
        }
        Self::from_labels(m, rows.len(), rows.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, l: usize, i: usize) -> Label {
        self.labels[l + i * self.m]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    fn has(&self, l: usize, i: usize, bit: u8) -> bool {
        self.members[l + i * self.m] & bit != 0
    }

    pub fn in_dividend(&self, l: usize, i: usize) -> bool {
        self.has(l, i, DIV)
    }

    pub fn in_invest(&self, l: usize, i: usize) -> bool {
        self.has(l, i, UP)
    }

    pub fn in_disinvest(&self, l: usize, i: usize) -> bool {
        self.has(l, i, DOWN)
    }

    pub fn area(&self, l: usize, i: usize) -> Area {
        if l == 0 {
            return Area::Liquidation;
        }
        let div = self.in_dividend(l, i);
        match self.get(l, i) {
            Label::Invest if div => Area::InvestDividend,
            Label::Disinvest if div => Area::DisinvestDividend,
            Label::Invest => Area::Invest,
            Label::Disinvest => Area::Disinvest,
            Label::Continuation => Area::Continuation,
            Label::Liquidation => Area::Liquidation,
            Label::Dividend if self.in_invest(l, i) => Area::InvestDividend,
            Label::Dividend if self.in_disinvest(l, i) => Area::DisinvestDividend,
            Label::Dividend => Area::Dividend,
        }
    }

    /// Node count per area, in [`Area::SIX`] order.
    pub fn area_counts(&self) -> [(Area, usize); 6] {
        let mut counts = Area::SIX.map(|a| (a, 0));
        for i in 0..self.n {
            for l in 1..self.m {
                let a = self.area(l, i);
                if let Some(slot) = counts.iter_mut().find(|(b, _)| *b == a) {
                    slot.1 += 1;
                }
            }
        }
        counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Share of free nodes (liquidation edge excluded) labeled continuation.
    pub fn continuation_fraction(&self) -> f64 {
        let free = self.n * (self.m - 1);
        self.count(Label::Continuation) as f64 / free as f64
    }
}

/// Binding tolerance of [`classify`], relative to `1 + |W|`.
pub const BINDING_TOL: f64 = 1e-7;

/// Labels the converged controls and records which residuals vanish.
pub fn classify<T: Scalar>(scheme: &Scheme<T>, solution: &Solution<T>) -> Result<RegionMap> {
    if !solution.converged {
        return Err(Error::NotConverged);
    }
    classify_with(scheme, &solution.w, &solution.controls, T::lit(BINDING_TOL))
}

/// [`classify`] for an arbitrary surface and control field.
pub fn classify_with<T: Scalar>(
    scheme: &Scheme<T>,
    w: &ValueSurface<T>,
    controls: &ControlField,
    tol: T,
) -> Result<RegionMap> {
    let (m, n) = (scheme.m(), scheme.n());
    controls.validate(scheme)?;
    let wv = w.as_slice();
    let mut labels = Vec::with_capacity(m * n);
    let mut members = Vec::with_capacity(m * n);
    for i in 0..n {
        for l in 0..m {
            let label = Label::from_control(l, controls.get(l, i));
            let mut bits = label.bit();
            if l > 0 {
                let slack = tol * (T::one() + wv[scheme.index(l, i)].abs());
                for (c, bit) in [
                    (Control::Continue, CONT),
                    (Control::Dividend, DIV),
                    (Control::Disinvest, DOWN),
                    (Control::Invest, UP),
                ] {
                    if scheme.is_admissible(l, i, c) && scheme.residual_unchecked(wv, l, i, c).abs() <= slack {
                        bits |= bit;
                    }
                }
            }
            labels.push(label);
            members.push(bits);
        }
    }
    Ok(RegionMap { m, n, labels, members })
}

/// Free boundaries of one level, as node indices (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelBoundary {
    /// First node of the dividend suffix.
    pub b: usize,
    /// Last node of the disinvest prefix.
    pub d: Option<usize>,
    /// First node of the invest suffix.
    pub a: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundaries<T> {
    pub levels: Vec<LevelBoundary>,
    /// Abscissae of `levels`, shifted coordinates.
    pub b: Vec<T>,
    pub d: Vec<Option<T>>,
    pub a: Vec<Option<T>>,
    /// `γ k_i`, added to a shifted abscissa to get book equity.
    pub offset: Vec<T>,
    /// Smallest 1-based level without an invest region, `N + 1` if none.
    pub k_star: usize,
    /// Every level invests, so `k_star` is the `N + 1` default.
    pub k_star_defaulted: bool,
}

impl<T: Scalar> Boundaries<T> {
    pub fn original(&self, shifted: T, i: usize) -> T {
        shifted + self.offset[i]
    }
}

/// Last free node; `l = M - 1` is forced and carries no information.
fn top_free(m: usize) -> usize {
    m.saturating_sub(2)
}

fn level_boundary(map: &RegionMap, i: usize) -> LevelBoundary {
    let m = map.m();
    let mut b = m - 1;
    while b > 1 && map.in_dividend(b - 1, i) {
        b -= 1;
    }
    let mut d = None;
    for l in 1..m.saturating_sub(1) {
        if !map.in_disinvest(l, i) {
            break;
        }
        d = Some(l);
    }
    let mut a = None;
    let top = top_free(m);
    let mut l = top + 1;
    while l > 1 && map.in_invest(l - 1, i) {
        l -= 1;
        a = Some(l);
    }
    LevelBoundary { b, d, a }
}

/// Reads `b_i`, `d_i`, `a_i` and `k*` off the binding sets.
pub fn extract_boundaries<T: Scalar>(map: &RegionMap, scheme: &Scheme<T>) -> Boundaries<T> {
    let grid = &scheme.grid;
    let levels: Vec<LevelBoundary> = (0..map.n()).map(|i| level_boundary(map, i)).collect();
    let invests = |i: usize| (1..map.m()).any(|l| map.in_invest(l, i));
    let first_empty = (0..map.n()).find(|&i| !invests(i));
    let offset = (0..map.n())
        .map(|i| scheme.model.gamma * (scheme.model.k1 + T::of_usize(i) * scheme.model.h))
        .collect();
    Boundaries {
        b: levels.iter().map(|lb| grid.x(lb.b)).collect(),
        d: levels.iter().map(|lb| lb.d.map(|l| grid.x(l))).collect(),
        a: levels.iter().map(|lb| lb.a.map(|l| grid.x(l))).collect(),
        offset,
        k_star: first_empty.map_or(map.n() + 1, |i| i + 1),
        k_star_defaulted: first_empty.is_none(),
        levels,
    }
}

/// A departure from the expected region shape, levels 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeViolation {
    DividendNotSuffix { level: usize, exceptions: usize },
    DisinvestNotPrefix { level: usize, stray: usize },
    InvestNotSuffix { level: usize, stray: usize },
    InvestAboveKStar { level: usize, k_star: usize },
}

impl fmt::Display for ShapeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeViolation::DividendNotSuffix { level, exceptions } => {
                write!(f, "level {level}: dividend not suffix ({exceptions} nodes outside)")
            }
            ShapeViolation::DisinvestNotPrefix { level, stray } => {
                write!(f, "level {level}: disinvest not prefix ({stray} nodes outside)")
            }
            ShapeViolation::InvestNotSuffix { level, stray } => {
                write!(f, "level {level}: invest not suffix ({stray} nodes outside)")
            }
            ShapeViolation::InvestAboveKStar { level, k_star } => {
                write!(f, "level {level}: invest present at or above k* = {k_star}")
            }
        }
    }
}

/// Default number of isolated dividend nodes tolerated below `b_i`.
pub const ISOLATED_DIVIDEND_TOL: usize = 2;

/// Checks that dividend and invest sets are suffixes, disinvest a prefix,
/// and that the investing levels are exactly those below `k*`.
pub fn check_shape(map: &RegionMap, isolated_tol: usize) -> Vec<ShapeViolation> {
    let mut out = Vec::new();
    let mut k_star = None;
    for i in 0..map.n() {
        let lb = level_boundary(map, i);
        let level = i + 1;
        let exceptions = (1..lb.b).filter(|&l| map.in_dividend(l, i)).count();
        if exceptions > isolated_tol {
            out.push(ShapeViolation::DividendNotSuffix { level, exceptions });
        }
        let prefix_end = lb.d.map_or(1, |d| d + 1);
        let stray = (prefix_end..map.m().saturating_sub(1))
            .filter(|&l| map.in_disinvest(l, i))
            .count();
        if stray > 0 {
            out.push(ShapeViolation::DisinvestNotPrefix { level, stray });
        }
        let suffix_start = lb.a.unwrap_or(top_free(map.m()) + 1);
        let stray = (1..suffix_start).filter(|&l| map.in_invest(l, i)).count();
        if stray > 0 {
            out.push(ShapeViolation::InvestNotSuffix { level, stray });
        }
        let invests = (1..map.m()).any(|l| map.in_invest(l, i));
        match k_star {
            None if !invests => k_star = Some(level),
            Some(k) if invests => out.push(ShapeViolation::InvestAboveKStar { level, k_star: k }),
            _ => {}
        }
    }
    out
}

/// Levels (1-based) whose top `ceil(0.05 M)` nodes contain a continuation label.
pub fn xmax_insufficient(map: &RegionMap) -> Vec<usize> {
    let m = map.m();
    let band = (m as f64 * 0.05).ceil() as usize;
    (0..map.n())
        .filter(|&i| (m - band.min(m)..m).any(|l| map.get(l, i) == Label::Continuation))
        .map(|i| i + 1)
        .collect()
}

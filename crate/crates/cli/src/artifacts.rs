//! Artifact formats. Every writer renders into memory so the bytes can be
//! hashed for the manifest before they hit the disk.

use std::fmt::Write as _;

use firmvi::checks::InvariantReport;
use firmvi::mc::SimResult;
use firmvi::regions::{Boundaries, Label, RegionMap, ShapeViolation};
use firmvi::{Discretization, Solved, Surface};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// `level, k_i, x_shifted, x_original, W`, one row per node, levels 1-based.
pub fn values_csv(scheme: &Discretization, w: &Surface) -> String {
    let mut out = String::from("level,k_i,x_shifted,x_original,W\n");
    for i in 0..scheme.n() {
        let k = scheme.model.k1 + i as f64 * scheme.model.h;
        let offset = scheme.model.gamma * k;
        for l in 0..scheme.m() {
            let x = scheme.grid.x(l);
            let _ = writeln!(out, "{},{},{},{},{}", i + 1, k, x, x + offset, w.get(l, i));
        }
    }
    out
}

pub fn color(label: Label) -> [u8; 3] {
    match label {
        Label::Continuation => [0, 0, 0],
        Label::Dividend => [0, 255, 0],
        Label::Invest => [0, 0, 255],
        Label::Disinvest => [255, 165, 0],
        Label::Liquidation => [255, 255, 255],
    }
}

/// Plain (`P3`) pixmap, one pixel per node, top row is the highest level.
pub fn regions_ppm(map: &RegionMap) -> String {
    let (m, n) = (map.m(), map.n());
    let mut out = format!("P3\n{m} {n}\n255\n");
    for i in (0..n).rev() {
        for l in 0..m {
            let [r, g, b] = color(map.get(l, i));
            let _ = writeln!(out, "{r} {g} {b}");
        }
    }
    out
}

#[derive(Serialize)]
struct LevelJson {
    level: usize,
    k_i: f64,
    b_i: f64,
    b_i_original: f64,
    d_i: Option<f64>,
    d_i_original: Option<f64>,
    a_i: Option<f64>,
    a_i_original: Option<f64>,
}

#[derive(Serialize)]
struct BoundariesJson {
    k_star: usize,
    k_star_defaulted: bool,
    levels: Vec<LevelJson>,
    violations: Vec<String>,
    xmax_warning_levels: Vec<usize>,
}

pub fn boundaries_json(
    scheme: &Discretization,
    bounds: &Boundaries<f64>,
    violations: &[ShapeViolation],
    xmax_levels: &[usize],
) -> String {
    let levels = (0..scheme.n())
        .map(|i| LevelJson {
            level: i + 1,
            k_i: scheme.model.k1 + i as f64 * scheme.model.h,
            b_i: bounds.b[i],
            b_i_original: bounds.original(bounds.b[i], i),
            d_i: bounds.d[i],
            d_i_original: bounds.d[i].map(|d| bounds.original(d, i)),
            a_i: bounds.a[i],
            a_i_original: bounds.a[i].map(|a| bounds.original(a, i)),
        })
        .collect();
    let doc = BoundariesJson {
        k_star: bounds.k_star,
        k_star_defaulted: bounds.k_star_defaulted,
        levels,
        violations: violations.iter().map(|v| v.to_string()).collect(),
        xmax_warning_levels: xmax_levels.iter().map(|i| i + 1).collect(),
    };
    pretty(&doc)
}

pub fn iterations_csv(solution: &Solved) -> String {
    let mut buf = Vec::new();
    solution.log.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is ascii")
}

/// MC rows paired with the solved value at the start node.
pub fn mc_csv(rows: &[(SimResult, f64)]) -> String {
    let mut out = String::from("start_x,level,mc_mean,std_err,pde_value,z_score\n");
    for (r, w) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.start_x,
            r.level + 1,
            r.mean,
            r.std_err,
            w,
            r.z_score(*w)
        );
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
pub struct CheckJson {
    pub name: &'static str,
    pub passed: bool,
    pub hard: bool,
    pub worst: f64,
    /// `[l, level]`, node index 0-based and level 1-based.
    pub at: Option<[usize; 2]>,
}

#[derive(Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Verification {
    pub converged: bool,
    pub iterations: usize,
    pub min_mono_slack: f64,
    pub hard_passed: bool,
    pub all_passed: bool,
    pub checks: Vec<CheckJson>,
    pub shape_violations: Vec<String>,
    pub xmax_warning_levels: Vec<usize>,
    pub k_star: Option<usize>,
    pub area_counts: Vec<(String, usize)>,
    pub continuation_nodes: Option<usize>,
    pub manifest: Vec<ManifestEntry>,
}

impl Verification {
    pub fn checks_from(report: &InvariantReport) -> Vec<CheckJson> {
        report
            .checks
            .iter()
            .map(|c| CheckJson {
                name: c.name,
                passed: c.passed,
                hard: c.hard,
                worst: c.worst,
                at: c.at.map(|(l, i)| [l, i + 1]),
            })
            .collect()
    }

    pub fn render(&self) -> String {
        pretty(self)
    }
}

fn pretty<S: Serialize>(doc: &S) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable");
    s.push('\n');
    s
}

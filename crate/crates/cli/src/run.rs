//! Single solves, sweeps and the grid-refinement study.

use std::fs;
use std::path::{Path, PathBuf};

use firmvi::checks::{invariant_suite, InvariantReport, Tolerances};
use firmvi::mc::{Policy, SimConfig, SimResult};
use firmvi::regions::{
    check_shape, classify, extract_boundaries, xmax_insufficient, Boundaries, Label, RegionMap, ShapeViolation,
    ISOLATED_DIVIDEND_TOL,
};
use firmvi::{assemble, build_grid, policy_iteration, Discretization, Solved};
use rayon::prelude::*;
use toml::Value;

use crate::artifacts::{self, ManifestEntry, Verification};
use crate::config::RunConfig;
use crate::CliError;

/// Process exit status, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success = 0,
    ConfigError = 1,
    NotConverged = 2,
    InvariantFailure = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Everything computed for one config, before anything is written.
pub struct Analysis {
    pub scheme: Discretization,
    pub solution: Solved,
    /// Present only for converged solutions.
    pub post: Option<PostProcess>,
}

pub struct PostProcess {
    pub map: RegionMap,
    pub bounds: Boundaries<f64>,
    pub violations: Vec<ShapeViolation>,
    pub xmax_levels: Vec<usize>,
    pub report: InvariantReport,
}

impl Analysis {
    pub fn status(&self) -> Status {
        match &self.post {
            None => Status::NotConverged,
            Some(p) if !p.report.hard_passed() => Status::InvariantFailure,
            Some(_) => Status::Success,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let Some(p) = &self.post else {
            out.push(format!(
                "policy iteration stopped after {} iterations without converging",
                self.solution.iterations()
            ));
            return out;
        };
        if !p.xmax_levels.is_empty() {
            let levels: Vec<String> = p.xmax_levels.iter().map(|i| (i + 1).to_string()).collect();
            out.push(format!(
                "continuation reaches the top 5% of the grid at levels {}; x_max may be too small",
                levels.join(",")
            ));
        }
        out.extend(p.violations.iter().map(|v| format!("shape: {v}")));
        out.extend(p.report.checks.iter().filter(|c| !c.passed).map(|c| c.to_string()));
        out
    }
}

/// Builds the scheme, runs policy iteration and post-processes a converged result.
pub fn analyze(cfg: &RunConfig) -> Result<Analysis, CliError> {
    let violations = cfg.model.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Config(format!(
            "model violates its assumptions: {}",
            list.join("; ")
        )));
    }
    let grid = build_grid(cfg.x_max, cfg.m_points)?;
    let scheme = Discretization::new(cfg.model.clone(), grid)?;
    let solution = policy_iteration(&scheme, &cfg.solver)?;
    let post = if solution.converged {
        let map = classify(&scheme, &solution)?;
        let bounds = extract_boundaries(&map, &scheme);
        Some(PostProcess {
            violations: check_shape(&map, ISOLATED_DIVIDEND_TOL),
            xmax_levels: xmax_insufficient(&map),
            report: invariant_suite(&scheme, &solution, &Tolerances::default()),
            map,
            bounds,
        })
    } else {
        None
    };
    Ok(Analysis { scheme, solution, post })
}

/// Ten interior start nodes spread over the levels, as `(l, i)` 0-based.
pub fn default_starts(scheme: &Discretization, count: usize) -> Vec<(usize, usize)> {
    let (m, n) = (scheme.m(), scheme.n());
    (0..count)
        .map(|k| {
            let l = ((k + 1) * (m - 1) / (2 * count)).max(1);
            let i = if count > 1 {
                (k * (n - 1) + (count - 1) / 2) / (count - 1)
            } else {
                0
            };
            (l, i)
        })
        .collect()
}

/// Simulates the extracted policy from the configured start states.
pub fn monte_carlo(cfg: &RunConfig, analysis: &Analysis) -> Result<Vec<(SimResult, f64)>, CliError> {
    let post = analysis.post.as_ref().ok_or(firmvi::Error::NotConverged)?;
    let scheme = &analysis.scheme;
    let mut sim = SimConfig::for_scheme(scheme);
    sim.dt = cfg.mc.dt.unwrap_or(sim.dt);
    sim.n_paths = cfg.mc.n_paths;
    sim.horizon = cfg.mc.horizon;
    sim.seed = cfg.mc.seed;
    sim.bridge = cfg.mc.bridge;
    sim.validate()?;
    let starts: Vec<(f64, usize)> = match &cfg.mc.starts {
        Some(list) => list
            .iter()
            .map(|&(x, level)| {
                if level == 0 || level > scheme.n() {
                    Err(firmvi::Error::StartOutsideGrid { x, level })
                } else {
                    Ok((x, level - 1))
                }
            })
            .collect::<Result<_, _>>()?,
        None => default_starts(scheme, cfg.mc.n_starts)
            .into_iter()
            .map(|(l, i)| (scheme.grid.x(l), i))
            .collect(),
    };
    let policy = Policy::new(scheme, &post.map, &post.bounds)?;
    starts
        .into_iter()
        .map(|(x, i)| {
            let result = policy.simulate(x, i, &sim)?;
            let w = analysis.solution.w.get(scheme.grid.nearest(x), i);
            Ok((result, w))
        })
        .collect()
}

/// Summary of one written run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub status: Status,
    pub iterations: usize,
    pub converged: bool,
    pub continuation_nodes: Option<usize>,
    pub continuation_fraction: Option<f64>,
    pub k_star: Option<usize>,
    pub warnings: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    manifest: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.manifest.push(ManifestEntry {
            file: name.to_string(),
            sha256: artifacts::sha256_hex(contents),
        });
        Ok(())
    }
}

/// Writes the artifacts of an analysis into `dir`.
pub fn write_run(cfg: &RunConfig, analysis: &Analysis, dir: &Path) -> Result<RunReport, CliError> {
    fs::create_dir_all(dir)?;
    let mut out = Writer {
        dir,
        manifest: Vec::new(),
    };
    let scheme = &analysis.scheme;
    let solution = &analysis.solution;

    out.put("iterations.csv", artifacts::iterations_csv(solution).as_bytes())?;
    if cfg.emit.values {
        out.put("values.csv", artifacts::values_csv(scheme, &solution.w).as_bytes())?;
    }
    if cfg.dump_system {
        let system = assemble(scheme, &solution.controls)?;
        let mut coo = Vec::new();
        system.write_coo(&mut coo)?;
        out.put("system.coo", &coo)?;
        let mut rhs = Vec::new();
        system.write_rhs(&mut rhs)?;
        out.put("rhs.txt", &rhs)?;
    }
    let mut status = analysis.status();
    let mut warnings = analysis.warnings();
    if let Some(p) = &analysis.post {
        if cfg.emit.regions {
            out.put("regions.ppm", artifacts::regions_ppm(&p.map).as_bytes())?;
        }
        if cfg.emit.boundaries {
            let doc = artifacts::boundaries_json(scheme, &p.bounds, &p.violations, &p.xmax_levels);
            out.put("boundaries.json", doc.as_bytes())?;
        }
        if cfg.mc.enabled {
            match monte_carlo(cfg, analysis) {
                Ok(rows) => out.put("mc.csv", artifacts::mc_csv(&rows).as_bytes())?,
                Err(e) => {
                    status = status.max(e.status());
                    warnings.push(format!("monte carlo: {e}"));
                }
            }
        }
    }

    let post = analysis.post.as_ref();
    let verification = Verification {
        converged: solution.converged,
        iterations: solution.iterations(),
        min_mono_slack: solution.log.min_mono_slack(),
        hard_passed: post.is_some_and(|p| p.report.hard_passed()),
        all_passed: post.is_some_and(|p| p.report.passed()),
        checks: post.map(|p| Verification::checks_from(&p.report)).unwrap_or_default(),
        shape_violations: post
            .map(|p| p.violations.iter().map(|v| v.to_string()).collect())
            .unwrap_or_default(),
        xmax_warning_levels: post
            .map(|p| p.xmax_levels.iter().map(|i| i + 1).collect())
            .unwrap_or_default(),
        k_star: post.map(|p| p.bounds.k_star),
        area_counts: post
            .map(|p| {
                p.map
                    .area_counts()
                    .iter()
                    .map(|(a, c)| (a.name().to_string(), *c))
                    .collect()
            })
            .unwrap_or_default(),
        continuation_nodes: post.map(|p| p.map.count(Label::Continuation)),
        manifest: out.manifest,
    };
    fs::write(dir.join("verification.json"), verification.render())?;

    Ok(RunReport {
        dir: dir.to_path_buf(),
        status,
        iterations: solution.iterations(),
        converged: solution.converged,
        continuation_nodes: post.map(|p| p.map.count(Label::Continuation)),
        continuation_fraction: post.map(|p| p.map.continuation_fraction()),
        k_star: post.map(|p| p.bounds.k_star),
        warnings,
    })
}

fn value_label(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs `cfg`, or every entry of its sweep concurrently, each in its own directory.
pub fn execute(cfg: &RunConfig) -> Result<Vec<RunReport>, CliError> {
    let Some(sweep) = &cfg.sweep else {
        let analysis = analyze(cfg)?;
        return Ok(vec![write_run(cfg, &analysis, &cfg.output_dir)?]);
    };
    let short = sweep.key.rsplit('.').next().unwrap_or(&sweep.key);
    let runs: Vec<(String, RunConfig)> = sweep
        .values
        .iter()
        .map(|v| Ok((value_label(v), cfg.with_key(&sweep.key, v.clone())?)))
        .collect::<Result<_, CliError>>()?;
    let reports: Vec<RunReport> = runs
        .par_iter()
        .map(|(label, run)| {
            let dir = cfg.output_dir.join(format!("{short}={label}"));
            let analysis = analyze(run)?;
            write_run(run, &analysis, &dir)
        })
        .collect::<Result<_, CliError>>()?;

    let mut table = format!("{short},status,iterations,converged,continuation_nodes,continuation_fraction,k_star\n");
    for ((label, _), r) in runs.iter().zip(&reports) {
        table.push_str(&format!(
            "{label},{},{},{},{},{},{}\n",
            r.status.code(),
            r.iterations,
            r.converged,
            opt(r.continuation_nodes),
            opt(r.continuation_fraction),
            opt(r.k_star),
        ));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("sweep.csv"), table)?;
    Ok(reports)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineRow {
    pub m_points: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm distance to the previous (coarser) solution on the coarsest grid.
    pub sup_diff: Option<f64>,
    /// Previous `sup_diff` over this one.
    pub ratio: Option<f64>,
}

/// Solves on `M, 2M-1, 4M-3, ...` and compares successive solutions on the coarse nodes.
pub fn refine_study(cfg: &RunConfig, doublings: usize) -> Result<Vec<RefineRow>, CliError> {
    if doublings == 0 {
        return Err(CliError::Config("refinement needs at least one doubling".into()));
    }
    let sizes: Vec<usize> = (0..=doublings).map(|k| ((cfg.m_points - 1) << k) + 1).collect();
    let solved: Vec<Analysis> = sizes
        .par_iter()
        .map(|&m| {
            let mut run = cfg.clone();
            run.m_points = m;
            analyze(&run)
        })
        .collect::<Result<_, CliError>>()?;
    let coarse = cfg.m_points;
    let mut rows: Vec<RefineRow> = Vec::with_capacity(sizes.len());
    for (k, a) in solved.iter().enumerate() {
        let sup_diff = (k > 0).then(|| {
            let prev = &solved[k - 1].solution.w;
            let cur = &a.solution.w;
            let mut d = 0.0_f64;
            for i in 0..a.scheme.n() {
                for l in 0..coarse {
                    d = d.max((prev.get(l << (k - 1), i) - cur.get(l << k, i)).abs());
                }
            }
            d
        });
        let ratio = match (rows.last().and_then(|r| r.sup_diff), sup_diff) {
            (Some(p), Some(c)) => Some(p / c),
            _ => None,
        };
        rows.push(RefineRow {
            m_points: sizes[k],
            iterations: a.solution.iterations(),
            converged: a.solution.converged,
            sup_diff,
            ratio,
        });
    }
    Ok(rows)
}

pub fn refine_csv(rows: &[RefineRow]) -> String {
    let mut out = String::from("m_points,iterations,converged,sup_diff,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.m_points,
            r.iterations,
            r.converged,
            opt(r.sup_diff),
            opt(r.ratio)
        ));
    }
    out
}

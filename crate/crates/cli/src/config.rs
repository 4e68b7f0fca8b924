//! Run configuration.
//!
//! A config is a TOML document whose keys live in five sections; dotted keys
//! (`model.mu = 0.25`) and `[model]` tables are interchangeable. Every key is
//! optional and falls back to the reference problem. See `docs/config.md` for
//! the full grammar.

use std::path::{Path, PathBuf};

use firmvi::{Config, DebtSpec, GainSpec, Model};
use serde::Deserialize;
use toml::{Table, Value};

use crate::CliError;

/// Artifacts a run may emit besides the iteration log and verification report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub values: bool,
    pub regions: bool,
    pub boundaries: bool,
}

impl Emit {
    pub const ALL: Emit = Emit {
        values: true,
        regions: true,
        boundaries: true,
    };

    /// Parses `all` or a comma-separated subset of `values,regions,boundaries`.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let mut emit = Emit {
            values: false,
            regions: false,
            boundaries: false,
        };
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "all" => emit = Emit::ALL,
                "values" => emit.values = true,
                "regions" => emit.regions = true,
                "boundaries" => emit.boundaries = true,
                other => return Err(CliError::Config(format!("unknown artifact `{other}` in emit"))),
            }
        }
        Ok(emit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Fully qualified dotted key, e.g. `model.gamma`.
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub enabled: bool,
    /// Overrides of the per-scheme defaults; `None` keeps the default.
    pub dt: Option<f64>,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub bridge: bool,
    /// Start states as `(x, level)` with 1-based levels.
    pub starts: Option<Vec<(f64, usize)>>,
    pub n_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub x_max: f64,
    pub m_points: usize,
    pub solver: Config,
    pub output_dir: PathBuf,
    pub emit: Emit,
    pub dump_system: bool,
    pub sweep: Option<Sweep>,
    pub mc: McSettings,
    /// The document the config was built from, kept so sweeps can rewrite keys.
    pub table: Table,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    model: RawModel,
    grid: RawGrid,
    solver: RawSolver,
    outputs: RawOutputs,
    sweep: Option<RawSweep>,
    mc: RawMc,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawModel {
    mu: Option<f64>,
    sigma: Option<f64>,
    r: Option<f64>,
    gamma: Option<f64>,
    k1: Option<f64>,
    h: Option<f64>,
    k_max: Option<f64>,
    n_levels: Option<usize>,
    gain: RawGain,
    debt: RawDebt,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGain {
    kind: Option<String>,
    beta_bar: Option<f64>,
    eta: Option<f64>,
    /// Gain at each level, lowest first.
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDebt {
    kind: Option<String>,
    lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGrid {
    x_max: Option<f64>,
    m_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<usize>,
    tol_lin: Option<f64>,
    check_m_matrix: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutputs {
    directory: Option<PathBuf>,
    emit: Option<String>,
    dump_system: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    key: String,
    values: Vec<Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMc {
    enabled: Option<bool>,
    dt: Option<f64>,
    n_paths: Option<usize>,
    horizon: Option<f64>,
    seed: Option<u64>,
    bridge: Option<bool>,
    starts: Option<Vec<(f64, usize)>>,
    n_starts: Option<usize>,
}

/// Short names accepted by `--sweep` and their qualified keys.
const SHORT_KEYS: &[(&str, &str)] = &[
    ("mu", "model.mu"),
    ("sigma", "model.sigma"),
    ("r", "model.r"),
    ("gamma", "model.gamma"),
    ("k1", "model.k1"),
    ("h", "model.h"),
    ("k_max", "model.k_max"),
    ("n_levels", "model.n_levels"),
    ("levels", "model.n_levels"),
    ("beta_bar", "model.gain.beta_bar"),
    ("eta", "model.gain.eta"),
    ("lambda", "model.debt.lambda"),
    ("x_max", "grid.x_max"),
    ("m_points", "grid.m_points"),
    ("tol", "solver.tol"),
    ("max_iter", "solver.max_iter"),
];

/// Expands a short sweep key to its dotted form; qualified keys pass through.
pub fn qualify_key(key: &str) -> Result<String, CliError> {
    if key.contains('.') {
        return Ok(key.to_string());
    }
    SHORT_KEYS
        .iter()
        .find(|(short, _)| *short == key)
        .map(|(_, full)| full.to_string())
        .ok_or_else(|| CliError::Config(format!("unknown sweep key `{key}`")))
}

/// Sets `key` (dotted) in `table`, creating intermediate tables.
pub fn set_key(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::Config(format!("bad key `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("`{part}` in `{key}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses a scalar written on the command line: integer, float, bool, else string.
pub fn parse_scalar(text: &str) -> Value {
    let t = text.trim();
    if let Ok(i) = t.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(f) = t.parse::<f64>() {
        Value::Float(f)
    } else if let Ok(b) = t.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(t.to_string())
    }
}

/// Parses `key=v1,v2,...`.
pub fn parse_sweep_flag(spec: &str) -> Result<(String, Vec<Value>), CliError> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("sweep `{spec}` is not of the form key=v1,v2")))?;
    let values: Vec<Value> = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(parse_scalar)
        .collect();
    Ok((qualify_key(key.trim())?, values))
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Config(e.to_string()))
}

impl RunConfig {
    pub fn from_table(table: Table) -> Result<Self, CliError> {
        let raw: RawConfig = Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let reference = Model::reference();

        let m = raw.model;
        let n_levels = m.n_levels.unwrap_or(reference.n_levels);
        if n_levels == 0 {
            return Err(CliError::Config("model.n_levels must be at least 1".into()));
        }
        let (k1, h) = levels(m.k1, m.h, m.k_max, n_levels)?;
        let gain = gain(m.gain, k1, h, n_levels)?;
        let debt = match m.debt.kind.as_deref().unwrap_or("linear") {
            "linear" => DebtSpec::Linear {
                lambda: m.debt.lambda.unwrap_or(0.10),
            },
            other => return Err(CliError::Config(format!("unknown model.debt.kind `{other}`"))),
        };
        let model = Model {
            mu: m.mu.unwrap_or(reference.mu),
            sigma: m.sigma.unwrap_or(reference.sigma),
            r: m.r.unwrap_or(reference.r),
            gamma: m.gamma.unwrap_or(reference.gamma),
            k1,
            h,
            n_levels,
            gain,
            debt,
        };

        let defaults = Config::default();
        let solver = Config {
            tol: raw.solver.tol.unwrap_or(defaults.tol),
            max_iter: raw.solver.max_iter.unwrap_or(defaults.max_iter),
            tol_lin: raw.solver.tol_lin.unwrap_or(defaults.tol_lin),
            check_m_matrix: raw.solver.check_m_matrix.unwrap_or(defaults.check_m_matrix),
        };
        if !(solver.tol > 0.0) || solver.max_iter == 0 {
            return Err(CliError::Config(
                "solver.tol must be > 0 and solver.max_iter ≥ 1".into(),
            ));
        }

        let sweep = match raw.sweep {
            Some(s) if s.values.is_empty() => {
                return Err(CliError::Config("sweep.values must not be empty".into()));
            }
            Some(s) => Some(Sweep {
                key: qualify_key(&s.key)?,
                values: s.values,
            }),
            None => None,
        };

        let mc = McSettings {
            enabled: raw.mc.enabled.unwrap_or(false),
            dt: raw.mc.dt,
            n_paths: raw.mc.n_paths.unwrap_or(20_000),
            horizon: raw.mc.horizon.unwrap_or(300.0),
            seed: raw.mc.seed.unwrap_or(0),
            bridge: raw.mc.bridge.unwrap_or(true),
            starts: raw.mc.starts,
            n_starts: raw.mc.n_starts.unwrap_or(10),
        };

        Ok(RunConfig {
            model,
            x_max: raw.grid.x_max.unwrap_or(10.0),
            m_points: raw.grid.m_points.unwrap_or(2001),
            solver,
            output_dir: raw.outputs.directory.unwrap_or_else(|| PathBuf::from("out")),
            emit: match raw.outputs.emit {
                Some(spec) => Emit::parse(&spec)?,
                None => Emit::ALL,
            },
            dump_system: raw.outputs.dump_system.unwrap_or(false),
            sweep,
            mc,
            table,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_table(parse_table(text)?)
    }

    /// Copy of this config's document with one key replaced, re-validated.
    pub fn with_key(&self, key: &str, value: Value) -> Result<Self, CliError> {
        let mut table = self.table.clone();
        set_key(&mut table, key, value)?;
        table.remove("sweep");
        Self::from_table(table)
    }
}

/// Resolves `(k1, h)` from the capital keys.
fn levels(k1: Option<f64>, h: Option<f64>, k_max: Option<f64>, n: usize) -> Result<(f64, f64), CliError> {
    match (h, k_max) {
        (Some(_), Some(_)) => Err(CliError::Config("give exactly one of model.h and model.k_max".into())),
        (Some(h), None) => Ok((k1.unwrap_or(h), h)),
        (None, k_max) => {
            let k_max = k_max.unwrap_or(10.0);
            match k1 {
                None => Ok((k_max / n as f64, k_max / n as f64)),
                Some(k1) if n == 1 => {
                    if k1 != k_max {
                        return Err(CliError::Config(
                            "with one level, model.k1 must equal model.k_max".into(),
                        ));
                    }
                    Ok((k1, k1))
                }
                Some(k1) => Ok((k1, (k_max - k1) / (n - 1) as f64)),
            }
        }
    }
}

fn gain(raw: RawGain, k1: f64, h: f64, n: usize) -> Result<GainSpec<f64>, CliError> {
    let beta_bar = raw.beta_bar.unwrap_or(2.0);
    match raw.kind.as_deref().unwrap_or("exponential") {
        "exponential" => Ok(GainSpec::Exponential {
            beta_bar,
            eta: raw.eta.unwrap_or(1.0),
        }),
        "constant" => Ok(GainSpec::Constant { beta_bar }),
        "table" => {
            let values = raw
                .values
                .ok_or_else(|| CliError::Config("model.gain.kind = \"table\" needs model.gain.values".into()))?;
            if values.len() != n {
                return Err(CliError::Config(format!(
                    "model.gain.values has {} entries for {n} levels",
                    values.len()
                )));
            }
            let pairs = values
                .into_iter()
                .enumerate()
                .map(|(i, v)| (k1 + i as f64 * h, v))
                .collect();
            Ok(GainSpec::Table(pairs))
        }
        other => Err(CliError::Config(format!("unknown model.gain.kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference_problem() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.model, Model::reference());
        assert_eq!(cfg.m_points, 2001);
        assert_eq!(cfg.x_max, 10.0);
        assert_eq!(cfg.solver, Config::default());
        assert_eq!(cfg.emit, Emit::ALL);
    }

    #[test]
    fn dotted_and_table_forms_agree() {
        let a = RunConfig::parse("model.mu = 0.3\ngrid.m_points = 101").unwrap();
        let b = RunConfig::parse("[model]\nmu = 0.3\n[grid]\nm_points = 101").unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.m_points, 101);
    }

    #[test]
    fn k_max_with_k1_spreads_levels() {
        let cfg = RunConfig::parse("model.k1 = 1.0\nmodel.k_max = 5.0\nmodel.n_levels = 5").unwrap();
        assert_eq!(cfg.model.k1, 1.0);
        assert_eq!(cfg.model.h, 1.0);
    }

    #[test]
    fn k_max_alone_starts_at_h() {
        let cfg = RunConfig::parse("model.k_max = 10\nmodel.n_levels = 50").unwrap();
        assert_eq!(cfg.model.h, 0.2);
        assert_eq!(cfg.model.k1, 0.2);
    }

    #[test]
    fn h_and_k_max_together_is_an_error() {
        assert!(RunConfig::parse("model.h = 0.5\nmodel.k_max = 10").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("model.muu = 0.3").is_err());
        assert!(RunConfig::parse("colour = 1").is_err());
    }

    #[test]
    fn integers_promote_to_floats() {
        let cfg = RunConfig::parse("model.gamma = 0").unwrap();
        assert_eq!(cfg.model.gamma, 0.0);
    }

    #[test]
    fn empty_sweep_is_an_error() {
        assert!(RunConfig::parse("sweep.key = \"gamma\"\nsweep.values = []").is_err());
    }

    #[test]
    fn sweep_flag_parsing() {
        let (key, values) = parse_sweep_flag("gamma=0.05,0.1,0.5").unwrap();
        assert_eq!(key, "model.gamma");
        assert_eq!(values, vec![Value::Float(0.05), Value::Float(0.1), Value::Float(0.5)]);
        let (key, values) = parse_sweep_flag("levels=10,50").unwrap();
        assert_eq!(key, "model.n_levels");
        assert_eq!(values, vec![Value::Integer(10), Value::Integer(50)]);
        assert!(parse_sweep_flag("gamma").is_err());
        assert!(parse_sweep_flag("colour=1").is_err());
    }

    #[test]
    fn with_key_rewrites_one_entry() {
        let base = RunConfig::parse("sweep.key = \"gamma\"\nsweep.values = [0.1, 0.2]").unwrap();
        let run = base.with_key("model.gamma", Value::Float(0.2)).unwrap();
        assert_eq!(run.model.gamma, 0.2);
        assert!(run.sweep.is_none());
    }

    #[test]
    fn gain_table_uses_level_abscissae() {
        let cfg = RunConfig::parse(
            "model.n_levels = 2\nmodel.h = 1.0\nmodel.gain.kind = \"table\"\nmodel.gain.values = [1.0, 1.5]",
        )
        .unwrap();
        assert_eq!(cfg.model.gain, GainSpec::Table(vec![(1.0, 1.0), (2.0, 1.5)]));
        assert!(
            RunConfig::parse("model.n_levels = 3\nmodel.gain.kind = \"table\"\nmodel.gain.values = [1.0]").is_err()
        );
    }

    #[test]
    fn emit_subsets() {
        assert_eq!(
            Emit::parse("values,regions").unwrap(),
            Emit {
                values: true,
                regions: true,
                boundaries: false
            }
        );
        assert!(Emit::parse("pictures").is_err());
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use firmvi_cli::config::{self, parse_scalar, parse_sweep_flag, set_key};
use firmvi_cli::run::refine_csv;
use firmvi_cli::{execute, refine_study, CliError, RunConfig, Status};
use toml::{Table, Value};

/// Solve the dividend/investment control problem of a cash-constrained firm.
#[derive(Debug, Parser)]
#[command(name = "firmvi", version, args_override_self = true)]
struct Args {
    /// TOML config; omitted keys take the reference values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    output_dir: Option<PathBuf>,
    /// Equity grid points M.
    #[arg(long, value_name = "M")]
    grid_points: Option<usize>,
    /// Capital levels N.
    #[arg(long, value_name = "N")]
    levels: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Sweep one key, e.g. `gamma=0.05,0.1,0.5`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,
    /// Grid-refinement study with D doublings of the grid.
    #[arg(long, value_name = "D")]
    refine: Option<usize>,
    /// Cross-check the solution by Monte Carlo.
    #[arg(long)]
    mc: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// `all` or a comma-separated subset of `values,regions,boundaries`.
    #[arg(long, value_name = "LIST")]
    emit: Option<String>,
    /// Also write the final linear system as `system.coo` and `rhs.txt`.
    #[arg(long)]
    dump_system: bool,
    /// Key overrides, e.g. `--set model.mu=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut table = match &args.config {
        Some(path) => config::read_table(path)?,
        None => Table::new(),
    };
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set `{item}` is not KEY=VALUE")))?;
        set_key(&mut table, key.trim(), parse_scalar(value))?;
    }
    let overrides: [(&str, Option<Value>); 8] = [
        (
            "outputs.directory",
            args.output_dir.as_ref().map(|p| Value::String(p.display().to_string())),
        ),
        ("grid.m_points", args.grid_points.map(|m| Value::Integer(m as i64))),
        ("model.n_levels", args.levels.map(|n| Value::Integer(n as i64))),
        ("solver.tol", args.tol.map(Value::Float)),
        ("solver.max_iter", args.max_iter.map(|n| Value::Integer(n as i64))),
        ("mc.seed", args.seed.map(|s| Value::Integer(s as i64))),
        ("outputs.emit", args.emit.clone().map(Value::String)),
        ("mc.enabled", args.mc.then_some(Value::Boolean(true))),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            set_key(&mut table, key, v)?;
        }
    }
    if args.dump_system {
        set_key(&mut table, "outputs.dump_system", Value::Boolean(true))?;
    }
    if let Some(spec) = &args.sweep {
        let (key, values) = parse_sweep_flag(spec)?;
        let mut sweep = Table::new();
        sweep.insert("key".into(), Value::String(key));
        sweep.insert("values".into(), Value::Array(values));
        table.insert("sweep".into(), Value::Table(sweep));
    }
    RunConfig::from_table(table)
}

fn run(args: &Args) -> Result<Status, CliError> {
    let cfg = load(args)?;
    if let Some(doublings) = args.refine {
        let rows = refine_study(&cfg, doublings)?;
        std::fs::create_dir_all(&cfg.output_dir)?;
        std::fs::write(cfg.output_dir.join("refine.csv"), refine_csv(&rows))?;
        let mut status = Status::Success;
        for r in &rows {
            let diff = r.sup_diff.map_or("-".to_string(), |d| format!("{d:.3e}"));
            println!("M={:<7} iterations={:<5} sup_diff={diff}", r.m_points, r.iterations);
            if !r.converged {
                status = status.max(Status::NotConverged);
            }
            if r.ratio.is_some_and(|q| q <= 1.0) {
                eprintln!("warning: successive difference did not decrease at M={}", r.m_points);
                status = status.max(Status::InvariantFailure);
            }
        }
        return Ok(status);
    }
    let reports = execute(&cfg)?;
    let mut status = Status::Success;
    for r in &reports {
        for w in &r.warnings {
            eprintln!("warning [{}]: {w}", r.dir.display());
        }
        let cont = r.continuation_nodes.map_or("-".to_string(), |c| c.to_string());
        println!(
            "{}: {} after {} iterations, continuation nodes {cont}",
            r.dir.display(),
            if r.converged { "converged" } else { "not converged" },
            r.iterations
        );
        status = status.max(r.status);
    }
    Ok(status)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let status = run(&args).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.status()
    });
    ExitCode::from(status.code() as u8)
}

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn firmvi(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_firmvi"))
        .args(args)
        .output()
        .expect("spawn firmvi");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn small(dir: &Path, extra: &[&str]) -> (i32, String, String) {
    let d = dir.to_str().unwrap();
    let mut args = vec![
        "--output-dir",
        d,
        "--grid-points",
        "101",
        "--levels",
        "4",
        "--max-iter",
        "500",
    ];
    args.extend_from_slice(extra);
    firmvi(&args)
}

fn verification(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("verification.json")).unwrap()).unwrap()
}

#[test]
fn small_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = small(tmp.path(), &[]);
    assert_eq!(code, 0, "{err}");
    for f in [
        "values.csv",
        "regions.ppm",
        "boundaries.json",
        "iterations.csv",
        "verification.json",
    ] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let values = fs::read_to_string(tmp.path().join("values.csv")).unwrap();
    assert_eq!(values.lines().next(), Some("level,k_i,x_shifted,x_original,W"));
    assert_eq!(values.lines().count(), 1 + 101 * 4);

    let ppm = fs::read_to_string(tmp.path().join("regions.ppm")).unwrap();
    let mut lines = ppm.lines();
    assert_eq!(lines.next(), Some("P3"));
    assert_eq!(lines.next(), Some("101 4"));
    assert_eq!(lines.next(), Some("255"));
    assert_eq!(lines.count(), 101 * 4);

    let v = verification(tmp.path());
    assert_eq!(v["converged"], true);
    assert_eq!(v["hard_passed"], true);
    let b: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("boundaries.json")).unwrap()).unwrap();
    assert_eq!(b["levels"].as_array().unwrap().len(), 4);
}

#[test]
fn manifest_hashes_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = small(tmp.path(), &["--dump-system"]);
    assert_eq!(code, 0, "{err}");
    let v = verification(tmp.path());
    let manifest = v["manifest"].as_array().unwrap();
    let names: Vec<&str> = manifest.iter().map(|e| e["file"].as_str().unwrap()).collect();
    assert!(names.contains(&"system.coo") && names.contains(&"rhs.txt"));
    for entry in manifest {
        let name = entry["file"].as_str().unwrap();
        let bytes = fs::read(tmp.path().join(name)).unwrap();
        assert_eq!(
            entry["sha256"].as_str().unwrap(),
            firmvi_cli::artifacts::sha256_hex(&bytes),
            "{name}"
        );
    }
    let rhs = fs::read_to_string(tmp.path().join("rhs.txt")).unwrap();
    assert_eq!(rhs.lines().count(), 101 * 4);
}

#[test]
fn artifacts_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mc = [
        "--mc",
        "--seed",
        "3",
        "--set",
        "mc.n_paths=200",
        "--set",
        "mc.horizon=20",
        "--set",
        "mc.dt=0.05",
    ];
    assert_eq!(small(a.path(), &mc).0, 0);
    assert_eq!(small(b.path(), &mc).0, 0);
    for f in [
        "values.csv",
        "regions.ppm",
        "boundaries.json",
        "iterations.csv",
        "verification.json",
        "mc.csv",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let mc = fs::read_to_string(a.path().join("mc.csv")).unwrap();
    assert_eq!(
        mc.lines().next(),
        Some("start_x,level,mc_mean,std_err,pde_value,z_score")
    );
    assert_eq!(mc.lines().count(), 11);
}

#[test]
fn emit_restricts_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(small(tmp.path(), &["--emit", "boundaries"]).0, 0);
    assert!(tmp.path().join("boundaries.json").exists());
    assert!(!tmp.path().join("values.csv").exists());
    assert!(!tmp.path().join("regions.ppm").exists());
    assert!(tmp.path().join("verification.json").exists());
}

#[test]
fn non_convergence_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = small(tmp.path(), &["--max-iter", "1"]);
    assert_eq!(code, 2);
    assert_eq!(verification(tmp.path())["converged"], false);
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "model.h = 0.5\nmodel.k_max = 10\n").unwrap();
    assert_eq!(firmvi(&["--config", bad.to_str().unwrap()]).0, 1);
    fs::write(&bad, "model.mu = \"fast\"\n").unwrap();
    assert_eq!(firmvi(&["--config", bad.to_str().unwrap()]).0, 1);
    fs::write(&bad, "model.debt.lambda = 0.01\n").unwrap();
    assert_eq!(firmvi(&["--config", bad.to_str().unwrap()]).0, 1);
    assert_eq!(firmvi(&["--config", "/nonexistent/cfg.toml"]).0, 1);
    assert_eq!(firmvi(&["--refine", "0"]).0, 1);
    assert_eq!(firmvi(&["--sweep", "gamma="]).0, 1);
    assert_eq!(firmvi(&["--emit", "pictures"]).0, 1);
}

#[test]
fn sweep_runs_in_subdirectories() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = small(tmp.path(), &["--sweep", "gamma=0.05,0.5"]);
    assert_eq!(code, 0, "{err}");
    for sub in ["gamma=0.05", "gamma=0.5"] {
        assert!(tmp.path().join(sub).join("verification.json").exists(), "{sub}");
    }
    let table = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn refine_writes_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = small(tmp.path(), &["--refine", "2"]);
    assert_eq!(code, 0, "{err}");
    let table = fs::read_to_string(tmp.path().join("refine.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "m_points,iterations,converged,sup_diff,ratio");
    assert!(rows[1].starts_with("101,"));
    assert!(rows[2].starts_with("201,"));
    assert!(rows[3].starts_with("401,"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let table = firmvi_cli::config::read_table(&path).unwrap();
        firmvi_cli::RunConfig::from_table(table).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "n,t_n,norm_error,per_vector_max_error,bound_value,wall_time_s";

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chernoff-lab"));
    cmd.env_remove("CHERNOFF_LAB_WORKERS");
    cmd
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<String> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && *l != HEADER)
        .map(str::to_owned)
        .collect()
}

#[test]
fn run_writes_csv_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{"scenario": "example2-blocks", "n_values": [16, 64, 256]}"#,
    );
    let out = run(bin().arg("run").arg(&cfg).arg("--output").arg(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("example2-blocks.csv")).unwrap();
    let header_line = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header_line, HEADER);
    assert!(csv.lines().any(|l| l == "# scenario: example2-blocks"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3);
    let errs: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn rows_do_not_depend_on_workers_or_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{"scenario": "cyclic", "dim": 3, "n_values": [8, 32, 128], "output_path": "out.csv"}"#,
    );
    let mut outputs = Vec::new();
    for (flag, env) in [(Some("1"), None), (Some("4"), None), (None, Some("3")), (None, None)] {
        let sub = dir.path().join(format!("{flag:?}{env:?}").replace(['"', '(', ')'], ""));
        std::fs::create_dir(&sub).unwrap();
        let mut cmd = bin();
        cmd.arg("run").arg(&cfg).arg("--output").arg(&sub).arg("--no-timing");
        if let Some(k) = flag {
            cmd.arg("--workers").arg(k);
        }
        if let Some(k) = env {
            cmd.env("CHERNOFF_LAB_WORKERS", k);
        }
        assert_eq!(run(&mut cmd).status.code(), Some(0));
        outputs.push(data_rows(&std::fs::read_to_string(sub.join("out.csv")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    assert!(outputs[0].iter().all(|r| r.ends_with(',')), "timing column is empty");
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body, needle) in [
        (
            "order.json",
            r#"{"scenario": "zeno", "n_values": [64, 16]}"#,
            "strictly increasing",
        ),
        ("name.json", r#"{"scenario": "example7"}"#, "example2-blocks"),
        ("syntax.json", "{\"scenario\": \"zeno\",\n", "line"),
    ] {
        let cfg = write_config(dir.path(), name, body);
        let out = run(bin().arg("run").arg(&cfg).arg("--output").arg(dir.path()));
        assert_eq!(out.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(needle), "{name}");
    }
    let out = run(bin().arg("run").arg(dir.path().join("missing.json")));
    assert_eq!(out.status.code(), Some(1));
    let out = run(bin().arg("frobnicate"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_worker_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", r#"{"scenario": "zeno", "n_values": [4]}"#);
    let out = run(bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path())
        .env("CHERNOFF_LAB_WORKERS", "many"));
    assert_eq!(out.status.code(), Some(1));
    // the flag wins over a bad environment value
    let out = run(bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path())
        .arg("--workers")
        .arg("2")
        .env("CHERNOFF_LAB_WORKERS", "many"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", r#"{"scenario": "zeno", "n_values": [4]}"#);
    let out = run(bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path().join("no/such/dir")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenarios_lists_every_builtin() {
    let out = run(bin().arg("scenarios"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "example1-dft",
        "example2-blocks",
        "example3-two-unitaries",
        "decoupling",
        "cyclic",
        "zeno",
        "bounds-suite",
        "custom",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn check_bounds_passes_on_seeded_trials() {
    let out = run(bin().args(["check-bounds", "--seed", "7", "--trials", "20"]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("violations   0"));
}

#[test]
fn bounds_suite_config_reports_bound_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{"scenario": "bounds-suite", "trials": 10, "n_values": [4, 16, 64]}"#,
    );
    let out = run(bin().arg("run").arg(&cfg).arg("--output").arg(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("bounds-suite.csv")).unwrap();
    assert!(csv.contains("# violations: 0"));
    for row in data_rows(&csv) {
        let fields: Vec<&str> = row.split(',').collect();
        let lhs: f64 = fields[2].parse().unwrap();
        let bound: f64 = fields[4].parse().unwrap();
        assert!(fields[3].is_empty());
        assert!(lhs <= bound);
    }
}

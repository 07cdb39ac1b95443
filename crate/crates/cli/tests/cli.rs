use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn skf(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skf"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("case.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn csv_headers_follow_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, &str, &[&str]); 4] = [
        ("simulate", "noiseless.cfg", "path.csv", &["t", "z_1", "z_2", "y_1"]),
        ("refine", "noiseless.cfg", "trajectory.csv", &["j", "trace", "increment_trace"]),
        ("converge", "noiseless.cfg", "rate.csv", &["n", "error_sq", "bound_value", "a_priori_bound"]),
        ("wave-demo", "wave_demo.cfg", "wave_demo.csv", &["l", "error_sq", "lower_bound"]),
    ];
    for (cmd, cfg, file, expected) in cases {
        let out = tmp.path().join(cmd);
        let run = skf(&[cmd], &configs().join(cfg), &out);
        assert!(run.status.success(), "{cmd}: {}", stderr(&run));
        let (header, rows) = csv(&out.join(file));
        assert_eq!(header, expected, "{cmd}");
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.len() == expected.len()));
        let listed = manifest(&out)["outputs"].clone();
        assert!(listed.as_array().unwrap().iter().any(|v| v == file));
    }
}

#[test]
fn path_has_one_row_per_grid_node() {
    let tmp = tempfile::tempdir().unwrap();
    let run = skf(&["simulate"], &configs().join("input_noise.cfg"), tmp.path());
    assert!(run.status.success(), "{}", stderr(&run));
    let (_, rows) = csv(&tmp.path().join("path.csv"));
    // n = 4, depth = 4
    assert_eq!(rows.len(), 65);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[64][0].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn unit_bound_config_gives_one_twelfth() {
    let tmp = tempfile::tempdir().unwrap();
    let run = skf(&["bounds"], &configs().join("bounds_unit.cfg"), tmp.path());
    assert!(run.status.success(), "{}", stderr(&run));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("bounds.json")).unwrap()).unwrap();
    let m = report["constants"]["M"].as_f64().unwrap();
    assert!((m - 1.0 / 12.0).abs() < 1e-12, "M = {m}");
}

#[test]
fn kf_output_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("input_noise.cfg");
    let a = skf(&["kf", "--seed", "42"], &cfg, &tmp.path().join("a"));
    let b = skf(&["kf", "--seed", "42"], &cfg, &tmp.path().join("b"));
    assert!(a.status.success() && b.status.success());
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("estimate.json")).unwrap();
    assert_eq!(read("a"), read("b"));

    let c = skf(&["kf", "--seed", "43"], &cfg, &tmp.path().join("c"));
    assert!(c.status.success());
    assert_ne!(read("a"), read("c"));
}

#[test]
fn manifest_echoes_the_config_verbatim() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("noiseless.cfg");
    let run = skf(&["kf", "--set", "grid.n=2"], &cfg, tmp.path());
    assert!(run.status.success(), "{}", stderr(&run));
    let m = manifest(tmp.path());
    assert_eq!(m["config"].as_str().unwrap(), std::fs::read_to_string(&cfg).unwrap());
    assert_eq!(m["command"], "kf");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["overrides"][0], "grid.n=2");
    let estimate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("estimate.json")).unwrap()).unwrap();
    assert_eq!(estimate["n"], 2);
}

#[test]
fn csv_floats_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let run = skf(&["refine"], &configs().join("noiseless.cfg"), tmp.path());
    assert!(run.status.success());
    let (_, rows) = csv(&tmp.path().join("trajectory.csv"));
    for row in rows {
        for cell in &row[1..] {
            let value: f64 = cell.parse().unwrap();
            assert_eq!(&format!("{value:.16e}"), cell);
        }
    }
}

#[test]
fn unknown_key_exits_with_code_two_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[system]\nA = 0\nC = 1\nR = 1\nP0 = 1\nfrobnicate = 3\n");
    let run = skf(&["kf"], &cfg, &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("frobnicate"), "{}", stderr(&run));
}

#[test]
fn dimension_mismatch_names_the_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[system]\nA = 0 1; -1 0\nC = 1 0 0\nR = 1\nP0 = 1 0; 0 1\n");
    let run = skf(&["kf"], &cfg, &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("C must be"), "{}", stderr(&run));
}

#[test]
fn unrepresentable_sample_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = skf(&["converge", "--set", "study.n_list=3 4"], &configs().join("noiseless.cfg"), tmp.path());
    assert_eq!(run.status.code(), Some(2), "{}", stderr(&run));
}

#[test]
fn overflowing_system_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[system]\nA = 800\nC = 1\nR = 1\nP0 = 1\n[grid]\nn = 1\n");
    let run = skf(&["kf"], &cfg, &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(3), "{}", stderr(&run));
    assert!(!tmp.path().join("out").join("estimate.json").exists());
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn twh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twh")).args(args).output().expect("twh runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let s = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(s.trim()).unwrap_or_else(|e| panic!("not a JSON diagnostic ({e}): {s}"))
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const NAGUMO_SLOW: &str = r#"{"schema_version": 1, "domain": {"kind": "point"},
    "nonlinearity": {"family": "custom", "h_coeffs": [-0.3, 1.0, 0.3, -1.0]}, "wave_speed": 0.5}"#;

#[test]
fn unknown_keys_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"schema_version": 1, "problem": "p.json", "stagez": []}"#);
    let o = twh(&["stationary", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    let d = stderr_json(&o);
    assert_eq!(d["exit_code"], 2);
    assert!(d["message"].as_str().unwrap().contains("stagez"), "{d}");
}

#[test]
fn malformed_problem_and_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.json", r#"{"schema_version": 1, "domain": {"kind": "point"}, "nonlinearity": {"family": "odd_minus", "p": 0.5}, "wave_speed": 1.0}"#);
    let cfg = write(dir.path(), "e.json", r#"{"schema_version": 1, "problem": "p.json"}"#);
    assert_eq!(code(&twh(&["stationary", "--config", s(&cfg)])), 2);
    assert_eq!(code(&twh(&["frobnicate"])), 2);
    assert_eq!(code(&twh(&["stationary"])), 2);
    let o = twh(&["stationary", "--config", s(&examples().join("cubic_experiment.json")), "--tol-scale", "-1", "--out", s(&dir.path().join("r"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_prerequisite_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = examples().join("nagumo_experiment.json");
    for stage in ["orbits", "homology", "continue", "validate", "report"] {
        let o = twh(&[stage, "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&o), 3, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stderr_json(&o)["exit_code"], 3);
    }
    // homology needs orbits, not only stationary points
    assert_eq!(code(&twh(&["stationary", "--config", s(&cfg), "--out", s(&out)])), 0);
    assert_eq!(code(&twh(&["homology", "--config", s(&cfg), "--out", s(&out)])), 3);
}

#[test]
fn stale_results_from_another_problem_are_prerequisite_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&twh(&["stationary", "--config", s(&examples().join("cubic_experiment.json")), "--out", s(&out)])), 0);
    let o = twh(&["orbits", "--config", s(&examples().join("nagumo_experiment.json")), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn neumann_even_problem_records_an_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = twh(&["run", "--config", s(&examples().join("neumann_even_experiment.json")), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let st = read_json(&out.join("stationary.json"));
    assert_eq!(st["set"]["points"].as_array().unwrap().len(), 0);
    assert_eq!(st["certified"], true);
    let h = read_json(&out.join("homology.json"));
    assert_eq!(h["homology"]["total"], 0);
    assert_eq!(h["matches_expected"], true);
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn nagumo_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nagumo.json", NAGUMO_SLOW);
    let cfg = write(
        dir.path(),
        "exp.json",
        r#"{"schema_version": 1, "problem": "nagumo.json", "seed": 3,
            "continuation": {"ell": 2.0, "legs": [{"wave_speed": 2.0}]}}"#,
    );
    let out = dir.path().join("a");
    let o = twh(&["run", "--config", s(&cfg), "--out", s(&out)]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("homology: total rank 1 (grade 0)"), "{stdout}");
    assert!(stdout.contains("continue: isomorphism verified"), "{stdout}");
    assert!(std::fs::read_to_string(out.join("homology.txt")).unwrap().starts_with("total rank 1 (grade 0)"));

    let matrix = std::fs::read_to_string(out.join("connection_matrix.csv")).unwrap();
    let ones = matrix.lines().skip(1).flat_map(|l| l.split(',').skip(1)).filter(|v| *v == "1").count();
    assert_eq!(ones, 2, "{matrix}");

    // energy along every orbit is non-increasing
    let mut n = 0;
    for e in std::fs::read_dir(out.join("report")).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if !(name.starts_with("energy_") && name.ends_with(".csv")) {
            continue;
        }
        let text = std::fs::read_to_string(&p).unwrap();
        let rows: Vec<(f64, f64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                (v[0], v[1])
            })
            .collect();
        assert!(rows.len() > 100);
        let scale = 1.0 + rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
        for w in rows.windows(2) {
            assert!(w[1].0 > w[0].0);
            assert!(w[1].1 <= w[0].1 + 1e-10 * scale, "{name}: {w:?}");
        }
        assert!(rows[0].1 - rows[rows.len() - 1].1 > 1e-2);
        n += 1;
    }
    assert_eq!(n, 2);
    for f in ["report/energy.svg", "report/phase.svg", "report/eigen_000.svg", "report/eigen_001.csv", "validation.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    // every output is inventoried with its hash
    let manifest = read_json(&out.join("manifest.json"));
    let files = manifest["files"].as_object().unwrap();
    let listed: Vec<&String> = files.keys().collect();
    assert_eq!(listed, tree(&out).keys().collect::<Vec<_>>());
    assert_eq!(manifest["certified"], true);

    // a second run on one thread reproduces the first byte for byte
    let again = dir.path().join("b");
    let o = twh(&["run", "--config", s(&cfg), "--out", s(&again), "--threads", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(tree(&out), tree(&again));

    // report regenerates from the run directory alone
    let o = twh(&["report", "--out", s(&again)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(tree(&out), tree(&again));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twistren"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .arg("--quiet")
        .output()
        .expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr_codes(o: &Output) -> Vec<String> {
    String::from_utf8_lossy(&o.stderr)
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter_map(|v| v["error"].as_str().map(str::to_string))
        .collect()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Directory holding one solved `fixed_point.json`, shared by the tests.
fn solved() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let o = run(
            dir.path(),
            &[
                "solve",
                "--degree-schedule",
                "6,10,14,20",
                "--out",
                "fixed_point.json",
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        dir
    })
    .path()
}

fn fixed_point() -> PathBuf {
    solved().join("fixed_point.json")
}

fn shear_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/shear.json")
}

#[test]
fn solve_reproduces_the_scalings() {
    let v = read_json(&fixed_point());
    assert_eq!(v["schema"], "twistren/fixed-point/1");
    let l = v["lambda"].as_f64().unwrap();
    let m = v["mu"].as_f64().unwrap();
    assert!((l + 0.249).abs() <= 2e-3, "{l}");
    assert!((m - 0.061).abs() <= 2e-3, "{m}");
    assert_eq!(v["s"]["max_degree"], 20);
    assert_eq!(v["s"]["coeffs"].as_array().unwrap().len(), 21 * 21);
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--out", "again.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read(dir.path().join("again.json")).unwrap(),
        std::fs::read(fixed_point()).unwrap()
    );
}

#[test]
fn map_prints_json_lines() {
    let fp = fixed_point();
    let o = run(
        solved(),
        &[
            "map",
            "--point",
            "0,0",
            "--point",
            "0.1,-0.2",
            "--in",
            fp.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    let img = &lines[0]["image"];
    assert!((img[0].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    for l in &lines {
        assert!((l["det"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
        assert!(l["twist"].as_f64().unwrap() < 0.0);
    }
}

#[test]
fn map_outside_the_domain_is_a_numerical_failure() {
    let fp = fixed_point();
    let o = run(
        solved(),
        &["map", "--point", "40,40", "--in", fp.to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
    let line: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(line["error"].is_string());
}

#[test]
fn cantor_level_zero_is_the_tip() {
    let dir = tempfile::tempdir().unwrap();
    let fp = fixed_point();
    let out = dir.path().join("cloud.csv");
    let o = run(
        dir.path(),
        &[
            "cantor",
            "--level",
            "0",
            "--in",
            fp.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(out).unwrap(), "word,x,y\n,0,0\n");
}

#[test]
fn cantor_cloud_and_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let fp = fixed_point();
    let args = |extra: &[&str]| {
        let mut a = vec!["cantor", "--level", "3", "--in", fp.to_str().unwrap()];
        a.extend_from_slice(extra);
        run(dir.path(), &a)
    };
    assert_eq!(code(&args(&["--out", "a.csv"])), 0);
    assert_eq!(code(&args(&["--out", "b.csv"])), 0);
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(
        a,
        std::fs::read_to_string(dir.path().join("b.csv")).unwrap()
    );
    let rows: Vec<&str> = a.lines().collect();
    assert_eq!(rows[0], "word,x,y");
    assert_eq!(rows.len(), 9);
    assert!(rows[1].starts_with("000,0,0"));
    assert_eq!(code(&args(&["--boxes", "--out", "boxes.json"])), 0);
    let b = read_json(&dir.path().join("boxes.json"));
    assert_eq!(b["level"], 3);
    assert_eq!(b["boxes"].as_array().unwrap().len(), 8);
    assert_eq!(b["boxes"][5]["word"], "101");
}

#[test]
fn one_curve_refinement_has_five_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let fp = fixed_point();
    let o = run(
        dir.path(),
        &[
            "curve",
            "--iters",
            "1",
            "--in",
            fp.to_str().unwrap(),
            "--out",
            "curve_k.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("curve_1.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,y"));
    let t: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let a = (1.0 - 2.0 * 0.272) / 3.0;
    // Breakpoints of the connector, copy, connector, copy, connector layout.
    for b in [0.0, a, a + 0.272, 2.0 * a + 0.272, 1.0 - a, 1.0] {
        assert!(
            t.iter().any(|v| (v - b).abs() <= 1e-12),
            "missing breakpoint {b}"
        );
    }
    assert!(t.windows(2).all(|w| w[0] < w[1]));
    assert!(dir.path().join("curve_0.csv").exists());
    let s = read_json(&dir.path().join("curve_summary.json"));
    assert_eq!(s["lipschitz"].as_array().unwrap().len(), 2);
    assert!(s["lipschitz"][1].as_f64().unwrap().is_finite());
}

#[test]
fn obstruct_finds_the_clash() {
    let dir = tempfile::tempdir().unwrap();
    let fp = fixed_point();
    let o = run(
        dir.path(),
        &[
            "obstruct",
            "--max-depth",
            "20",
            "--seed-angle",
            "45",
            "--in",
            fp.to_str().unwrap(),
            "--out",
            "clash.json",
        ],
    );
    assert_eq!(code(&o), 0);
    let c = read_json(&dir.path().join("clash.json"));
    let n = c["report"]["n_star"].as_u64().unwrap();
    assert!(n <= 20);
    assert_eq!(c["report"]["steps"].as_array().unwrap().len(), 21);
    let o = run(
        dir.path(),
        &["obstruct", "--chain", "--in", fp.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    let chain: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(chain["dxdx_tip"].as_f64().unwrap() < 0.0);
    assert_eq!(chain["identities"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_passes_on_the_solution() {
    let dir = tempfile::tempdir().unwrap();
    let fp = fixed_point();
    let o = run(
        dir.path(),
        &[
            "verify",
            "--in",
            fp.to_str().unwrap(),
            "--out",
            "report.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().len() >= 40);
}

#[test]
fn verify_catches_a_perturbed_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&fixed_point());
    v["lambda"] = Value::from(v["lambda"].as_f64().unwrap() + 0.01);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(
        dir.path(),
        &[
            "verify",
            "--only",
            "residual,normalization",
            "--in",
            bad.to_str().unwrap(),
            "--out",
            "report.json",
        ],
    );
    assert_eq!(code(&o), 2);
    let r = read_json(&dir.path().join("report.json"));
    let failed: Vec<String> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| {
            format!(
                "{}/{}",
                c["group"].as_str().unwrap(),
                c["name"].as_str().unwrap()
            )
        })
        .collect();
    assert!(
        failed.contains(&"residual/fixed_point".to_string()),
        "{failed:?}"
    );
    assert!(
        failed.iter().any(|f| f.starts_with("normalization/")),
        "{failed:?}"
    );
}

#[test]
fn verify_twist_on_the_shear() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "verify",
            "--only",
            "twist",
            "--in",
            shear_file().to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(
        stderr_codes(&o).iter().any(|c| c == "TwistViolation"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--degree-schedule", "six"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_codes(&o), ["UsageError"]);
    let o = run(dir.path(), &["frobnicate"]);
    assert_eq!(code(&o), 1);
    let o = run(dir.path(), &["solve", "--degree-schedule", "10,6"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_codes(&o), ["InvalidSchedule"]);
    let o = run(
        dir.path(),
        &["map", "--point", "0,0", "--in", "nowhere.json"],
    );
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_codes(&o), ["MissingInput"]);
    let fp = fixed_point();
    let o = run(
        dir.path(),
        &["verify", "--only", "bogus", "--in", fp.to_str().unwrap()],
    );
    assert_eq!(code(&o), 1);
    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    let o = run(
        dir.path(),
        &["cantor", "--level", "1", "--in", "broken.json"],
    );
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_codes(&o), ["MalformedJson"]);
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    // Degree 6 alone fails the default truncation gate.
    std::fs::write(dir.path().join("cfg.json"), "{\"degree_schedule\": [6]}").unwrap();
    let o = run(
        dir.path(),
        &["--config", "cfg.json", "solve", "--out", "fp6.json"],
    );
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_codes(&o), ["NoConvergence"]);
    let cfg = "{\"degree_schedule\": [6], \"solver\": {\"truncation_tol\": 1e-3}}";
    std::fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let o = run(
        dir.path(),
        &["--config", "cfg.json", "solve", "--out", "fp6.json"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(
        read_json(&dir.path().join("fp6.json"))["s"]["max_degree"],
        6
    );
    std::fs::write(dir.path().join("bad.json"), "{\"curve\": {\"theta\": 0.7}}").unwrap();
    let o = run(dir.path(), &["--config", "bad.json", "solve"]);
    assert_eq!(code(&o), 1);
}

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn lfppl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfppl")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn compile_requires_constants() {
    let o = lfppl(&["compile", fixture("fig1.lfppl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unbound variable 'q'"), "{}", stderr(&o));
}

#[test]
fn compile_fig1() {
    let o = lfppl(&["compile", fixture("fig1.lfppl").to_str().unwrap(), "--const", "q=0.5", "--const", "y=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["delta"], serde_json::json!(["z1"]));
    assert_eq!(j["gamma"], serde_json::json!(["z1"]));
    assert_eq!(j["F"].as_array().unwrap().len(), 2);
    assert_eq!(j["D"].as_array().unwrap().iter().filter(|p| p["density"] != "0").count(), 2);
}

#[test]
fn compile_gmm_has_twelve_variables() {
    let o = lfppl(&["compile", fixture("gmm.lfppl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["delta"].as_array().unwrap().len(), 12);
}

#[test]
fn syntax_errors_report_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lfppl");
    std::fs::write(&bad, "(let [x (sample (normal 0 1))]\n  (+ x 1)").unwrap();
    let o = lfppl(&["compile", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(':'), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(lfppl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lfppl(&["sample", "x.lfppl"]).status.code(), Some(1));
    let o = lfppl(&["compile", "/nonexistent/file.lfppl"]);
    assert_eq!(o.status.code(), Some(1));
}

fn sample_args<'a>(out: &'a str, n: &'a str, seed: &'a str) -> Vec<&'a str> {
    vec![
        "--engine", "dhmc", "--epsilon", "0.05", "--steps", "10", "--num-samples", n, "--burn-in", "100", "--seed", seed,
        "--out", out, "--const", "q=0.5", "--const", "y=1",
    ]
}

#[test]
fn sample_fig1_branch_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.csv");
    let path = fixture("fig1.lfppl");
    let mut args = vec!["sample", path.to_str().unwrap()];
    args.extend(sample_args(out.to_str().unwrap(), "10000", "3"));
    let o = lfppl(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z1,branch0"));
    let bits: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(bits.len(), 10_000);
    let p = bits.iter().filter(|b| **b == "1").count() as f64 / bits.len() as f64;
    let oracle = 1.0 / (1.0 + (-0.5f64).exp());
    assert!((p - oracle).abs() <= 0.02, "{p} vs {oracle}");
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig1.stats.json")).unwrap()).unwrap();
    assert!(stats["stats"]["acceptance_rate"].as_f64().unwrap() > 0.9);
}

#[test]
fn zero_samples_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let path = fixture("fig1.lfppl");
    let run = |name: &str, n: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["sample", path.to_str().unwrap()];
        let out_s = out.to_str().unwrap().to_string();
        args.extend(sample_args(&out_s, n, "5"));
        assert_eq!(lfppl(&args).status.code(), Some(0));
        std::fs::read(&out).unwrap()
    };
    assert_eq!(run("empty.csv", "0"), b"z1,branch0\n");
    assert_eq!(run("a.csv", "300"), run("b.csv", "300"));
}

#[test]
fn impossible_program_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("p.lfppl");
    std::fs::write(&prog, "(let [x (sample (uniform 0 1))] (observe (uniform 5 6) 0) x)").unwrap();
    let out = dir.path().join("p.csv");
    let o = lfppl(&[
        "sample", prog.to_str().unwrap(), "--engine", "hmc", "--epsilon", "0.1", "--steps", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn heavytail_experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = lfppl(&["experiment", "heavytail", "--dims", "1", "--seed", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.json", "wmae_samples.dat", "wmae_time.dat", "manifest_dhmc.json", "manifest_hmc.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dhmc"]["wmae"].as_array().unwrap().len(), 20);
}

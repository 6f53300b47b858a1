use std::path::PathBuf;
use std::process::{Command, Output};

fn kernel(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../kernels").join(name)
}

fn femopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_femopt")).args(args).output().expect("binary runs")
}

fn read_json(p: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn optimize_writes_report_with_flop_counts() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = femopt(&["optimize", kernel("poisson.json").to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    assert_eq!(r["input_flops"], 3906);
    assert!(r["output_flops"].as_u64().unwrap() < 3906);
    assert!(!r["plan"]["bipartitions"].as_array().unwrap().is_empty());
}

#[test]
fn verify_mass_succeeds() {
    let out = femopt(&["verify", kernel("mass.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn threshold_of_one_byte_forbids_preevaluation() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = femopt(&["optimize", kernel("mass.json").to_str().unwrap(), "--th", "1", "--report", report.to_str().unwrap()]);
    assert!(out.status.success());
    let r = read_json(&report);
    let chosen = r["plan"]["chosen"].as_u64().unwrap() as usize;
    let plans = r["plan"]["bipartitions"].as_array().unwrap();
    assert!(plans[chosen]["b_p"].as_array().unwrap().is_empty());
    for p in plans.iter().filter(|p| !p["b_p"].as_array().unwrap().is_empty()) {
        assert_eq!(p["feasible"], false);
    }
    assert!(r["preeval"].is_null());
}

#[test]
fn count_prints_flops() {
    let out = femopt(&["count", kernel("poisson.json").to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "3906");
}

#[test]
fn errors_exit_one_and_usage_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"indices": {"j": 2}, "loops": [{"index": "j"}], "statements": [], "outputs": {"A": ["j"]}}"#).unwrap();
    let out = femopt(&["optimize", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: invalid kernel"));
    assert_eq!(femopt(&["optimize"]).status.code(), Some(2));
    assert_eq!(femopt(&["optimize", "x.json", "--th", "lots"]).status.code(), Some(2));
}

#[test]
fn emission_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for n in 0..2 {
        let c = dir.path().join(format!("k{n}.c"));
        let r = dir.path().join(format!("r{n}.json"));
        let out = femopt(&[
            "optimize",
            kernel("vector_mass.json").to_str().unwrap(),
            "--emit-c",
            c.to_str().unwrap(),
            "--report",
            r.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        texts.push((std::fs::read(&c).unwrap(), std::fs::read(&r).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn emitted_kernel_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.json");
    assert!(femopt(&["optimize", kernel("poisson.json").to_str().unwrap(), "--emit-kernel", k.to_str().unwrap()]).status.success());
    let out = femopt(&["count", k.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let flops: u64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(flops < 3906);
}

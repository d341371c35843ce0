use qem_core::circuit::build_w_state_circuit;
use qem_core::{NoiseModel, PauliChannel, PauliString};
use std::path::Path;
use std::process::{Command, Output};

fn qem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qem")).args(args).output().expect("spawn qem")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const W2: &str = r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02},
    "methods": ["none", "pec", "nox"], "cer": {"shots": 300}, "sigma": 0.1, "repetitions": 2, "seed": 4}"#;

#[test]
fn run_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w2.json", W2);
    let out = dir.path().join("out/report.json");
    let o = qem(&["run", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 3);
    assert!(report["cer"][0]["K"].is_u64());
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.starts_with("circuit,method,rep,obs,vd,est,stderr"));
    // 3 methods × 2 reps × 4 projectors
    assert_eq!(csv.lines().count(), 1 + 24);
    assert!(String::from_utf8_lossy(&o.stdout).contains("w2,nox,"));
}

#[test]
fn same_seed_same_rows_regardless_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w2.json", W2);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(qem(&["run", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]).status.success());
    assert!(qem(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "4"]).status.success());
    let read = |p: &Path| std::fs::read_to_string(p.with_extension("csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = dir.path().join("c.json");
    assert!(qem(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "5"]).status.success());
    assert_ne!(read(&a), read(&c));
}

#[test]
fn sweep_and_characterize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w2.json", W2);
    let o = qem(&["sweep", &cfg, "--sigmas", "0.2,0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("sigma,method,obs,mean,std"));
    assert_eq!(text.lines().count(), 3);

    let o = qem(&["characterize", &cfg]);
    assert!(o.status.success());
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!reports.as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"circuit": {"builder": "w_state", "n": 2}, "methods": []}"#);
    assert_eq!(qem(&["run", &bad]).status.code(), Some(2));
    assert_eq!(qem(&["run", "/nonexistent/config.json"]).status.code(), Some(2));

    // cancellation is impossible when an error is more likely than no error
    let c = build_w_state_circuit(2).unwrap();
    let heavy = PauliChannel::from_error_rates(2, [("XI".parse::<PauliString>().unwrap(), 0.7)]).unwrap();
    std::fs::write(dir.path().join("heavy.json"), NoiseModel::uniform(&c, &heavy).to_json().unwrap()).unwrap();
    let cfg = write_config(
        dir.path(),
        "heavy_cfg.json",
        r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": "heavy.json", "methods": ["pec"],
            "cer": {"exact": true}, "sigma": 0.1}"#,
    );
    let o = qem(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

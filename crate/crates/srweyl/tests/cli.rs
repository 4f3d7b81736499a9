use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const HEISENBERG: &str = r#"{"n": 3, "fields": [
  [[{"c": "1", "e": [0,0,0]}], [], []],
  [[], [{"c": "1", "e": [0,0,0]}], [{"c": "1", "e": [1,0,0]}]]
]}"#;

const MARTINET: &str = r#"{"n": 3, "fields": [
  [[{"c": "1", "e": [0,0,0]}], [], []],
  [[], [{"c": "1", "e": [0,0,0]}], [{"c": "1", "e": [2,0,0]}]]
]}"#;

fn srweyl(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_srweyl"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    cmd.env_remove("SRWEYL_THREADS");
    let mut child = cmd.spawn().unwrap();
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(s) = stdin {
            pipe.write_all(s.as_bytes()).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn json_out(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn flag_on_heisenberg() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_temp(&dir, "heis.json", HEISENBERG);
    let v = json_out(&srweyl(&["flag", &f], None));
    assert_eq!(v["growth"], serde_json::json!([2, 3]));
    assert_eq!(v["weights"], serde_json::json!([1, 1, 2]));
    assert_eq!(v["Q"], 4);
    assert_eq!(v["privileged"], true);
}

#[test]
fn flag_reads_stdin_and_points() {
    let v = json_out(&srweyl(&["flag", "-", "--point", "0,0,0"], Some(MARTINET)));
    assert_eq!(v["growth"], serde_json::json!([2, 2, 3]));
    assert_eq!(v["Q"], 5);
    let away = json_out(&srweyl(&["flag", "--point", "1/2,0,0"], Some(MARTINET)));
    assert_eq!(away["growth"], serde_json::json!([2, 3]));
}

#[test]
fn nilpotentize_outputs_frame_and_weights() {
    let v = json_out(&srweyl(&["nilpotentize"], Some(MARTINET)));
    assert_eq!(v["weights"], serde_json::json!([1, 1, 3]));
    assert_eq!(v["n"], 3);
    let d = json_out(&srweyl(&["nilpotentize", "--dilated"], Some(MARTINET)));
    assert_eq!(d["params"], serde_json::json!(["tau1"]));
    let terms = d["fields"][1][2].as_array().unwrap();
    assert!(terms.iter().all(|t| t.get("eps_exp").is_some()));
}

#[test]
fn unknown_subcommand_and_bad_input_exit_two() {
    assert_eq!(srweyl(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(srweyl(&["flag"], Some("{not json")).status.code(), Some(2));
    assert_eq!(srweyl(&["flag", "--point", "0,0"], Some(HEISENBERG)).status.code(), Some(2));
    assert_eq!(srweyl(&["--help"], None).status.code(), Some(0));
}

#[test]
fn expansion_suite_verifies() {
    let o = srweyl(&["verify", "--suite", "appendix-d"], None);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("criterion  9 PASS"), "{text}");
}

#[test]
fn predict_martinet() {
    let strata = r#"{"strata": [{"name": "Z", "k": 2, "QS": 4, "QM": 5},
                                {"name": "M", "k": 3, "QS": 4, "QM": 4, "regular": true}]}"#;
    let v = json_out(&srweyl(&["predict"], Some(strata)));
    assert_eq!(v["gamma"], "2");
    assert_eq!(v["log_power"], 1);
}

#[test]
fn volume_scan_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_temp(&dir, "heis.json", HEISENBERG);
    let scan = srweyl(&["volume-scan", &f, "--box=-1:1,-1:1,-1:1", "--times", "1e-6,3e-6,1e-5,3e-5,1e-4,3e-4,1e-3"], None);
    assert!(scan.status.success(), "{}", String::from_utf8_lossy(&scan.stderr));
    let csv = String::from_utf8(scan.stdout).unwrap();
    assert!(csv.starts_with("t,V\n"));
    let v = json_out(&srweyl(&["fit"], Some(&csv)));
    assert!((v["gamma"].as_f64().unwrap() - 2.0).abs() < 1e-6, "{v}");
    assert_eq!(v["k"], 0);
}

#[test]
fn kernel_and_expand() {
    let o = srweyl(&["kernel", "--model", "heisenberg", "--t", "1", "--x", "0,0,0"], None);
    let z: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((z - 1.0 / 16.0).abs() < 1e-8);
    let v = json_out(&srweyl(&["expand", "--k", "-1", "--G", "poly:1", "--order", "1"], None));
    assert!(!v["terms"].as_array().unwrap().is_empty());
    let n = json_out(&srweyl(&["expand", "--nested", "--klist", "-1,-1", "--G", "poly:1+tau1", "--x", "1e-3"], None));
    assert_eq!(n["power"], 0);
    assert_eq!(n["log_power"], 2);
    assert!(n["relative_difference"].as_f64().unwrap() < 1e-6, "{n}");
}

#[test]
fn output_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_temp(&dir, "m.json", MARTINET);
    let args = |t: &'static str| {
        vec!["--threads", t, "volume-scan", f.as_str(), "--box=-1:1,-1:1,-1:1", "--times", "1e-5,1e-3"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let run = |t| {
        let a = args(t);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        srweyl(&refs, None).stdout
    };
    assert_eq!(run("1"), run("3"));
    let spec = |t| srweyl(&["--threads", t, "heat-fit", "--model", "grushin-sphere", "--tmin", "1e-2", "--tmax", "1e-1"], None).stdout;
    let a = spec("1");
    assert!(!a.is_empty());
    assert_eq!(a, spec("2"));
}

#[test]
fn out_writes_manifest_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_temp(&dir, "heis.json", HEISENBERG);
    let out = dir.path().join("flag.json");
    let o = Command::new(env!("CARGO_BIN_EXE_srweyl"))
        .args(["--out", out.to_str().unwrap(), "flag", &f])
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let body = std::fs::read_to_string(&out).unwrap();
    assert_eq!(body, String::from_utf8(srweyl(&["flag", &f], None).stdout).unwrap());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("flag.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "flag");
    assert_eq!(m["timestamp"], 1700000000);
    assert_eq!(m["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn spectrum_csv() {
    let o = srweyl(&["spectrum", "--model", "grushin-sphere", "--cutoff", "6"], None);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,multiplicity"));
    assert!(lines.count() >= 3);
}

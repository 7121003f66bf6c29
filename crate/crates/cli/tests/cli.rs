use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_overindep"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn oi_mixing_verifies_and_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &configs().join("oi_mixing.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("n,lhs_num,lhs_den,rhs_num,rhs_den,relation\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",GT")));
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["kind"], "oi-mixing");
    assert!(trace["horizon"].as_u64().unwrap() >= 1000);
    assert_eq!(trace["stages"].as_array().unwrap().len(), 3);
}

#[test]
fn large_a_exits_with_the_failing_inequality() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "big.toml", "[construction]\nkind = \"oi-mixing\"\na = \"1/2\"\nstages = 3\n");
    let out = run(&["construct"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a^(d+1)") && err.contains("fails"), "{err}");
}

#[test]
fn unknown_keys_and_bad_rationals_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "typo.toml", "[construction]\nkind = \"oi-mixing\"\na = \"1/32\"\nstages = 3\nhorizn = 5\n");
    let out = run(&["construct"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));
    let cfg = write_config(tmp.path(), "float.toml", "[construction]\nkind = \"oi-mixing\"\na = 0.03\nstages = 3\n");
    assert_eq!(run(&["construct"], &cfg, &tmp.path().join("o")).status.code(), Some(1));
    let cfg = write_config(tmp.path(), "extra.json", "{\"sweep\": {\"cylinders\": [], \"horizon\": 3}, \"color\": 1}");
    assert_eq!(run(&["sweep"], &cfg, &tmp.path().join("o")).status.code(), Some(1));
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("cesaro.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = bin().args(["verify", "--horizon", "400", "--config"]).arg(&cfg).arg("--out").arg(dir).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["trace.json", "cesaro.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_and_rotation_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["sweep"], &configs().join("sweep.toml"), &tmp.path().join("s"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap().lines().count(), 51);
    let out = run(&["demo-rotation"], &configs().join("rotation.json"), &tmp.path().join("r"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r/witnesses.json")).unwrap()).unwrap();
    assert!(w.as_array().unwrap().iter().all(|x| x["arc_pass"] == true));
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}

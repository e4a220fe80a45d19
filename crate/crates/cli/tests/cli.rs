use std::path::Path;
use std::process::{Command, Output};

fn cascadia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascadia")).args(args).env_remove("CASCADIA_JOBS").output().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn degenerate_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = cascadia(&["sweep", "--model", "UWM", "--N", "20", "--out", out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let scalars = read(&dir.path().join("scalars.csv"));
    assert_eq!(scalars.lines().count(), 2);
    assert!(scalars.lines().nth(1).unwrap().starts_with("0,ok,"));
    assert_eq!(read(&dir.path().join("profiles.csv")).lines().count(), 21);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["cells"], 1);
    assert_eq!(manifest["unresolved_cells"], 0);
}

#[test]
fn outputs_are_byte_identical_and_rerunnable_from_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |out: &str, jobs: &str| {
        cascadia(&[
            "--jobs", jobs, "sweep", "--model", "BWM", "--axis", "eta=log:0.01..1:3", "--axis", "s0=lin:1..30:2", "--N", "60",
            "--beta", "0.05", "--seed", "9", "--out", out,
        ])
    };
    assert!(args(a.path().to_str().unwrap(), "1").status.success());
    assert!(args(b.path().to_str().unwrap(), "2").status.success());
    for f in ["scalars.csv", "profiles.csv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    assert_eq!(read(&a.path().join("scalars.csv")).lines().count(), 7);

    // the spec echoed in the manifest reproduces the run
    let manifest: serde_json::Value = serde_json::from_str(&read(&a.path().join("manifest.json"))).unwrap();
    let c = tempfile::tempdir().unwrap();
    let spec_path = c.path().join("spec.json");
    std::fs::write(&spec_path, manifest["spec"].to_string()).unwrap();
    let out_c = c.path().join("out");
    let r = cascadia(&["sweep", "--spec", spec_path.to_str().unwrap(), "--out", out_c.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(read(&a.path().join("profiles.csv")), read(&out_c.join("profiles.csv")));
}

#[test]
fn bad_spec_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, "{\n  \"model\": \"UWM\",\n  \"params\": { \"n_emiters\": 5 }\n}\n").unwrap();
    let r = cascadia(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("n_emiters") && err.contains("line 3"), "{err}");

    let r = cascadia(&["sweep", "--model", "UWM", "--beta", "0.7"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("params.beta"));

    let r = cascadia(&["sweep", "--model", "UWM", "--axis", "s0=1", "--axis", "s0=2"]);
    assert_eq!(r.status.code(), Some(2));

    let r = cascadia(&["sweep", "--model", "UWM", "--axis", "s0=log:0..3:4"]);
    assert_eq!(r.status.code(), Some(2));

    let r = cascadia(&["fig", "fig6"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn invalid_job_count_from_environment() {
    let r = Command::new(env!("CARGO_BIN_EXE_cascadia"))
        .args(["sweep", "--model", "UWM", "--N", "3"])
        .env("CASCADIA_JOBS", "zero")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn cumulant_and_doppler_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ce2");
    let r = cascadia(&["sweep", "--model", "CE2-UWM", "--N", "8", "--beta", "0.1", "--axis", "s0=lin:1..4:2", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let prof = read(&out.join("profiles.csv"));
    assert!(prof.starts_with("cell,s0,site,D_i,sigma_z,s_ie_over_s0\n"));
    assert_eq!(prof.lines().count(), 17);

    let out = dir.path().join("dop");
    let r = cascadia(&[
        "sweep", "--model", "DOPPLER", "--xi", "10", "--d-max", "100", "--axis", "s_tilde=lin:0.5..2:4", "--format", "json", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&out.join("sweep.json"))).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
    assert_eq!(v[3]["scalars"]["s0"], 200.0);
}

#[test]
fn analytic_figure() {
    let dir = tempfile::tempdir().unwrap();
    let r = cascadia(&["fig", "fig5", "--points", "10", "--out", dir.path().to_str().unwrap()]);
    assert!(r.status.success());
    let csv = read(&dir.path().join("fig5_jz.csv"));
    assert_eq!(csv.lines().count(), 31);
    let m: serde_json::Value = serde_json::from_str(&read(&dir.path().join("fig5_manifest.json"))).unwrap();
    assert_eq!(m["figure"], "fig5");
}

#[test]
fn cumulant_figure_small() {
    let dir = tempfile::tempdir().unwrap();
    let r = cascadia(&["fig", "fig7", "--s0", "8", "--sites", "16", "--out", dir.path().to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let map = read(&dir.path().join("fig7_cumulant_s0_8.csv"));
    assert_eq!(map.lines().count(), 1 + 16 * 15);
    assert!(map.starts_with("i,j,D_i,D_j,sigxx_cumulant\n"));
}

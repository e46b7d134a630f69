use equivar::grids::{SignalFile, SpectralS2Signal};
use equivar::rng;
use equivar::spectral_conv::{s2_conv_scalar, KernelS2};
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equivar"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn equivar")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["check", "--help"])), 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["transform", "analysis", "--input", "a", "--output", "b", "--bandlimit", "0"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["check", "--filter", "no_such_module"])), 2);
}

#[test]
fn transform_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng::seeded(3);
    let s = SpectralS2Signal::random_real(&mut r, 6, 2);
    let spec = dir.path().join("in.json");
    let csv = dir.path().join("samples.csv");
    let back = dir.path().join("back.json");
    SignalFile::from_s2(&s).write(&spec).unwrap();
    assert_eq!(code(&run(&["transform", "synthesis", "--input", p(&spec), "--output", p(&csv)])), 0);
    let o = run(&["transform", "analysis", "--input", p(&csv), "--output", p(&back), "--bandlimit", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = SignalFile::read(&back).unwrap().to_s2().unwrap();
    assert!(got.max_abs_diff(&s) < 1e-9);

    let wrong = run(&["transform", "analysis", "--input", p(&csv), "--output", p(&back), "--bandlimit", "5"]);
    assert_eq!(code(&wrong), 2);
}

fn write_conv_case(dir: &Path, kernel: bool) -> (KernelS2, SpectralS2Signal) {
    let mut r = rng::seeded(11);
    let k = KernelS2::random_real(&mut r, 5, 3, 2);
    let f = SpectralS2Signal::random_real(&mut r, 5, 2);
    if kernel {
        k.to_file().write(&dir.join("kernel.json")).unwrap();
    }
    SignalFile::from_s2(&f).write(&dir.join("input.json")).unwrap();
    std::fs::write(
        dir.join("run.toml"),
        "variant = \"s2_scalar\"\nkernel = \"kernel.json\"\ninput = \"input.json\"\noutput = \"out.json\"\n",
    )
    .unwrap();
    (k, f)
}

#[test]
fn scalar_conv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (k, f) = write_conv_case(dir.path(), true);
    let o = run(&["conv", "--config", p(&dir.path().join("run.toml"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = SignalFile::read(&dir.path().join("out.json")).unwrap();
    let want = SignalFile::from_so3(&s2_conv_scalar(&k, &f).unwrap());
    assert_eq!(got, want);
}

#[test]
fn conv_oracle_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    write_conv_case(dir.path(), true);
    let o = run(&["conv", "--config", p(&dir.path().join("run.toml")), "--oracle"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!(v["oracle_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn conv_missing_kernel_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_conv_case(dir.path(), false);
    let o = run(&["conv", "--config", p(&dir.path().join("run.toml"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel"));
}

#[test]
fn full_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["check", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
    assert!(v["summary"]["total"].as_u64().unwrap() >= 40);
}

#[test]
fn check_filter_and_csv() {
    let o = run(&["check", "--filter", "harmonics", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "name,module,anchor,residual,tolerance,pass");
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|l| l.split(',').nth(1) == Some("harmonics")));
}

#[test]
fn reports_are_deterministic() {
    let args = ["check", "--filter", "grids", "--seed", "17"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout_json(&a)["config"]["seed"], 17);
}

#[test]
fn phase_mutation_is_caught() {
    let o = run(&["check", "--mutate", "cs-phase"]);
    assert_eq!(code(&o), 1);
    let failures = String::from_utf8_lossy(&o.stderr).lines().filter(|l| l.starts_with("FAIL")).count();
    assert!(failures >= 3, "{failures}");
}

#[test]
fn kernel_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basis.json");
    let o = run(&["kernels", "--lambda", "1", "--theta", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    // one element per J in |λ−θ|..=λ+θ and per M in −J..=J
    let want: u64 = (0..=2u64).map(|j| 2 * j + 1).sum();
    assert_eq!(v["angular_elements"].as_u64(), Some(want));
    assert!(out.exists());
}

#[test]
fn mesh_gauge_audit() {
    let o = run(&["mesh", "--builtin", "icosahedron"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!(v["harmonic_gauge_residual"].as_f64().unwrap() < 1e-10);
    assert!(v["gem_gauge_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn mesh_features_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("feat.json");
    let o = run(&["mesh", "--builtin", "sphere", "--vertices", "60", "--m", "-2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["output_order"], -2);
    let again = dir.path().join("again.json");
    let o = run(&["mesh", "--builtin", "sphere", "--vertices", "60", "--features", p(&out), "--out", p(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["output_order"], -1);
}

#[test]
fn malformed_off_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.off");
    std::fs::write(&bad, "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    assert_eq!(code(&run(&["mesh", "--input", p(&bad)])), 2);
}

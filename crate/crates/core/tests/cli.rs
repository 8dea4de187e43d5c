use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afem-ocp"))
}

#[test]
fn poisson_oracle_passes() {
    let out = bin().args(["run", "--problem", "poisson", "--refine", "uniform"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("poisson oracle: PASS"));
}

#[test]
fn run_writes_requested_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--problem", "example1", "--max-iters", "3", "--emit", "csv,vtk,activeset", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("example1_adaptive.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("k,n_elem,n_dof,eta,"));
    for k in 0..3 {
        assert!(dir.path().join(format!("mesh_{k:03}.vtk")).exists());
    }
    let var = std::fs::read_to_string(dir.path().join("example1_activeset_variational.csv")).unwrap();
    assert!(var.starts_with("bound,element,x0,y0,x1,y1\n"));
    assert!(dir.path().join("example1_activeset_full.csv").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"example1\"\nmax_iters = 5\ntheta = 0.5\n").unwrap();
    let out = bin()
        .args(["run", "--max-iters", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("example1_adaptive.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn compare_two_histories() {
    let dir = tempfile::tempdir().unwrap();
    for refine in ["adaptive", "uniform"] {
        let ok = bin()
            .args(["run", "--problem", "example1", "--max-iters", "3", "--refine", refine, "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(ok.success());
    }
    let out = bin()
        .args(["compare", "--quantity", "combined"])
        .arg(dir.path().join("example1_adaptive.csv"))
        .arg(dir.path().join("example1_uniform.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("eff[example1_uniform]"));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&["run", "--problem", "nonsense"]), Some(1));
    assert_eq!(code(&["run", "--theta", "1.5"]), Some(1));
    assert_eq!(code(&["run", "--bogus-flag"]), Some(1));
    assert_eq!(code(&["run", "--config", "/nonexistent/run.toml"]), Some(3));
    let file = tempfile::NamedTempFile::new().unwrap();
    // output directory path is an existing file
    assert_eq!(
        code(&["run", "--max-iters", "1", "--out", file.path().to_str().unwrap()]),
        Some(3)
    );
    assert_eq!(code(&["compare", "/nonexistent/a.csv", "/nonexistent/b.csv"]), Some(3));
    assert_eq!(code(&["--help"]), Some(0));
}

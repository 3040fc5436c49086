use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqn"))
        .args(args)
        .env("SQN_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run_config(name: &str) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let out = sqn(&["run", config(name).to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    (dir, out)
}

#[test]
fn shipped_configs_run() {
    for name in ["quartic.toml", "poisson.toml", "logistic.toml"] {
        let (dir, out) = run_config(name);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.lines().skip(1).all(|l| l.contains(",converged,")), "{name}:\n{summary}");
        assert!(dir.path().join("profile_iterations.csv").is_file());
    }
}

#[test]
fn profile_subcommand_reads_summary() {
    let (dir, out) = run_config("logistic.toml");
    assert!(out.status.success());
    let summary = dir.path().join("summary.csv");
    let out = sqn(&["profile", summary.to_str().unwrap(), "--metric", "f-evals", "--tau-points", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("series,tau,rho\n"));
    assert!(text.contains("plus-cheap,"));
    let file = dir.path().join("p.csv");
    let out = sqn(&["profile", summary.to_str().unwrap(), "--out", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(file).unwrap().ends_with("tau=1,1,1\n"));
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[[problems]]\ngenerator = \"quartic\"\nn = 5\n\n[[solvers]]\nname = \"a\"\nvariant = \"sideways\"\ninit = \"init1\"\n",
    )
    .unwrap();
    let out = sqn(&["run", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solvers[0].variant"));
    let out = sqn(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_subcommand() {
    let out = sqn(&["gradcheck", "quartic:n=12,seed=3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().filter(|l| l.starts_with("point ")).count(), 5);
    assert!(sqn(&["gradcheck", "poisson:j=1"]).status.success());
    assert_eq!(sqn(&["gradcheck", "cubic:n=3"]).status.code(), Some(2));
}

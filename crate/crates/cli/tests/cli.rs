use std::process::Command;

fn obcouple() -> Command {
    Command::new(env!("CARGO_BIN_EXE_obcouple"))
}

#[test]
fn patch_test_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = obcouple()
        .args(["patch-test", "--h", "0.25", "--horizon", "0.25", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("experiment      patch-test"));
    for f in ["summary.json", "nonlocal.vtk", "local.vtk", "history.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "experiment = \"patch-test\"\n[optimizer]\nmemroy = 3\n").unwrap();
    let out = obcouple().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("memroy"));

    let out = obcouple().args(["converge", "--h", "0.1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = obcouple().args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn gradient_check_on_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.toml");
    std::fs::write(&path, "experiment = \"patch-test\"\nh = 0.25\nhorizon = 0.25\n").unwrap();
    let out = obcouple().arg("check-gradient").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative error"));
}

use std::process::Command;

fn pursuit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pursuit"))
}

#[test]
fn bad_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "t = 0\n").unwrap();
    let status = pursuit()
        .args(["run", "--out"])
        .arg(dir.path().join("out"))
        .arg("--config")
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_field = 1\n").unwrap();
    let status = pursuit().args(["trial", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn stats_compares_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("x.csv");
    std::fs::write(&file, "a,b\n1,3\n2,4\n").unwrap();
    let out = pursuit()
        .args(["stats"])
        .arg(&file)
        .args(["a", "b", "--alternative", "less"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("U=0 "), "{text}");
    assert!(text.contains("cles=0"), "{text}");
}

#[test]
fn stats_reports_a_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("x.csv");
    std::fs::write(&file, "a,b\n1,3\n").unwrap();
    let out = pursuit()
        .arg("stats")
        .arg(&file)
        .args(["a", "zzz"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zzz"));
}

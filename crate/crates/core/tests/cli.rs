use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddetc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddetc")).args(args).output().expect("spawn ddetc")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const STABLE: &str = "name = stable\n[plant]\nkind = constant\na = 0.5 0; 0 0.4\nb = 1; 1\n[run]\nhorizon = 20\nseed = 3\n";

#[test]
fn version_flag() {
    let o = ddetc(&["--version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stable.cfg", STABLE);
    let out = dir.path().join("out");
    let o = ddetc(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "diagnostics.csv", "bundles.txt", "summary.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("status: completed"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sw.cfg", "[plant]\nkind = switching\nperiod = 12\n[run]\nseed = 42\nx0 = 1 1\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(ddetc(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    for f in ["trajectory.csv", "diagnostics.csv", "bundles.txt", "summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stable.cfg", STABLE);
    let a = ddetc(&["simulate", "--config", &cfg]);
    let b = ddetc(&["simulate", "--config", &cfg, "--seed", "4"]);
    assert!(String::from_utf8_lossy(&b.stdout).contains("seed: 4"));
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "[plant]\nkind = warp\n");
    let o = ddetc(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(ddetc(&["simulate", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    assert_eq!(ddetc(&["simulate"]).status.code(), Some(2));
    assert_eq!(ddetc(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "div.cfg",
        "[plant]\nkind = switching\nperiod = 12\nell = 2.5\n[controller]\nmode = fixed\n[run]\nseed = 42\nx0 = 1 1\ndivergence_threshold = 10\n",
    );
    let o = ddetc(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("status: diverged"));
}

#[test]
fn empty_batch_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = ddetc(&["batch", "--config-dir", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(stdout.lines().count(), 1);
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), stdout);
}

#[test]
fn batch_runs_every_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.cfg", STABLE.replace("stable", "first").as_str());
    write(dir.path(), "b.cfg", STABLE.replace("stable", "second").as_str());
    write(dir.path(), "notes.txt", "ignored");
    let o = ddetc(&["batch", "--config-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("first,event,3,completed"));
    assert!(rows[1].starts_with("second,"));
}

#[test]
fn verify_prop3_passes() {
    let o = ddetc(&["verify", "--suite", "prop3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

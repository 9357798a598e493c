use std::path::Path;
use std::process::Command;

use cahn_hilliard::verification::{manufactured_run, ConvergenceConfig};

fn chsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_chsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[grid]\nm = 3\n[[schedule]]\ndt = 0.1\nt_end = 1.0\n");
    let out = chsim(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.m"));
    assert_eq!(chsim(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn zero_trials_is_a_usage_error() {
    let out = chsim(&["verify", "inequalities", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_symbols_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("symbols.csv");
    let out = chsim(&["verify", "symbols", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.contains("m,ratio,min_gap"));
    assert_eq!(text.lines().count(), 2 + 6);
}

#[test]
fn manufactured_run_reproduces_a_convergence_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mms.toml",
        "[domain]\nlength = 3.2\n[grid]\nm = 16\n[physics]\neps = 0.1\n\
         [[schedule]]\ndt = 0.04\nt_end = 0.32\n[initial]\nkind = \"manufactured\"\n",
    );
    let out_dir = dir.path().join("out");
    let out = chsim(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = ConvergenceConfig::default();
    let (err, _) = manufactured_run(&cfg, 16).unwrap();
    let meta = std::fs::read_to_string(out_dir.join("metadata.toml")).unwrap();
    let line = meta.lines().find(|l| l.starts_with("error_linf")).unwrap();
    let linf: f64 = line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert_eq!(linf, err.norm_linf());
    let csv = std::fs::read_to_string(out_dir.join("energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.toml",
        "[domain]\nlength = 6.4\n[grid]\nm = 32\n[physics]\neps = 0.1\n\
         [[schedule]]\ndt = 0.01\nt_end = 0.5\n[initial]\nseed = 42\n\
         [output]\nsnapshot_times = [0.25, 0.5]\nformats = [\"chf1\", \"pgm\"]\n",
    );
    // same output directory both times, so metadata.toml must match too
    let out = dir.path().join("out");
    let names = ["energy.csv", "snap_00000025.chf1", "snap_00000050.chf1", "snap_00000050.pgm", "metadata.toml"];
    let mut first = Vec::new();
    for pass in 0..2 {
        assert_eq!(chsim(&["run", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
        let bytes: Vec<_> = names.iter().map(|n| std::fs::read(out.join(n)).unwrap()).collect();
        if pass == 0 {
            first = bytes;
        } else {
            for (n, (x, y)) in names.iter().zip(first.iter().zip(&bytes)) {
                assert!(x == y, "{n} differs");
            }
        }
    }
}

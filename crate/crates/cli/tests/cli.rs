use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const RANKS: &str = r#"
experiment = "ranks"
master_seed = 9
norm = "l1"

[mc]
samples = 400

[problem]
n = 20
d_grid = [64, 128]

[problem.covariance]
kind = "power_law"
exponent = 0.5
"#;

fn lab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_interp-lab"));
    cmd.args(args).env_remove("LAB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ranks_run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANKS);
    let out = dir.path().join("out");
    let o = lab(&["ranks", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let listed = String::from_utf8(o.stdout).unwrap();
    assert!(listed.lines().any(|l| l.ends_with("ranks.csv")));
    let csv = fs::read_to_string(out.join("ranks.csv")).unwrap();
    assert!(csv.starts_with("d,dim,norm,r,R,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("meta.json").exists());
}

#[test]
fn json_format_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANKS);
    let out = dir.path().join("out");
    let o = lab(
        &["ranks", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "json", "--seed", "42"],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("ranks.json").exists());
    assert!(!out.join("ranks.csv").exists());
    let meta = fs::read_to_string(out.join("meta.json")).unwrap();
    assert!(meta.contains("\"master_seed\": 42"), "{meta}");
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANKS);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = lab(&["ranks", "--config", &cfg, "--out", a.to_str().unwrap()], &[("LAB_THREADS", "1")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = lab(&["ranks", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "8"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read(a.join("ranks.csv")).unwrap(),
        fs::read(b.join("ranks.csv")).unwrap()
    );
}

#[test]
fn zero_threads_from_env_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANKS);
    let o = lab(&["ranks", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[("LAB_THREADS", "0")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("threads"));
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANKS);
    let o = lab(&["junk", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`ranks`"), "{}", stderr(&o));
}

#[test]
fn delta_above_quarter_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/bound_check.toml"))
        .unwrap()
        .replace("delta = 0.1", "delta = 0.3");
    let cfg = write_config(dir.path(), &body);
    let o = lab(&["bound-check", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1/4"), "{}", stderr(&o));
}

#[test]
fn missing_and_malformed_configs() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["ranks", "--config", dir.path().join("nope.toml").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "experiment = \"ranks\"\n[problem\n");
    let o = lab(&["ranks", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANKS);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = lab(&["ranks", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_poropinn"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "
[network]
width = 6
depth = 2
[grid]
n_space = 6
n_t = 5
refine_n = 0
[schedule]
epochs = 4
iterations = 2
batch = 20
[oracle]
terms = 30
n_space = 6
n_t = 5
fd_nodes = 21
fd_steps = 40
";

fn write_config(dir: &Path, bench: &str) -> String {
    let p = dir.join(format!("{bench}.cfg"));
    fs::write(&p, format!("[run]\nbenchmark = {bench}\nout = {}\n{TINY}", dir.join("out").display())).unwrap();
    p.display().to_string()
}

fn sensor_ids(dir: &Path) -> std::collections::BTreeSet<String> {
    fs::read_to_string(dir.join("out/sensors.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect()
}

#[test]
fn oracle_writes_the_preset_sensors() {
    for (bench, n) in [("terzaghi", 2), ("stratum", 9), ("barry-mercer", 18)] {
        let d = tempfile::tempdir().unwrap();
        let cfg = write_config(d.path(), bench);
        let o = run(&["oracle", "--config", &cfg]);
        assert!(o.status.success(), "{bench}: {}", stderr(&o));
        assert_eq!(sensor_ids(d.path()).len(), n, "{bench}");
        assert!(d.path().join("out/fields.csv").exists());
    }
}

#[test]
fn invert_without_sensors_asks_for_the_oracle() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "terzaghi");
    let o = run(&["invert", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("oracle"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_exit_with_config_error() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.cfg");
    fs::write(&p, "[run]\nbenchmark = terzaghi\n[schedule]\nepoks = 3\n").unwrap();
    let o = run(&["oracle", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schedule.epoks"));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_on_empty_directory_names_the_trajectory() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["report", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("trajectory.csv"));
}

#[test]
fn invert_writes_consistent_results() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "terzaghi");
    let o = run(&["invert", "--config", &cfg, "--generate", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = d.path().join("out");

    // 2 iterations × 2 stages × 4 epochs
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count() - 1, 16);

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["k", "K_dr"]);
    for r in &rows {
        assert_eq!(r[2].parse::<f64>().unwrap(), 1.0);
    }
    let k: f64 = rows[0][1].parse().unwrap();
    let k_dim: f64 = rows[0][4].parse().unwrap();
    assert!((k_dim - k * 1e-12).abs() < 1e-12 * 1e-12);
    assert_eq!(rows[0][5], "m2");

    let rep = run(&["report", out.to_str().unwrap()]);
    assert!(rep.status.success());
    let text = String::from_utf8(rep.stdout.clone()).unwrap();
    assert!(text.contains("sequential iterations: 2"), "{text}");
    assert!(text.contains("seed: 3"));
    assert_eq!(run(&["report", "--out", out.to_str().unwrap()]).stdout, rep.stdout);
}

#[test]
fn same_seed_gives_identical_trajectories_and_dumped_config_reproduces() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "stratum");
    let a = run(&["invert", "--config", &cfg, "--generate"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let first = fs::read(d.path().join("out/trajectory.csv")).unwrap();
    let dumped = d.path().join("out/config.txt");
    let copy = d.path().join("again.cfg");
    fs::copy(&dumped, &copy).unwrap();
    let b = run(&["invert", "--config", copy.to_str().unwrap(), "--generate"]);
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(fs::read(d.path().join("out/trajectory.csv")).unwrap(), first);
    assert_eq!(fs::read(&dumped).unwrap(), fs::read(&copy).unwrap());
}

#[test]
fn noise_flag_perturbs_sensors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "terzaghi");
    assert!(run(&["oracle", "--config", &cfg]).status.success());
    let clean = fs::read_to_string(d.path().join("out/sensors.csv")).unwrap();
    assert!(run(&["oracle", "--config", &cfg, "--noise", "0.05"]).status.success());
    let noisy = fs::read_to_string(d.path().join("out/sensors.csv")).unwrap();
    assert_ne!(clean, noisy);
    let o = run(&["oracle", "--config", &cfg, "--noise", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

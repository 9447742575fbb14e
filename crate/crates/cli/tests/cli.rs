//! End-to-end tests driving the `toa` binary: artifact layout, manifest
//! content, determinism, output-directory resolution, and failure modes.

use std::path::Path;
use std::process::{Command, Output};

fn toa() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_toa"));
    cmd.env_remove("TOA_OUT_DIR");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("manifest lacks {key}:\n{text}"))
        .to_string()
}

const TINY_BARRIER_RUN: &str = "\
packet.x0 = -6
packet.p0 = 6
packet.dx = 1
potential.segment.1.left = 0
potential.segment.1.right = 10
potential.segment.1.v0 = 10
arrivals.x = -2
kinds = pi1, pi3+, flux
time.t_min = 0
time.t_max = 2
time.count = 3
";

#[test]
fn preset_emits_config_csvs_manifest_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(toa().args(["preset", "figure4", "--out"]).arg(dir.path()));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("manifest:"), "{stdout}");
    for name in [
        "figure4.conf",
        "manifest.txt",
        "plot.gp",
        "pi1_x5.csv",
        "pi3_plus_x5.csv",
        "flux_x5.csv",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let ratio: f64 = manifest_value(dir.path(), "ratio.pi3_plus_to_pi1.x5")
        .parse()
        .unwrap();
    assert!((1.45..1.55).contains(&ratio), "peak ratio {ratio}");

    let csv = std::fs::read(dir.path().join("pi1_x5.csv")).unwrap();
    assert!(!csv.contains(&b'\r'), "CSV must use LF line endings");
    let csv = String::from_utf8(csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "T,total,left,right");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(first.len(), 4);
    assert_eq!(csv.lines().count(), 402);
}

#[test]
fn identical_runs_reproduce_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let conf = a.path().join("tiny.conf");
    std::fs::write(&conf, TINY_BARRIER_RUN).unwrap();
    run_ok(toa().args(["run"]).arg(&conf).arg("--out").arg(a.path()));
    run_ok(toa().args(["run"]).arg(&conf).arg("--out").arg(b.path()));
    for name in ["manifest.txt", "pi1_x-2.csv", "pi3_plus_x-2.csv", "flux_x-2.csv"] {
        let left = std::fs::read(a.path().join(name)).unwrap();
        let right = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between reruns");
    }
}

#[test]
fn out_dir_resolution_prefers_the_flag_over_the_environment() {
    let conf_dir = tempfile::tempdir().unwrap();
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let conf = conf_dir.path().join("tiny.conf");
    std::fs::write(&conf, TINY_BARRIER_RUN).unwrap();

    run_ok(toa()
        .args(["run"])
        .arg(&conf)
        .env("TOA_OUT_DIR", env_dir.path()));
    assert!(env_dir.path().join("pi1_x-2.csv").exists());

    run_ok(toa()
        .args(["run"])
        .arg(&conf)
        .arg("--out")
        .arg(flag_dir.path())
        .env("TOA_OUT_DIR", env_dir.path()));
    assert!(flag_dir.path().join("pi1_x-2.csv").exists());
    assert!(!env_dir.path().join("manifest.txt.lock").exists());
}

#[test]
fn validate_prints_the_scenario_scales() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("tiny.conf");
    std::fs::write(&conf, TINY_BARRIER_RUN).unwrap();
    let out = run_ok(toa().args(["validate"]).arg(&conf));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("config OK"), "{stdout}");
    assert!(stdout.contains("negative-momentum fraction"), "{stdout}");
    assert!(stdout.contains("momentum grid"), "{stdout}");
}

#[test]
fn failures_exit_nonzero_with_located_messages() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "packet.x0 = -6\npacket.p0 = six\n").unwrap();
    let out = toa().args(["validate"]).arg(&conf).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains(":2:"), "line number missing: {stderr}");
    assert!(stderr.contains("packet.p0"), "{stderr}");

    let out = toa().args(["preset", "figure9"]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("figure1"), "should list presets: {stderr}");
}

#[test]
fn plot_subcommand_rebuilds_the_script_from_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("tiny.conf");
    std::fs::write(&conf, TINY_BARRIER_RUN).unwrap();
    run_ok(toa().args(["run"]).arg(&conf).arg("--out").arg(dir.path()));
    assert!(!dir.path().join("plot.gp").exists(), "run alone must not plot");
    run_ok(toa().args(["plot"]).arg(dir.path().join("manifest.txt")));
    let gp = std::fs::read_to_string(dir.path().join("plot.gp")).unwrap();
    assert!(gp.contains("set multiplot"), "{gp}");
    assert!(gp.contains("($3-$4)"), "upstream difference curve: {gp}");
    assert!(gp.contains("'flux_x-2.csv'"), "{gp}");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kdvlab::config::STANDARD_TOML;

fn kdvlab(args: &[&str], threads: Option<usize>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kdvlab"));
    c.args(args);
    if let Some(t) = threads {
        c.env("RAYON_NUM_THREADS", t.to_string());
    }
    c.output().expect("binary runs")
}

/// A few-second variant of the standard scenario.
fn small_config() -> String {
    STANDARD_TOML
        .replace("n_modes = 32", "n_modes = 8")
        .replace("grid_size = 128", "grid_size = 32")
        .replace("dt_fast = 2e-4", "dt_fast = 1e-3")
        .replace("record_every = 50", "record_every = 10")
        .replace("eps = [0.2, 0.1, 0.05]", "eps = [0.4, 0.2]")
        .replace("horizon_slow = 0.5", "horizon_slow = 0.2")
        .replace("ensemble = 8", "ensemble = 3")
        .replace("tau_end = 0.5\n\n[qi]", "tau_end = 0.2\n\n[qi]")
        .replace("n_list = [2, 4, 8]", "n_list = [2, 4]")
        .replace("measure_modes = 8", "measure_modes = 4")
        .replace("ensemble = 64", "ensemble = 4")
        .replace("ball_samples = 4000", "ball_samples = 300")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn config_errors_exit_with_status_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &small_config().replace("eps = [0.4, 0.2]", "eps = [0.2, 0.4]"));
    let out = kdvlab(&["--config", s(&bad), "--out", s(dir.path()), "simulate"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.eps"));
    assert_eq!(kdvlab(&["--bogus"], None).status.code(), Some(1));
    assert_eq!(kdvlab(&["--config", "/nonexistent.toml", "simulate"], None).status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config().replace("dt_fast = 1e-3", "dt_fast = 0.5").replace("initial = [[1, 0.05], [-2, 0.02]]", "initial = [[1, 0.5]]");
    let cfg = write(dir.path(), "c.toml", &text);
    let out = kdvlab(&["--config", s(&cfg), "--out", s(dir.path()), "simulate"], None);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config().replace("eps = 0.1\nt_end_fast", "eps = 0.0\nt_end_fast"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    // at this coarse step the conservation gate fails, but the files are written
    let out = kdvlab(&["--config", s(&cfg), "--out", s(&a), "--check", "simulate"], None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = kdvlab(&["--config", s(&a.join("manifest.toml")), "--out", s(&b), "simulate"], None);
    assert!(out.status.success());
    let ta = fs::read(a.join("trajectory.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("trajectory.csv")).unwrap());
    let head = String::from_utf8_lossy(&ta).lines().take(2).map(String::from).collect::<Vec<_>>();
    assert!(head[0].starts_with("# kdvlab-csv v1 table=trajectory config="));
    assert!(head[1].starts_with("t,tau,hamiltonian,norm0,norm_p,I_1,"));
}

#[test]
fn zero_data_without_forcing_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config()
        .replace("kind = \"fixed\"", "kind = \"zero\"")
        .replace("initial = [[1, 0.05], [-2, 0.02]]", "initial = [[1, 0.0]]");
    let cfg = write(dir.path(), "c.toml", &text);
    assert!(kdvlab(&["--config", s(&cfg), "--out", s(dir.path()), "simulate"], None).status.success());
    let (_, t) = kdvlab::output::read_table(&dir.path().join("trajectory.csv")).unwrap();
    let col = t.column("norm0").unwrap();
    assert!(t.rows.iter().all(|r| r[col].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn sweep_outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config());
    let (a, b) = (dir.path().join("one"), dir.path().join("many"));
    assert!(kdvlab(&["--config", s(&cfg), "--out", s(&a), "sweep"], Some(1)).status.success());
    assert!(kdvlab(&["--config", s(&cfg), "--out", s(&b), "sweep"], Some(4)).status.success());
    for f in ["sweep.csv", "members.csv", "weyl.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // a different seed changes the ensemble
    let c = dir.path().join("seeded");
    assert!(kdvlab(&["--config", s(&cfg), "--out", s(&c), "--seed", "7", "sweep"], None).status.success());
    assert_ne!(fs::read(a.join("members.csv")).unwrap(), fs::read(c.join("members.csv")).unwrap());
}

#[test]
fn qi_report_schema_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config());
    let out = kdvlab(&["--config", s(&cfg), "--out", s(dir.path()), "qi"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("qi.csv")).unwrap();
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/qi_header.txt")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), golden.trim_end());
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn plots_quote_paths_and_check_columns() {
    let dir = tempfile::tempdir().unwrap();
    let spaced = dir.path().join("my reports");
    fs::create_dir_all(&spaced).unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config());
    assert!(kdvlab(&["--config", s(&cfg), "--out", s(&spaced), "sweep"], None).status.success());
    let plots = dir.path().join("plots");
    let out = kdvlab(&["--out", s(&plots), "emit-plots", s(&spaced.join("sweep.csv")), s(&spaced.join("weyl.csv"))], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let script = fs::read_to_string(plots.join("d_eps.gp")).unwrap();
    assert!(script.contains("plot \"../my reports/sweep.csv\" using"), "{script}");

    let broken = write(dir.path(), "sweep.csv", "# kdvlab-csv v1 table=sweep config=x\neps,d_median\n0.1,1\n");
    let out = kdvlab(&["--out", s(&plots), "emit-plots", s(&broken)], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d_q1"));

    let empty_dir = dir.path().join("empty");
    fs::create_dir_all(&empty_dir).unwrap();
    let empty = write(&empty_dir, "sweep.csv", "# kdvlab-csv v1 table=sweep config=x\neps,t_fast,members_ok,members_failed,d_median,d_q1,d_q3,dp_median,weyl_max,clips\n");
    assert!(kdvlab(&["--out", s(&empty_dir), "emit-plots", s(&empty)], None).status.success());
    let script = fs::read_to_string(empty_dir.join("d_eps.gp")).unwrap();
    assert!(!script.contains("\nplot "));
    assert!(script.contains("set output \"sweep.png\""));
}

#[test]
fn standard_plot_script_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = write(
        dir.path(),
        "sweep.csv",
        "# kdvlab-csv v1 table=sweep config=x\neps,t_fast,members_ok,members_failed,d_median,d_q1,d_q3,dp_median,weyl_max,clips\n0.2,2.5,8,0,0.004,0.003,0.005,1,0.01,0\n",
    );
    kdvlab::plots::emit_plots(&[report], dir.path()).unwrap();
    let got = fs::read_to_string(dir.path().join("d_eps.gp")).unwrap();
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/d_eps.gp")).unwrap();
    assert_eq!(got, golden);
}

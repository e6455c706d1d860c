//! The `pks` binary: presets at reduced resolution, exit codes, CSV output.

use std::path::Path;
use std::process::{Command, Output};

use pks::harness::{self, CSV_HEADER};

fn pks(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pks"))
        .args(args)
        .env("PKS_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, preset: &str, sets: &[&str]) -> Output {
    let mut args = vec!["simulate", "--preset", preset];
    for s in sets {
        args.extend(["--set", s]);
    }
    pks(dir, &args)
}

#[test]
fn every_preset_validates() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in harness::PRESETS {
        let o = pks(dir.path(), &["validate", "--preset", name]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains(&format!("scenario.name = {name}")));
    }
}

#[test]
fn subcritical_completes_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), "subcritical", &["grid.n_cells=100", "time.t_end=0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("outcome = Completed"));
    let csv = std::fs::read_to_string(dir.path().join("subcritical.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let row = lines.next().unwrap();
    assert_eq!(row.split(',').count(), 8);
    assert!(row.contains(",,"), "no monitor, so the gap field is empty: {row}");
}

#[test]
fn identical_configs_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sets = ["grid.n_cells=80", "time.t_end=2e-4", "output.cadence=7"];
    for dir in [&a, &b] {
        assert_eq!(simulate(dir.path(), "supercritical_blowup", &sets).status.code(), Some(0));
    }
    let x = std::fs::read(a.path().join("supercritical_blowup.csv")).unwrap();
    let y = std::fs::read(b.path().join("supercritical_blowup.csv")).unwrap();
    assert!(x.len() > 1000);
    assert_eq!(x, y);
}

#[test]
fn blow_up_presets_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["supercritical_blowup", "positive_energy_blowup"] {
        let o = simulate(dir.path(), preset, &[]);
        assert_eq!(o.status.code(), Some(2), "{preset}: {}{}", stdout(&o), stderr(&o));
        let csv = std::fs::read_to_string(dir.path().join(format!("{preset}.csv"))).unwrap();
        let last = csv.lines().last().unwrap();
        assert!(!last.split(',').nth(6).unwrap().is_empty(), "barrier gap recorded");
    }
}

#[test]
fn critical_presets_stay_bounded_at_low_resolution() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["critical_radial", "critical_supersolution"] {
        let o = simulate(dir.path(), preset, &["grid.n_cells=100", "time.t_end=10 characteristic"]);
        assert_eq!(o.status.code(), Some(0), "{preset}: {}", stdout(&o));
    }
}

#[test]
fn barenblatt_reports_its_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), "barenblatt_validation", &["grid.n_cells=256", "time.t_end=1.5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("max_relative_mass_error")).unwrap();
    let err: f64 = line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn config_errors_exit_four_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "model.d = 2\nmodel.mu = 1.5\ngrid.bogus = 1\n").unwrap();
    let o = pks(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("line 1: ") && err.contains("d must be ≥ 3"), "{err}");
    assert!(err.contains("line 2: ") && err.contains("line 3: "), "{err}");
}

#[test]
fn unordered_data_is_refused_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("annulus.cfg");
    std::fs::write(
        &cfg,
        "model.d = 3\nmodel.mu = 0.5\ninitial.kind = annulus\ninitial.inner = 0.5\ninitial.outer = 0.9\n\
         barrier.r0 = 1\ngrid.n_cells = 60\ntime.t_end = 1e-5\n",
    )
    .unwrap();
    let path = cfg.to_str().unwrap();
    let o = pks(dir.path(), &["simulate", "--config", path]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("not ordered"));
    let o = pks(dir.path(), &["simulate", "--config", path, "--force"]);
    assert_ne!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn bracket_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.cfg");
    std::fs::write(
        &cfg,
        "model.d = 3\ngrid.r_max = 2\ngrid.n_cells = 60\ninitial.kind = barrier_scaled\ninitial.radius = 1\n",
    )
    .unwrap();
    let path = cfg.to_str().unwrap();
    let o = pks(dir.path(), &["bracket", "--config", path, "--lo", "0.5", "--hi", "2", "--iters", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("lo = "));
    let o = pks(dir.path(), &["bracket", "--config", path, "--lo", "1.5", "--hi", "2", "--iters", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("do not bracket"));
}

#[test]
fn profile_prints_golden_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = pks(dir.path(), &["profile", "--d", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("M_c_star = 2.02895207576"), "{}", stdout(&o));
}

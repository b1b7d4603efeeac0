use std::fs;
use std::path::Path;
use std::process::Command;

use ale_capillary::geometry::HeightField;
use ale_capillary::grid::VectorField;
use ale_capillary::io::{
    load_config, read_snapshot, run_to_directory, save_config, write_snapshot, RunManifest, TIMESERIES_HEADER,
};
use ale_capillary::timestepper::{seed_height, SeedCase, SolverConfig, Stepper, TerminalStatus};

fn small_config() -> SolverConfig {
    SolverConfig {
        n_r: 6,
        n_theta: 32,
        epsilon: SolverConfig::default_epsilon(32),
        dt: 2e-3,
        t_end: 0.02,
        snapshot_every: 5,
        seed_case: SeedCase::ModeKPerturbation,
        ..Default::default()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn snapshot_reload_is_exact() {
    let cfg = small_config();
    let st = Stepper::new(&cfg).unwrap();
    let s0 = st.initial_state(&seed_height(&cfg), &VectorField::zeros(st.grid())).unwrap();
    let (s1, _) = st.step(&s0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let header = write_snapshot(&st, &s1, dir.path()).unwrap();
    let back = read_snapshot(&st, &header).unwrap();
    assert_eq!(back.step, s1.step);
    assert_eq!(back.t, s1.t);
    assert!(max_diff(&back.h.values, &s1.h.values) <= 1e-15);
    assert!(max_diff(&back.w.x, &s1.w.x) <= 1e-15);
    assert!(max_diff(&back.w.y, &s1.w.y) <= 1e-15);
    assert!(max_diff(&back.q.values, &s1.q.values) <= 1e-15);
    assert_eq!(back.diagnostics, s1.diagnostics);
}

#[test]
fn zero_state_snapshot_files() {
    let cfg = SolverConfig { seed_case: SeedCase::Equilibrium, ..small_config() };
    let st = Stepper::new(&cfg).unwrap();
    let s0 = st.initial_state(&HeightField::zeros(cfg.n_theta), &VectorField::zeros(st.grid())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let header = write_snapshot(&st, &s0, dir.path()).unwrap();
    let names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names.len(), 3, "{names:?}");
    let iface = fs::read_to_string(dir.path().join("snapshot_000000_interface.csv")).unwrap();
    let mut lines = iface.lines();
    assert_eq!(lines.next(), Some("s,h,h_ee,curvature"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), cfg.n_theta);
    for row in rows {
        let h: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(h, 0.0);
    }
    let field = fs::read_to_string(dir.path().join("snapshot_000000_field.csv")).unwrap();
    assert_eq!(field.lines().next(), Some("r,theta,w1,w2,q,J"));
    assert_eq!(field.lines().count(), 1 + st.grid().len());

    // Same state, same bytes.
    let again = tempfile::tempdir().unwrap();
    write_snapshot(&st, &s0, again.path()).unwrap();
    for name in ["snapshot_000000.json", "snapshot_000000_interface.csv", "snapshot_000000_field.csv"] {
        assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap());
    }
    assert!(header.ends_with("snapshot_000000.json"));
}

#[test]
fn restart_matches_uninterrupted_run() {
    let cfg = small_config();
    let st = Stepper::new(&cfg).unwrap();
    let mut s = st.initial_state(&seed_height(&cfg), &VectorField::zeros(st.grid())).unwrap();
    let total = cfg.steps_from(0.0);
    let dir = tempfile::tempdir().unwrap();
    let mut header = None;
    for k in 0..total {
        s = st.step(&s).unwrap().0;
        if k + 1 == total / 2 {
            header = Some(write_snapshot(&st, &s, dir.path()).unwrap());
        }
    }
    let mut r = read_snapshot(&st, &header.unwrap()).unwrap();
    while r.step < total {
        r = st.step(&r).unwrap().0;
    }
    assert!(max_diff(&r.h.values, &s.h.values) <= 1e-12);
    assert!(max_diff(&r.w.x, &s.w.x) <= 1e-12);
    assert!(max_diff(&r.w.y, &s.w.y) <= 1e-12);
    assert!((r.t - s.t).abs() <= 1e-12);
}

fn write_config(dir: &Path, cfg: &SolverConfig) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, save_config(cfg)).unwrap();
    p
}

#[test]
fn run_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SolverConfig { output_dir: "out".into(), ..small_config() };
    let path = write_config(dir.path(), &cfg);
    assert_eq!(load_config(&path).unwrap(), cfg);
    let m = run_to_directory(&cfg, dir.path()).unwrap();
    assert_eq!(m.status, TerminalStatus::Completed);
    let out = dir.path().join("out");
    let back: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(m.snapshots, ["snapshot_000000.json", "snapshot_000005.json", "snapshot_000010.json"]);
    for s in &m.snapshots {
        assert!(out.join(s).is_file());
    }
    let ts = fs::read_to_string(out.join(&m.timeseries)).unwrap();
    assert_eq!(ts.lines().next(), Some(TIMESERIES_HEADER));
    assert_eq!(ts.lines().count(), 1 + 1 + cfg.steps_from(0.0));
}

#[test]
fn custom_seed_reads_h0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SolverConfig { output_dir: "out".into(), seed_case: SeedCase::CustomCsv, t_end: 0.004, ..small_config() };
    let mut csv = String::from("s,h\n");
    for j in 0..cfg.n_theta {
        let s = 2.0 * std::f64::consts::PI * j as f64 / cfg.n_theta as f64;
        csv.push_str(&format!("{s},{}\n", 0.01 * (3.0 * s).cos()));
    }
    fs::write(dir.path().join("h0.csv"), csv).unwrap();
    let m = run_to_directory(&cfg, dir.path()).unwrap();
    assert_eq!(m.status, TerminalStatus::Completed);

    let missing = tempfile::tempdir().unwrap();
    let m = run_to_directory(&cfg, missing.path()).unwrap();
    assert_eq!(m.status, TerminalStatus::IoError);
    assert!(missing.path().join("out/manifest.json").is_file());
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ale-capillary");
    let dir = tempfile::tempdir().unwrap();
    let cfg = SolverConfig { output_dir: "out".into(), t_end: 0.004, ..small_config() };
    let path = write_config(dir.path(), &cfg);
    let ok = Command::new(bin).arg("run").arg(&path).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("out/manifest.json").is_file());

    let check = Command::new(bin).arg("check").arg(&path).output().unwrap();
    assert_eq!(check.status.code(), Some(0));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "n_r = 8\nmystery = 1\n").unwrap();
    assert_eq!(Command::new(bin).arg("run").arg(&bad).output().unwrap().status.code(), Some(2));
    assert_eq!(Command::new(bin).arg("check").arg(&bad).output().unwrap().status.code(), Some(2));

    // A seed far above the smallness gate stops the run.
    let big = SolverConfig { perturbation_amplitude: 0.3, ..cfg };
    let path = write_config(dir.path(), &big);
    let out = Command::new(bin).arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let m: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.status, TerminalStatus::SmallnessViolation);
}

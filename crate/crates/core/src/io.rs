//! Configuration files, snapshots, time series and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{curvature, HeightField};
use crate::grid::{Layout, ScalarField, VectorField};
use crate::timestepper::{DiagnosticsRecord, SeedCase, SimState, SolverConfig, Stepper, TerminalStatus};

/// Version of the snapshot and time-series layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Every accepted configuration key, in file order.
pub const CONFIG_KEYS: [&str; 16] = [
    "n_r",
    "n_theta",
    "dt",
    "t_end",
    "epsilon",
    "theta",
    "sigma",
    "varsigma",
    "fp_tol",
    "fp_max_iter",
    "relax",
    "output_dir",
    "snapshot_every",
    "seed_case",
    "perturbation_amplitude",
    "perturbation_mode",
];

pub const TIMESERIES_HEADER: &str =
    "t,kinetic,surface_energy,total_energy,area,length,div_norm,h_H2,v_H1,fp_iters";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, key: Option<String>, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: malformed data: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Solver(#[from] crate::Error),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.display().to_string(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), message: message.into() }
}

/// Fixed 17-significant-digit float formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn seed_name(s: SeedCase) -> &'static str {
    match s {
        SeedCase::Equilibrium => "equilibrium",
        SeedCase::ModeKPerturbation => "mode_k_perturbation",
        SeedCase::CustomCsv => "custom_csv",
    }
}

/// Parses `key = value` lines; `#` starts a comment. Absent keys take their
/// defaults, and an absent `epsilon` follows `n_theta`.
pub fn parse_config(text: &str) -> Result<SolverConfig, IoError> {
    let mut cfg = SolverConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut epsilon = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(IoError::Parse { line, key: None, message: format!("expected `key = value`, got `{content}`") });
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(&key) = CONFIG_KEYS.iter().find(|c| **c == k) else {
            return Err(IoError::Parse { line, key: Some(k.into()), message: format!("unknown key `{k}`") });
        };
        if seen.contains(&key) {
            return Err(IoError::Parse { line, key: Some(k.into()), message: format!("duplicate key `{k}`") });
        }
        seen.push(key);
        let perr = |what: &str| IoError::Parse { line, key: Some(k.into()), message: format!("`{v}` is not {what}") };
        let float = || v.parse::<f64>().map_err(|_| perr("a number"));
        let int = || v.parse::<usize>().map_err(|_| perr("a non-negative integer"));
        match key {
            "n_r" => cfg.n_r = int()?,
            "n_theta" => cfg.n_theta = int()?,
            "dt" => cfg.dt = float()?,
            "t_end" => cfg.t_end = float()?,
            "epsilon" => epsilon = Some(float()?),
            "theta" => cfg.theta = float()?,
            "sigma" => cfg.sigma = float()?,
            "varsigma" => cfg.varsigma = float()?,
            "fp_tol" => cfg.fp_tol = float()?,
            "fp_max_iter" => cfg.fp_max_iter = int()?,
            "relax" => cfg.relax = float()?,
            "output_dir" => cfg.output_dir = v.to_string(),
            "snapshot_every" => cfg.snapshot_every = int()?,
            "seed_case" => {
                cfg.seed_case = match v {
                    "equilibrium" => SeedCase::Equilibrium,
                    "mode_k_perturbation" => SeedCase::ModeKPerturbation,
                    "custom_csv" => SeedCase::CustomCsv,
                    _ => return Err(perr("one of equilibrium, mode_k_perturbation, custom_csv")),
                }
            }
            "perturbation_amplitude" => cfg.perturbation_amplitude = float()?,
            "perturbation_mode" => cfg.perturbation_mode = int()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    cfg.epsilon = epsilon.unwrap_or_else(|| SolverConfig::default_epsilon(cfg.n_theta));
    cfg.validate().map_err(|e| IoError::Validation(e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SolverConfig, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    parse_config(&text)
}

/// Normalized text form with every key present.
pub fn save_config(cfg: &SolverConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n_r = {}", cfg.n_r);
    let _ = writeln!(s, "n_theta = {}", cfg.n_theta);
    let _ = writeln!(s, "dt = {}", cfg.dt);
    let _ = writeln!(s, "t_end = {}", cfg.t_end);
    let _ = writeln!(s, "epsilon = {}", cfg.epsilon);
    let _ = writeln!(s, "theta = {}", cfg.theta);
    let _ = writeln!(s, "sigma = {}", cfg.sigma);
    let _ = writeln!(s, "varsigma = {}", cfg.varsigma);
    let _ = writeln!(s, "fp_tol = {}", cfg.fp_tol);
    let _ = writeln!(s, "fp_max_iter = {}", cfg.fp_max_iter);
    let _ = writeln!(s, "relax = {}", cfg.relax);
    let _ = writeln!(s, "output_dir = {}", cfg.output_dir);
    let _ = writeln!(s, "snapshot_every = {}", cfg.snapshot_every);
    let _ = writeln!(s, "seed_case = {}", seed_name(cfg.seed_case));
    let _ = writeln!(s, "perturbation_amplitude = {}", cfg.perturbation_amplitude);
    let _ = writeln!(s, "perturbation_mode = {}", cfg.perturbation_mode);
    s
}

/// JSON header of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub schema_version: u32,
    pub t: f64,
    pub step: usize,
    pub n_r: usize,
    pub n_theta: usize,
    /// Layout of the `q` column of the field file.
    pub q_layout: Layout,
    pub interface_file: String,
    pub field_file: String,
    pub diagnostics: DiagnosticsRecord,
}

/// Writes the interface CSV, the field CSV and the JSON header of `state`.
/// Returns the header path.
pub fn write_snapshot(stepper: &Stepper, state: &SimState, dir: &Path) -> Result<PathBuf, IoError> {
    fs::create_dir_all(dir).map_err(file_err(dir))?;
    let stem = format!("snapshot_{:06}", state.step);
    let curve = stepper.curve();
    let grid = stepper.grid();
    let kappa = curvature(curve, &state.h)?;
    let mut iface = String::from("s,h,h_ee,curvature\n");
    for j in 0..curve.n_theta() {
        let _ = writeln!(
            iface,
            "{},{},{},{}",
            fmt_f64(curve.arclength(j)),
            fmt_f64(state.h.values[j]),
            fmt_f64(state.h_ee.values[j]),
            fmt_f64(kappa.values[j])
        );
    }
    let n = grid.n_theta();
    let jac = state.m.jacobian();
    let mut field = String::from("r,theta,w1,w2,q,J\n");
    for k in 0..grid.len() {
        let _ = writeln!(
            field,
            "{},{},{},{},{},{}",
            fmt_f64(grid.radius(k / n)),
            fmt_f64(grid.theta(k % n)),
            fmt_f64(state.w.x[k]),
            fmt_f64(state.w.y[k]),
            fmt_f64(state.q.values[k]),
            fmt_f64(jac[k])
        );
    }
    let header = SnapshotHeader {
        schema_version: SCHEMA_VERSION,
        t: state.t,
        step: state.step,
        n_r: grid.n_r(),
        n_theta: n,
        q_layout: state.q.layout,
        interface_file: format!("{stem}_interface.csv"),
        field_file: format!("{stem}_field.csv"),
        diagnostics: state.diagnostics,
    };
    let write = |name: &str, body: &str| -> Result<(), IoError> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(file_err(&p))
    };
    write(&header.interface_file, &iface)?;
    write(&header.field_file, &field)?;
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, json + "\n").map_err(file_err(&path))?;
    Ok(path)
}

fn read_csv(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| head.iter().position(|h| h == c).ok_or_else(|| format_err(path, format!("missing column `{c}`"))))
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        for (c, &i) in idx.iter().enumerate() {
            let v = cells
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| format_err(path, format!("row {}: bad value in column `{}`", ln + 2, columns[c])))?;
            out[c].push(v);
        }
    }
    Ok(out)
}

/// Reads the height column of an interface CSV (columns `s,h`).
pub fn read_height_csv(path: &Path, n_theta: usize) -> Result<HeightField, IoError> {
    let cols = read_csv(path, &["h"])?;
    if cols[0].len() != n_theta {
        return Err(format_err(path, format!("{} heights for {n_theta} boundary samples", cols[0].len())));
    }
    Ok(HeightField::new(cols[0].clone()))
}

/// Restores the state written by [`write_snapshot`].
pub fn read_snapshot(stepper: &Stepper, header_path: &Path) -> Result<SimState, IoError> {
    let text = fs::read_to_string(header_path).map_err(file_err(header_path))?;
    let header: SnapshotHeader =
        serde_json::from_str(&text).map_err(|e| format_err(header_path, e.to_string()))?;
    let grid = stepper.grid();
    if header.n_r != grid.n_r() || header.n_theta != grid.n_theta() {
        return Err(format_err(header_path, "snapshot grid differs from the configured grid"));
    }
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let h = read_height_csv(&dir.join(&header.interface_file), header.n_theta)?;
    let fpath = dir.join(&header.field_file);
    let cols = read_csv(&fpath, &["w1", "w2", "q"])?;
    if cols[0].len() != grid.len() {
        return Err(format_err(&fpath, "row count differs from the grid size"));
    }
    let w = VectorField { x: cols[0].clone(), y: cols[1].clone() };
    let q = ScalarField { layout: header.q_layout, values: cols[2].clone() };
    Ok(stepper.restore(header.t, header.step, h, w, q, header.diagnostics)?)
}

fn timeseries_row(d: &DiagnosticsRecord) -> String {
    let vals = [d.t, d.kinetic, d.surface_energy, d.total_energy, d.area, d.length, d.div_norm, d.h_h2, d.v_h1];
    let mut s: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
    s.push(d.fp_iters.to_string());
    s.join(",")
}

/// Writes the header and one row per record.
pub fn write_timeseries<'a>(
    records: impl IntoIterator<Item = &'a DiagnosticsRecord>,
    path: &Path,
) -> Result<(), IoError> {
    let mut s = String::from(TIMESERIES_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&timeseries_row(r));
        s.push('\n');
    }
    fs::write(path, s).map_err(file_err(path))
}

/// Appends one row to an existing time series.
pub fn append_timeseries(record: &DiagnosticsRecord, path: &Path) -> Result<(), IoError> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new().append(true).open(path).map_err(file_err(path))?;
    writeln!(f, "{}", timeseries_row(record)).map_err(file_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: SolverConfig,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub start_time: f64,
    pub end_time: f64,
    pub status: TerminalStatus,
    pub message: Option<String>,
    pub timeseries: String,
    /// Snapshot header files, relative to the output directory.
    pub snapshots: Vec<String>,
}

fn now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs the configured simulation, writing snapshots every
/// `snapshot_every` steps, the time series and the manifest.
/// `config_dir` locates `h0.csv` for the custom seed.
pub fn run_to_directory(cfg: &SolverConfig, config_dir: &Path) -> Result<RunManifest, IoError> {
    let start_time = now();
    let out = Path::new(&cfg.output_dir);
    let out = if out.is_absolute() { out.to_path_buf() } else { config_dir.join(out) };
    fs::create_dir_all(&out).map_err(file_err(&out))?;
    let mut manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        start_time,
        end_time: start_time,
        status: TerminalStatus::Completed,
        message: None,
        timeseries: "timeseries.csv".into(),
        snapshots: Vec::new(),
    };
    let result = run_inner(cfg, config_dir, &out, &mut manifest);
    if let Err(e) = &result {
        manifest.status = match e {
            IoError::Solver(err) => TerminalStatus::from_error(err),
            _ => TerminalStatus::IoError,
        };
        manifest.message = Some(e.to_string());
    }
    manifest.end_time = now();
    let mpath = out.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
        .map_err(file_err(&mpath))?;
    Ok(manifest)
}

fn run_inner(cfg: &SolverConfig, config_dir: &Path, out: &Path, manifest: &mut RunManifest) -> Result<(), IoError> {
    let stepper = Stepper::new(cfg)?;
    let h0 = match cfg.seed_case {
        SeedCase::CustomCsv => read_height_csv(&config_dir.join("h0.csv"), cfg.n_theta)?,
        _ => crate::timestepper::seed_height(cfg),
    };
    let init = stepper.initial_state(&h0, &VectorField::zeros(stepper.grid()))?;
    let ts = out.join(&manifest.timeseries);
    write_timeseries([], &ts)?;
    let every = cfg.snapshot_every;
    let mut snapshots = Vec::new();
    let result = stepper.run(init, |s| -> Result<(), IoError> {
        append_timeseries(&s.diagnostics, &ts)?;
        if s.step % every == 0 {
            let p = write_snapshot(&stepper, s, out)?;
            snapshots.push(p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
        }
        Ok(())
    });
    // The final state is always on disk.
    if result.state.step % every != 0 || result.io_error.is_some() {
        if let Ok(p) = write_snapshot(&stepper, &result.state, out) {
            let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            if !snapshots.contains(&name) {
                snapshots.push(name);
            }
        }
    }
    manifest.snapshots = snapshots;
    manifest.status = result.status;
    if let Some(e) = result.io_error {
        return Err(e);
    }
    if let Some(e) = result.error {
        manifest.message = Some(e.to_string());
    }
    Ok(())
}

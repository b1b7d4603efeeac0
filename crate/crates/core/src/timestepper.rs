//! Time stepping: the per-step fixed-point map, continuation in time and the
//! energy diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ale_map::{harmonic_extend, jinv_f_rate, map_time_derivative, pullback_v, AleMap};
use crate::fields_ops::{forcing_f_bar, MapRates};
use crate::geometry::{
    enclosed_area, interface_length, regularized_curvature, sobolev_norm, BoundaryVector, HeightField, ReferenceCurve,
};
use crate::grid::{DiskGrid, Layout, ScalarField, VectorField};
use crate::smoothing::double_mollify;
use crate::stokes::{BoundaryKind, LinearSystem, ModalInverse, PenalizedSolver, PressureRecovery};
use crate::{Error, Result};

/// Which initial interface a run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedCase {
    Equilibrium,
    ModeKPerturbation,
    CustomCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_r: usize,
    pub n_theta: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Mollification length, also the boundary regularization `epsilon^2`.
    pub epsilon: f64,
    /// Penalty parameter.
    pub theta: f64,
    pub sigma: f64,
    /// Threshold of the `H^1.7` smallness gate.
    pub varsigma: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub relax: f64,
    pub output_dir: String,
    pub snapshot_every: usize,
    pub seed_case: SeedCase,
    pub perturbation_amplitude: f64,
    pub perturbation_mode: usize,
}

impl SolverConfig {
    /// Default mollification length for a boundary of `n_theta` samples.
    pub fn default_epsilon(n_theta: usize) -> f64 {
        2.0 * PI / n_theta as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_r < 4 || self.n_theta < 8 || !self.n_theta.is_multiple_of(2) {
            return bad(format!("grid needs n_r >= 4 and even n_theta >= 8, got {} x {}", self.n_r, self.n_theta));
        }
        let positive = [
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("epsilon", self.epsilon),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("varsigma", self.varsigma),
            ("fp_tol", self.fp_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.epsilon > 1.0 {
            return bad(format!("epsilon must not exceed 1, got {}", self.epsilon));
        }
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return bad(format!("relax must lie in (0, 1], got {}", self.relax));
        }
        if self.fp_max_iter == 0 || self.snapshot_every == 0 {
            return bad("fp_max_iter and snapshot_every must be positive".into());
        }
        if !(self.perturbation_amplitude >= 0.0) || !self.perturbation_amplitude.is_finite() {
            return bad(format!("perturbation_amplitude must be non-negative, got {}", self.perturbation_amplitude));
        }
        if self.perturbation_mode == 0 || self.perturbation_mode >= self.n_theta / 2 {
            return bad(format!("perturbation_mode must lie in 1..{}, got {}", self.n_theta / 2, self.perturbation_mode));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<DiskGrid> {
        DiskGrid::new(self.n_r, self.n_theta)
    }

    /// Number of steps needed to reach `t_end` from `t`.
    pub fn steps_from(&self, t: f64) -> usize {
        ((self.t_end - t) / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_r: 16,
            n_theta: 64,
            dt: 1e-3,
            t_end: 0.05,
            epsilon: Self::default_epsilon(64),
            theta: 1e-6,
            sigma: 1.0,
            varsigma: 0.25,
            fp_tol: 1e-9,
            fp_max_iter: 50,
            relax: 0.7,
            output_dir: "output".into(),
            snapshot_every: 10,
            seed_case: SeedCase::Equilibrium,
            perturbation_amplitude: 0.02,
            perturbation_mode: 2,
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: usize,
    /// `1/2 \int J |v|^2`.
    pub kinetic: f64,
    /// `sigma` times the interface length.
    pub surface_energy: f64,
    pub total_energy: f64,
    pub area: f64,
    pub length: f64,
    /// `|div w|_L2` at segment points.
    pub div_norm: f64,
    pub h_h2: f64,
    pub v_h1: f64,
    /// Running supremum of `|v|_H1^2 + |h|_H2^2`.
    pub energy_sup: f64,
    /// Accumulated `\int |v|_H2^2 dt`.
    pub v_h2_integral: f64,
    pub fp_iters: usize,
}

/// The evolving tuple `(t, h, w, q)` with the map built from `h`.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub h: HeightField,
    /// Double-mollified height that generated `m`.
    pub h_ee: HeightField,
    pub w: VectorField,
    /// Multiplier pressure at segment points.
    pub q: ScalarField,
    pub m: AleMap,
    pub diagnostics: DiagnosticsRecord,
}

/// Extra output of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Unrelaxed increments `max(|dw|, |dh|)`, one per fixed-point iteration.
    pub increments: Vec<f64>,
    pub linear_iterations: usize,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Completed,
    SmallnessViolation,
    FixedPointDivergence,
    NotDiffeomorphism,
    IoError,
}

impl TerminalStatus {
    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::SmallnessViolation { .. } => Self::SmallnessViolation,
            Error::NotDiffeomorphism { .. } | Error::AdmissibilityViolation { .. } => Self::NotDiffeomorphism,
            _ => Self::FixedPointDivergence,
        }
    }
}

pub fn validate_smallness(curve: &ReferenceCurve, h: &HeightField, varsigma: f64) -> bool {
    sobolev_norm(curve, &h.values, 1.7) < varsigma
}

fn curve_l2(curve: &ReferenceCurve, f: &[f64]) -> f64 {
    (f.iter().map(|v| v * v).sum::<f64>() * curve.spacing()).sqrt()
}

/// Stepping context: grid, reference curve and the cached solvers.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: SolverConfig,
    grid: DiskGrid,
    curve: ReferenceCurve,
    solver: PenalizedSolver,
    recovery: PressureRecovery,
}

impl Stepper {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let curve = ReferenceCurve::unit_circle(cfg.n_theta);
        let solver = PenalizedSolver::new(&grid, cfg.dt, cfg.theta, cfg.epsilon * cfg.epsilon)?;
        let recovery = PressureRecovery::new(&grid, false);
        Ok(Self { cfg: cfg.clone(), grid, curve, solver, recovery })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &DiskGrid {
        &self.grid
    }

    pub fn curve(&self) -> &ReferenceCurve {
        &self.curve
    }

    fn map_for(&self, h: &HeightField) -> Result<(HeightField, AleMap)> {
        let h_ee = double_mollify(&self.curve, h, self.cfg.epsilon)?;
        let m = harmonic_extend(&h_ee, &self.curve, &self.grid)?;
        Ok((h_ee, m))
    }

    /// `sigma L_eps(h, h_ee) N`.
    pub fn curvature_load(&self, h: &HeightField, h_ee: &HeightField) -> Result<BoundaryVector> {
        let l = regularized_curvature(&self.curve, h, h_ee)?;
        let sigma = self.cfg.sigma;
        Ok(BoundaryVector::new(
            self.curve
                .normal()
                .iter()
                .zip(&l.values)
                .map(|(nv, lv)| [sigma * lv * nv[0], sigma * lv * nv[1]])
                .collect(),
        ))
    }

    /// Removes the divergent part of `w` by one penalized projection.
    pub fn project(&self, w: &VectorField) -> Result<VectorField> {
        let zero = [[0.0; 6]; 4];
        let sys = LinearSystem::new(&self.grid, vec![zero; self.grid.len()], 1.0, self.cfg.theta, BoundaryKind::Traction {
            kappa: 0.0,
        });
        let pre = ModalInverse::new(&sys);
        let rhs = sys.load(None, Some((w, 1.0)), None, None);
        let (x, _) = crate::stokes::solve_linear(&sys, &pre, &rhs, None)?;
        Ok(sys.unpack(&x).0)
    }

    /// Initial state from `h0` and `w0`. `w0` is projected when its
    /// divergence exceeds the penalty scale.
    pub fn initial_state(&self, h0: &HeightField, w0: &VectorField) -> Result<SimState> {
        self.grid.check_len("w0", w0.len())?;
        if h0.len() != self.cfg.n_theta {
            return Err(Error::GridMismatch(format!("h0 has {} samples, expected {}", h0.len(), self.cfg.n_theta)));
        }
        let norm = sobolev_norm(&self.curve, &h0.values, 1.7);
        if !(norm < self.cfg.varsigma) {
            return Err(Error::SmallnessViolation { norm, threshold: self.cfg.varsigma });
        }
        let (h_ee, m) = self.map_for(h0)?;
        let div = self.grid.l2_norm(Layout::Segment, &self.grid.segment_divergence(w0));
        let w = if div > self.cfg.theta * (1.0 + w0.l2_norm(&self.grid)) { self.project(w0)? } else { w0.clone() };
        let q = ScalarField::zeros(&self.grid, Layout::Segment);
        let diagnostics = self.diagnostics(0.0, 0, h0, &w, &m, None, 0);
        Ok(SimState { t: 0.0, step: 0, h: h0.clone(), h_ee, w, q, m, diagnostics })
    }

    /// Rebuilds a state from its stored fields.
    pub fn restore(
        &self,
        t: f64,
        step: usize,
        h: HeightField,
        w: VectorField,
        q: ScalarField,
        diagnostics: DiagnosticsRecord,
    ) -> Result<SimState> {
        self.grid.check_len("w", w.len())?;
        self.grid.check_len("q", q.values.len())?;
        let (h_ee, m) = self.map_for(&h)?;
        Ok(SimState { t, step, h, h_ee, w, q, m, diagnostics })
    }

    #[allow(clippy::too_many_arguments)]
    fn diagnostics(
        &self,
        t: f64,
        step: usize,
        h: &HeightField,
        w: &VectorField,
        m: &AleMap,
        prev: Option<&DiagnosticsRecord>,
        fp_iters: usize,
    ) -> DiagnosticsRecord {
        let g = &self.grid;
        let v = pullback_v(w, m);
        let n = g.n_theta();
        let mut kinetic = 0.0;
        for (k, p) in m.nodes.iter().enumerate() {
            kinetic += 0.5 * g.node_weight(k / n) * p.jac * (v.x[k] * v.x[k] + v.y[k] * v.y[k]);
        }
        let length = interface_length(&self.curve, h).unwrap_or(f64::NAN);
        let area = enclosed_area(&self.curve, h).unwrap_or(f64::NAN);
        let surface_energy = self.cfg.sigma * length;
        let div_norm = g.l2_norm(Layout::Segment, &g.segment_divergence(w));
        let h_h2 = sobolev_norm(&self.curve, &h.values, 2.0);
        let v_h1 = v.h1_norm(g);
        let e = v_h1 * v_h1 + h_h2 * h_h2;
        let (energy_sup, v_h2_integral) = match prev {
            Some(p) => (p.energy_sup.max(e), p.v_h2_integral + self.cfg.dt * v.h2_norm(g).powi(2)),
            None => (e, 0.0),
        };
        DiagnosticsRecord {
            t,
            step,
            kinetic,
            surface_energy,
            total_energy: kinetic + surface_energy,
            area,
            length,
            div_norm,
            h_h2,
            v_h1,
            energy_sup,
            v_h2_integral,
            fp_iters,
        }
    }

    /// Diagnostics of `state` as if it were freshly computed.
    pub fn energy(&self, state: &SimState) -> DiagnosticsRecord {
        let mut d = self.diagnostics(state.t, state.step, &state.h, &state.w, &state.m, None, state.diagnostics.fp_iters);
        d.energy_sup = d.energy_sup.max(state.diagnostics.energy_sup);
        d.v_h2_integral = state.diagnostics.v_h2_integral;
        d
    }

    /// Advances one step with the relaxed fixed-point iteration.
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepReport)> {
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let norm = sobolev_norm(&self.curve, &state.h.values, 1.7);
        if !(norm < cfg.varsigma) {
            return Err(Error::SmallnessViolation { norm, threshold: cfg.varsigma });
        }
        let n = cfg.n_theta;
        let off = self.grid.boundary_ring() * n;
        let b0 = self.curve.b0();
        let mut w_bar = state.w.clone();
        let mut h_bar = state.h.clone();
        let mut increments = Vec::new();
        let mut linear_iterations = 0;
        for _ in 0..cfg.fp_max_iter {
            let (h_ee, m_bar) = self.map_for(&h_bar)?;
            let g_bar = self.curvature_load(&h_bar, &h_ee)?;
            let rates =
                MapRates { psi_t: map_time_derivative(&state.m, &m_bar, dt)?, jinv_f_t: jinv_f_rate(&state.m, &m_bar, dt)? };
            let w_t = w_bar.combine(1.0 / dt, &state.w, -1.0 / dt);
            let f_bar = forcing_f_bar(&m_bar, Some(&rates), &w_bar, &w_t)?;
            let sol = self.solver.solve(&m_bar, &f_bar, &g_bar, &state.w, Some(&w_bar))?;
            linear_iterations += sol.iterations;
            let w_new = sol.w;
            let h_new = HeightField::new(
                (0..n)
                    .map(|j| {
                        let nv = self.curve.normal()[j];
                        let wn = w_new.x[off + j] * nv[0] + w_new.y[off + j] * nv[1];
                        state.h.values[j] + dt * wn / (1.0 + b0[j] * h_ee.values[j])
                    })
                    .collect(),
            );
            let dw = w_new.combine(1.0, &w_bar, -1.0).l2_norm(&self.grid);
            let dh: Vec<f64> = h_new.values.iter().zip(&h_bar.values).map(|(a, b)| a - b).collect();
            let inc = dw.max(curve_l2(&self.curve, &dh));
            increments.push(inc);
            if !inc.is_finite() {
                break;
            }
            if inc <= cfg.fp_tol {
                return self.finish(state, h_new, w_new, increments, linear_iterations);
            }
            let r = cfg.relax;
            w_bar = w_new.combine(r, &w_bar, 1.0 - r);
            h_bar = HeightField::new(h_new.values.iter().zip(&h_bar.values).map(|(a, b)| r * a + (1.0 - r) * b).collect());
        }
        Err(Error::FixedPointDivergence {
            iterations: increments.len(),
            increment: increments.last().copied().unwrap_or(f64::NAN),
        })
    }

    fn finish(
        &self,
        state: &SimState,
        h: HeightField,
        w: VectorField,
        increments: Vec<f64>,
        linear_iterations: usize,
    ) -> Result<(SimState, StepReport)> {
        let dt = self.cfg.dt;
        let (h_ee, m) = self.map_for(&h)?;
        let g_bar = self.curvature_load(&h, &h_ee)?;
        let rates = MapRates { psi_t: map_time_derivative(&state.m, &m, dt)?, jinv_f_t: jinv_f_rate(&state.m, &m, dt)? };
        let w_t = w.combine(1.0 / dt, &state.w, -1.0 / dt);
        let f_bar = forcing_f_bar(&m, Some(&rates), &w, &w_t)?;
        let kappa = self.cfg.epsilon * self.cfg.epsilon;
        let (tx, ty) = crate::stokes::momentum_residual(&m, &w, &w_t, &f_bar, Some(&g_bar), kappa)?;
        let q = self.recovery.solve(&tx, &ty);
        let t = state.t + dt;
        let step = state.step + 1;
        let diagnostics = self.diagnostics(t, step, &h, &w, &m, Some(&state.diagnostics), increments.len());
        Ok((SimState { t, step, h, h_ee, w, q, m, diagnostics }, StepReport { increments, linear_iterations }))
    }

    /// Steps until `t_end` or the first error. `observe` sees every state,
    /// the initial one included; an observer error stops the run with
    /// [`TerminalStatus::IoError`].
    pub fn run<E>(
        &self,
        initial: SimState,
        mut observe: impl FnMut(&SimState) -> std::result::Result<(), E>,
    ) -> RunResult<E> {
        let mut state = initial;
        if let Err(e) = observe(&state) {
            return RunResult { state, status: TerminalStatus::IoError, error: None, io_error: Some(e) };
        }
        let steps = self.cfg.steps_from(state.t);
        for _ in 0..steps {
            match self.step(&state) {
                Ok((next, _)) => {
                    state = next;
                    if let Err(e) = observe(&state) {
                        return RunResult { state, status: TerminalStatus::IoError, error: None, io_error: Some(e) };
                    }
                }
                Err(e) => {
                    return RunResult { status: TerminalStatus::from_error(&e), state, error: Some(e), io_error: None };
                }
            }
        }
        RunResult { state, status: TerminalStatus::Completed, error: None, io_error: None }
    }
}

/// Final state of a run and why it stopped.
#[derive(Debug)]
pub struct RunResult<E> {
    pub state: SimState,
    pub status: TerminalStatus,
    pub error: Option<Error>,
    pub io_error: Option<E>,
}

/// One step of the fixed-point map with a freshly built stepper.
pub fn phi_step(state: &SimState, cfg: &SolverConfig) -> Result<SimState> {
    Ok(Stepper::new(cfg)?.step(state)?.0)
}

/// Runs from `(h0, w0)` and returns every state.
pub fn run(cfg: &SolverConfig, w0: &VectorField, h0: &HeightField) -> Result<(Vec<SimState>, TerminalStatus)> {
    let stepper = Stepper::new(cfg)?;
    let init = stepper.initial_state(h0, w0)?;
    let mut states = Vec::new();
    let out = stepper.run(init, |s| {
        states.push(s.clone());
        Ok::<(), std::convert::Infallible>(())
    });
    Ok((states, out.status))
}

/// Initial height for the configured seed (custom heights are read by the CLI).
pub fn seed_height(cfg: &SolverConfig) -> HeightField {
    let curve = ReferenceCurve::unit_circle(cfg.n_theta);
    match cfg.seed_case {
        SeedCase::ModeKPerturbation => {
            let (a, k) = (cfg.perturbation_amplitude, cfg.perturbation_mode as f64);
            HeightField::from_fn(&curve, |s| a * (k * s).cos())
        }
        _ => HeightField::zeros(cfg.n_theta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SolverConfig {
        SolverConfig { n_r: 8, n_theta: 32, dt: 1e-3, t_end: 5e-3, epsilon: SolverConfig::default_epsilon(32), ..Default::default() }
    }

    #[test]
    fn smallness_gate() {
        let c = ReferenceCurve::unit_circle(64);
        assert!(validate_smallness(&c, &HeightField::zeros(64), 0.25));
        let unit = HeightField::from_fn(&c, |s| s.cos());
        let nrm = sobolev_norm(&c, &unit.values, 1.7);
        let h = HeightField::new(unit.values.iter().map(|v| v * 0.25 / nrm * 1.01).collect());
        assert!(!validate_smallness(&c, &h, 0.25));
        let h = HeightField::new(unit.values.iter().map(|v| v * 0.25 / nrm * 0.99).collect());
        assert!(validate_smallness(&c, &h, 0.25));
    }

    #[test]
    fn zero_state_energy() {
        let cfg = small_cfg();
        let st = Stepper::new(&cfg).unwrap();
        let s = st.initial_state(&HeightField::zeros(32), &VectorField::zeros(st.grid())).unwrap();
        assert_eq!(s.diagnostics.kinetic, 0.0);
        assert!((s.diagnostics.surface_energy - 2.0 * PI).abs() < 1e-12);
        let c = 0.05;
        let s = st.initial_state(&HeightField::constant(32, c), &VectorField::zeros(st.grid())).unwrap();
        assert!((s.diagnostics.surface_energy - 2.0 * PI * (1.0 + c)).abs() < 1e-12);
    }

    #[test]
    fn static_circle_is_a_fixed_point() {
        let cfg = SolverConfig { relax: 1.0, ..small_cfg() };
        let st = Stepper::new(&cfg).unwrap();
        let s0 = st.initial_state(&HeightField::zeros(32), &VectorField::zeros(st.grid())).unwrap();
        let (s1, rep) = st.step(&s0).unwrap();
        assert!(rep.increments.len() <= 2, "{:?}", rep.increments);
        assert!(s1.w.max_abs() < 1e-6);
        // The first step carries the start-up transient of the penalized flow.
        let (s2, rep) = st.step(&s1).unwrap();
        assert!(rep.increments.len() <= 2, "{:?}", rep.increments);
        assert!(s2.w.max_abs() < 1e-6);
        for q in &s2.q.values {
            assert!((q - cfg.sigma).abs() < 1e-4, "{q}");
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SolverConfig { theta: -1.0, ..small_cfg() };
        assert!(matches!(Stepper::new(&cfg), Err(Error::InvalidArgument(_))));
        let cfg = SolverConfig { relax: 1.5, ..small_cfg() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn projection_removes_divergence() {
        let cfg = small_cfg();
        let st = Stepper::new(&cfg).unwrap();
        let g = st.grid().clone();
        let w0 = VectorField::from_fn(&g, |x, y| [x - y, x + y * y]);
        let w = st.project(&w0).unwrap();
        let div = g.l2_norm(Layout::Segment, &g.segment_divergence(&w));
        assert!(div < 1e-5, "{div}");
    }
}

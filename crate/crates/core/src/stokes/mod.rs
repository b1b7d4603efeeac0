//! Implicit linear solves: the penalized step, multiplier recovery and the
//! variable-coefficient Stokes problem.

pub mod krylov;
pub mod operator;
pub mod precond;
pub mod pressure;
pub mod variable;

pub use krylov::{gmres, GmresOptions, GmresOutcome};
pub use operator::{BoundaryKind, LinearSystem};
pub use precond::ModalInverse;
pub use pressure::{momentum_residual, recover_pressure, solve_div, PressureRecovery};
pub use variable::{solve_variable_stokes, CoefficientTensor, StokesBoundary, StokesSolution};

use crate::ale_map::AleMap;
use crate::geometry::BoundaryVector;
use crate::grid::{DiskGrid, ScalarField, VectorField};
use crate::{Error, Result};

/// Relative residual target of every linear solve.
pub const LINEAR_TOL: f64 = 1e-10;

pub(crate) fn solve_linear(
    sys: &LinearSystem,
    pre: &ModalInverse,
    rhs: &[f64],
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, GmresOutcome)> {
    let n = sys.n_unknowns();
    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let opts = GmresOptions { rel_tol: LINEAR_TOL, restart: 60, max_iter: (50.0 * (n as f64).sqrt()).ceil() as usize };
    let out = gmres(|v, o| sys.apply(v, o), |v| pre.apply(v), rhs, &mut x, opts);
    if !out.converged {
        return Err(Error::SolverDivergence { iterations: out.iterations, residual: out.rel_residual });
    }
    Ok((x, out))
}

/// Result of one penalized solve.
#[derive(Debug, Clone)]
pub struct PenalizedSolution {
    pub w: VectorField,
    /// `-div w / theta` at segment points.
    pub q_penalty: ScalarField,
    pub iterations: usize,
}

/// Backward-Euler penalized solver with a cached preconditioner.
#[derive(Debug, Clone)]
pub struct PenalizedSolver {
    dt: f64,
    theta: f64,
    kappa: f64,
    pre: ModalInverse,
}

impl PenalizedSolver {
    /// `kappa` multiplies `(w', phi')` on the boundary.
    pub fn new(grid: &DiskGrid, dt: f64, theta: f64, kappa: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(theta >= 0.0) || !(kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!("theta and kappa must be non-negative, got {theta}, {kappa}")));
        }
        let reference = LinearSystem::reference(grid, 1.0, 1.0 / dt, theta, BoundaryKind::Traction { kappa });
        Ok(Self { dt, theta, kappa, pre: ModalInverse::new(&reference) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn system(&self, map: &AleMap) -> LinearSystem {
        LinearSystem::ale(map, 1.0 / self.dt, self.theta, BoundaryKind::Traction { kappa: self.kappa })
    }

    pub fn solve(
        &self,
        map: &AleMap,
        f_bar: &VectorField,
        g_bar: &BoundaryVector,
        w_prev: &VectorField,
        guess: Option<&VectorField>,
    ) -> Result<PenalizedSolution> {
        let grid = map.grid();
        grid.check_len("forcing", f_bar.len())?;
        grid.check_len("w_prev", w_prev.len())?;
        if g_bar.len() != grid.n_theta() {
            return Err(Error::GridMismatch("boundary load has the wrong sample count".into()));
        }
        let min_j = map.min_jacobian();
        if !(min_j > 0.0) {
            return Err(Error::NotDiffeomorphism { min_jacobian: min_j });
        }
        let sys = self.system(map);
        let rhs = sys.load(Some(f_bar), Some((w_prev, 1.0 / self.dt)), Some(g_bar), None);
        let x0 = guess.map(|w| sys.pack(w, &ScalarField::zeros(grid, crate::grid::Layout::Segment)));
        let (x, out) = solve_linear(&sys, &self.pre, &rhs, x0.as_deref())?;
        let (w, q_penalty) = sys.unpack(&x);
        Ok(PenalizedSolution { w, q_penalty, iterations: out.iterations })
    }
}

/// One backward-Euler step of the penalized linear problem with boundary
/// regularization `epsilon^2 (w', phi')`.
pub fn solve_penalized_step(
    map: &AleMap,
    f_bar: &VectorField,
    g_bar: &BoundaryVector,
    w_prev: &VectorField,
    dt: f64,
    theta: f64,
    epsilon: f64,
) -> Result<VectorField> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    let solver = PenalizedSolver::new(map.grid(), dt, theta, epsilon * epsilon)?;
    Ok(solver.solve(map, f_bar, g_bar, w_prev, None)?.w)
}

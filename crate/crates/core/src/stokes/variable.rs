//! Stokes system with a general coefficient tensor `a^{jk}_{rs}`.

use super::operator::{BoundaryKind, LinearSystem};
use super::precond::ModalInverse;
use super::pressure::{residual_for, PressureRecovery};
use super::solve_linear;
use crate::fields_ops::FluxCoefficients;
use crate::geometry::BoundaryVector;
use crate::grid::{DiskGrid, Layout, ScalarField, VectorField};
use crate::{Error, Result};

/// `a[j][k][r][s]`, the coefficient of `w^r_{,j} phi^s_{,k}`.
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Coefficient tensor sampled at segment points.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    pub values: Vec<Tensor4>,
}

impl CoefficientTensor {
    pub fn from_fn(grid: &DiskGrid, f: impl Fn(f64, f64) -> Tensor4) -> Self {
        let n = grid.n_theta();
        let mut values = Vec::with_capacity(grid.len());
        for s in 0..grid.n_rings() {
            for j in 0..n {
                let [x, y] = grid.segment_position(s, j);
                values.push(f(x, y));
            }
        }
        Self { values }
    }

    /// `lambda1 delta_jk delta_rs + lambda2 delta_kr delta_js`.
    pub fn isotropic(lambda1: f64, lambda2: f64) -> Tensor4 {
        let mut a = [[[[0.0; 2]; 2]; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        a[j][k][r][s] = lambda1 * delta(j, k) * delta(r, s) + lambda2 * delta(k, r) * delta(j, s);
                    }
                }
            }
        }
        a
    }

    pub fn identity(grid: &DiskGrid, lambda1: f64, lambda2: f64) -> Self {
        Self::from_fn(grid, |_, _| Self::isotropic(lambda1, lambda2))
    }

    /// Scalar multiple `c(x, y)` of the unit isotropic tensor.
    pub fn scalar(grid: &DiskGrid, c: impl Fn(f64, f64) -> f64) -> Self {
        let unit = Self::isotropic(1.0, 0.0);
        Self::from_fn(grid, |x, y| {
            let v = c(x, y);
            unit.map(|b| b.map(|c2| c2.map(|d| d.map(|e| e * v))))
        })
    }

    /// Largest violation of `a^{jk}_{rs} = a^{kj}_{rs} = a^{jk}_{sr}`.
    pub fn symmetry_defect(&self) -> (usize, f64) {
        let mut worst = (0, 0.0);
        for (p, a) in self.values.iter().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    for r in 0..2 {
                        for s in 0..2 {
                            let d = (a[j][k][r][s] - a[k][j][r][s]).abs().max((a[j][k][r][s] - a[j][k][s][r]).abs());
                            if d > worst.1 {
                                worst = (p, d);
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn check_symmetry(&self) -> Result<()> {
        let scale = self.max_abs().max(1.0);
        let (node, deviation) = self.symmetry_defect();
        if deviation > 1e-12 * scale {
            return Err(Error::CoefficientSymmetryViolation { node, deviation });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().flatten().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a - (lambda1 delta delta + lambda2 delta delta)|`.
    pub fn near_identity_distance(&self, lambda1: f64, lambda2: f64) -> f64 {
        let iso = Self::isotropic(lambda1, lambda2);
        let mut worst: f64 = 0.0;
        for a in &self.values {
            for j in 0..2 {
                for k in 0..2 {
                    for r in 0..2 {
                        for s in 0..2 {
                            worst = worst.max((a[j][k][r][s] - iso[j][k][r][s]).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Mean of `a^{jj}_{rr} / 4`, the scale of the isotropic part.
    pub fn mean_scale(&self) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .map(|a| (0..2).flat_map(|j| (0..2).map(move |r| a[j][j][r][r])).sum::<f64>() / 4.0)
            .sum();
        sum / self.values.len() as f64
    }

    fn flux(a: &Tensor4) -> FluxCoefficients {
        let mut c = [[0.0; 6]; 4];
        for s in 0..2 {
            for k in 0..2 {
                for r in 0..2 {
                    for j in 0..2 {
                        c[2 * s + k][2 * r + j] = a[j][k][r][s];
                    }
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StokesBoundary {
    /// `a w N - q N = epsilon^exponent w'' + g` on the boundary.
    Traction { epsilon: f64, exponent: i32 },
    /// `w = 0` on the boundary.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub w: VectorField,
    /// Lagrange multiplier at segment points.
    pub q: ScalarField,
    pub w_h1: f64,
    pub w_h2: f64,
    pub q_l2: f64,
    pub iterations: usize,
    /// Relative residual of the multiplier least-squares problem.
    pub pressure_residual: f64,
}

const THETA_INNER: f64 = 1e-8;
/// Pins rigid translations, which the traction problem leaves free.
const TRANSLATION_SHIFT: f64 = 1e-10;

pub fn solve_variable_stokes(
    grid: &DiskGrid,
    a: &CoefficientTensor,
    f: &VectorField,
    g: Option<&BoundaryVector>,
    bc: StokesBoundary,
) -> Result<StokesSolution> {
    if a.values.len() != grid.len() {
        return Err(Error::GridMismatch("coefficient tensor has the wrong sample count".into()));
    }
    grid.check_len("f", f.len())?;
    a.check_symmetry()?;
    let (kind, mass) = match bc {
        StokesBoundary::Traction { epsilon, exponent } => {
            if epsilon < 0.0 {
                return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {epsilon}")));
            }
            (BoundaryKind::Traction { kappa: epsilon.powi(exponent) }, TRANSLATION_SHIFT)
        }
        StokesBoundary::Dirichlet => {
            if g.is_some() {
                return Err(Error::InvalidArgument("a Dirichlet problem takes no boundary load".into()));
            }
            (BoundaryKind::Dirichlet, 0.0)
        }
    };
    if let Some(gb) = g {
        if gb.len() != grid.n_theta() {
            return Err(Error::GridMismatch("boundary load has the wrong sample count".into()));
        }
    }
    let coeffs: Vec<FluxCoefficients> = a.values.iter().map(CoefficientTensor::flux).collect();
    let lambda = a.mean_scale();
    let sys = LinearSystem::new(grid, coeffs, mass * lambda, THETA_INNER, kind);
    let reference = LinearSystem::new(
        grid,
        vec![CoefficientTensor::flux(&CoefficientTensor::isotropic(lambda, 0.0)); grid.len()],
        mass * lambda,
        THETA_INNER,
        kind,
    );
    let pre = ModalInverse::new(&reference);
    let mut rhs = sys.load(Some(f), None, g, None);
    let len = grid.len();
    if mass > 0.0 {
        // Remove the net force so the load is compatible with free translations.
        let total_w: f64 = (0..grid.n_rings()).map(|i| grid.node_weight(i) * grid.n_theta() as f64).sum();
        for c in 0..2 {
            let net: f64 = rhs[c * len..(c + 1) * len].iter().sum();
            for k in 0..len {
                rhs[c * len + k] -= net * grid.node_weight(k / grid.n_theta()) / total_w;
            }
        }
    }
    let (x, outcome) = solve_linear(&sys, &pre, &rhs, None)?;
    let (mut w, _) = sys.unpack(&x);
    if mass > 0.0 {
        for comp in [&mut w.x, &mut w.y] {
            let mean = grid.integrate(Layout::Node, comp) / std::f64::consts::PI;
            comp.iter_mut().for_each(|v| *v -= mean);
        }
    }
    let plain = sys.with_parameters(0.0, THETA_INNER);
    let (tx, ty) = residual_for(&plain, &w, None, f, g);
    let rec = PressureRecovery::new(grid, kind == BoundaryKind::Dirichlet);
    let q = rec.solve(&tx, &ty);
    let pressure_residual = rec.residual(&q, &tx, &ty);
    Ok(StokesSolution {
        w_h1: w.h1_norm(grid),
        w_h2: w.h2_norm(grid),
        q_l2: q.l2_norm(grid),
        w,
        q,
        iterations: outcome.iterations,
        pressure_residual,
    })
}

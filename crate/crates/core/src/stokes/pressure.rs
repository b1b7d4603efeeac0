//! Pressure as the Lagrange multiplier of the divergence constraint, and the
//! right inverse of the divergence.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::operator::{BoundaryKind, LinearSystem};
use super::precond::ModalInverse;
use super::solve_linear;
use crate::ale_map::AleMap;
use crate::geometry::BoundaryVector;
use crate::grid::{DiskGrid, Layout, ScalarField, VectorField};
use crate::{Error, Result};

/// Least-squares inverse of `q -> Div^T (W q)` restricted to the admissible
/// test functions. Independent of the map, so it can be reused across steps.
#[derive(Debug, Clone)]
pub struct PressureRecovery {
    grid: DiskGrid,
    dirichlet: bool,
    rows: usize,
    blocks: Vec<DMatrix<Complex64>>,
}

impl PressureRecovery {
    pub fn new(grid: &DiskGrid, dirichlet: bool) -> Self {
        let n = grid.n_theta();
        let nr = grid.n_rings();
        let len = grid.len();
        let rows = if dirichlet { nr - 1 } else { nr };
        let half = n / 2;
        let mut blocks = vec![DMatrix::<Complex64>::zeros(2 * rows, nr); half + 1];
        let mut q = vec![0.0; len];
        for s in 0..nr {
            q.iter_mut().for_each(|v| *v = 0.0);
            q[s * n] = 1.0;
            let (ox, oy) = Self::div_adjoint(grid, &q);
            let (or, ot) = grid.to_polar(&ox, &oy);
            for (c, part) in [or, ot].iter().enumerate() {
                let hat = grid.ring_transform(part);
                for i in 0..rows {
                    for (m, b) in blocks.iter_mut().enumerate() {
                        b[(c * rows + i, s)] = hat[i * n + m];
                    }
                }
            }
        }
        // Genuine singular values sit above 1e-3 of the largest; the Nyquist
        // block carries an unresolved pressure mode that must be dropped.
        let blocks = blocks
            .into_iter()
            .map(|b| {
                let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
                b.pseudo_inverse(1e-8 * scale).expect("non-negative tolerance")
            })
            .collect();
        Self { grid: grid.clone(), dirichlet, rows, blocks }
    }

    /// `Div^T (W q)` as a pair of node vectors.
    pub fn div_adjoint(grid: &DiskGrid, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = grid.n_theta();
        let wq: Vec<f64> = q.iter().enumerate().map(|(k, v)| grid.segments()[k / n].weight * v).collect();
        let mut ox = vec![0.0; grid.len()];
        let mut oy = vec![0.0; grid.len()];
        grid.segment_divergence_adjoint(&wq, &mut ox, &mut oy);
        (ox, oy)
    }

    /// Least-squares `q` with `Div^T (W q) = t` on the admissible rows.
    /// With a Dirichlet boundary the result has zero mean.
    pub fn solve(&self, tx: &[f64], ty: &[f64]) -> ScalarField {
        let g = &self.grid;
        let n = g.n_theta();
        let nr = g.n_rings();
        let rows = self.rows;
        let (tr, tt) = g.to_polar(tx, ty);
        let hats = [g.ring_transform(&tr), g.ring_transform(&tt)];
        let mut sol = vec![Complex64::default(); g.len()];
        let mut rhs = DVector::<Complex64>::zeros(2 * rows);
        for m in 0..n {
            let (block, flip) = if m <= n / 2 { (&self.blocks[m], false) } else { (&self.blocks[n - m], true) };
            for c in 0..2 {
                for i in 0..rows {
                    let z = hats[c][i * n + m];
                    rhs[c * rows + i] = if flip { z.conj() } else { z };
                }
            }
            let y = block * &rhs;
            for s in 0..nr {
                sol[s * n + m] = if flip { y[s].conj() } else { y[s] };
            }
        }
        let mut q = ScalarField { layout: Layout::Segment, values: g.ring_inverse(sol) };
        if self.dirichlet {
            let mean = q.mean(g);
            q.values.iter_mut().for_each(|v| *v -= mean);
        }
        q
    }

    /// Relative residual `|Div^T (W q) - t| / |t|` on the admissible rows.
    pub fn residual(&self, q: &ScalarField, tx: &[f64], ty: &[f64]) -> f64 {
        let (ox, oy) = Self::div_adjoint(&self.grid, &q.values);
        let end = self.rows * self.grid.n_theta();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..end {
            num += (ox[k] - tx[k]).powi(2) + (oy[k] - ty[k]).powi(2);
            den += tx[k].powi(2) + ty[k].powi(2);
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// The functional `T(phi) = (w_t, phi) + B(w, phi) + kappa (w', phi')_Gamma
/// - (F, phi) - (G, phi)_Gamma` as a node vector pair; the multiplier
/// satisfies `T(phi) = (q, div phi)`.
pub fn momentum_residual(
    map: &AleMap,
    w: &VectorField,
    w_t: &VectorField,
    f_bar: &VectorField,
    g_bar: Option<&BoundaryVector>,
    kappa: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = map.grid();
    grid.check_len("w", w.len())?;
    grid.check_len("w_t", w_t.len())?;
    grid.check_len("forcing", f_bar.len())?;
    if let Some(gb) = g_bar {
        if gb.len() != grid.n_theta() {
            return Err(Error::GridMismatch("boundary load has the wrong sample count".into()));
        }
    }
    let sys = LinearSystem::ale(map, 0.0, 0.0, BoundaryKind::Traction { kappa });
    Ok(residual_for(&sys, w, Some((w_t, 1.0)), f_bar, g_bar))
}

pub(crate) fn residual_for(
    sys: &LinearSystem,
    w: &VectorField,
    mass_term: Option<(&VectorField, f64)>,
    f: &VectorField,
    g_bar: Option<&BoundaryVector>,
) -> (Vec<f64>, Vec<f64>) {
    let grid = sys.grid();
    let len = grid.len();
    let n = grid.n_theta();
    let load = sys.load(Some(f), None, g_bar, None);
    let (mut ax, mut ay) = (vec![0.0; len], vec![0.0; len]);
    sys.apply_velocity(&w.x, &w.y, &mut ax, &mut ay);
    let mut tx: Vec<f64> = (0..len).map(|k| ax[k] - load[k]).collect();
    let mut ty: Vec<f64> = (0..len).map(|k| ay[k] - load[len + k]).collect();
    if let Some((u, m)) = mass_term {
        for i in 0..grid.n_rings() {
            let wgt = m * grid.node_weight(i);
            for k in i * n..(i + 1) * n {
                tx[k] += wgt * u.x[k];
                ty[k] += wgt * u.y[k];
            }
        }
    }
    (tx, ty)
}

/// Lagrange multiplier of a traction-boundary step: the `q` with
/// `T(phi) = (q, div phi)` in the least-squares sense. The boundary term uses
/// `epsilon^2`, matching the step solver.
pub fn recover_pressure(
    map: &AleMap,
    w: &VectorField,
    w_t: &VectorField,
    f_bar: &VectorField,
    g_bar: &BoundaryVector,
    epsilon: f64,
) -> Result<ScalarField> {
    let (tx, ty) = momentum_residual(map, w, w_t, f_bar, Some(g_bar), epsilon * epsilon)?;
    Ok(PressureRecovery::new(map.grid(), false).solve(&tx, &ty))
}

/// Right inverse of the divergence at segment points:
/// `u = v + (p_mean / 2)(x, y)` with `v = 0` on the boundary and `div v = p - p_mean`.
pub fn solve_div(p: &ScalarField, grid: &DiskGrid) -> Result<VectorField> {
    if p.layout != Layout::Segment {
        return Err(Error::InvalidArgument("solve_div expects segment-point samples".into()));
    }
    grid.check_len("p", p.values.len())?;
    let mean = p.mean(grid);
    let tilde = ScalarField { layout: Layout::Segment, values: p.values.iter().map(|v| v - mean).collect() };
    let scale = p.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut u = if tilde.values.iter().all(|v| v.abs() <= 1e-13 * scale) {
        // Only rounding noise is left after removing the mean.
        VectorField::zeros(grid)
    } else {
        let sys = LinearSystem::reference(grid, 1.0, 0.0, 1e-10, BoundaryKind::Dirichlet);
        let pre = ModalInverse::new(&sys);
        let rhs = sys.load(None, None, None, Some(&tilde));
        let (x, _) = solve_linear(&sys, &pre, &rhs, None)?;
        sys.unpack(&x).0
    };
    let n = grid.n_theta();
    for i in 0..grid.n_rings() {
        for j in 0..n {
            let [x, y] = grid.node_position(i, j);
            let k = grid.idx(i, j);
            u.x[k] += 0.5 * mean * x;
            u.y[k] += 0.5 * mean * y;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ale_map::harmonic_extend;
    use crate::geometry::{HeightField, ReferenceCurve};

    fn seg_field(grid: &DiskGrid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::from_fn(grid, Layout::Segment, f)
    }

    #[test]
    fn planted_pressure_is_recovered() {
        let g = DiskGrid::new(8, 32).unwrap();
        let rec = PressureRecovery::new(&g, false);
        let q0 = seg_field(&g, |x, y| 1.0 + x * y - 0.3 * x * x * x + y);
        let (tx, ty) = PressureRecovery::div_adjoint(&g, &q0.values);
        let q = rec.solve(&tx, &ty);
        let err = q.values.iter().zip(&q0.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(rec.residual(&q, &tx, &ty) < 1e-10);
    }

    #[test]
    fn dirichlet_recovery_fixes_the_mean() {
        let g = DiskGrid::new(8, 32).unwrap();
        let rec = PressureRecovery::new(&g, true);
        let q0 = seg_field(&g, |x, y| x * x - y * y + 0.5 * x);
        let (tx, ty) = PressureRecovery::div_adjoint(&g, &q0.values);
        let q = rec.solve(&tx, &ty);
        let mean0 = q0.mean(&g);
        let err = q.values.iter().zip(&q0.values).map(|(a, b)| (a - (b - mean0)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn hydrostatic_traction_gives_constant_pressure() {
        let g = DiskGrid::new(8, 32).unwrap();
        let c = ReferenceCurve::unit_circle(32);
        let m = harmonic_extend(&HeightField::zeros(32), &c, &g).unwrap();
        let p0 = 0.7;
        let gb = BoundaryVector::new(c.normal().iter().map(|nv| [-p0 * nv[0], -p0 * nv[1]]).collect());
        let z = VectorField::zeros(&g);
        let q = recover_pressure(&m, &z, &z, &z, &gb, 0.1).unwrap();
        for v in &q.values {
            assert!((v - p0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn div_of_constant_is_radial_field() {
        let g = DiskGrid::new(8, 32).unwrap();
        let p = seg_field(&g, |_, _| 2.5);
        let u = solve_div(&p, &g).unwrap();
        for k in 0..g.len() {
            let r = g.radius(k / 32);
            let [x, y] = [r * g.cos()[k % 32], r * g.sin()[k % 32]];
            assert!((u.x[k] - 1.25 * x).abs() < 1e-9 && (u.y[k] - 1.25 * y).abs() < 1e-9);
        }
        let div = g.segment_divergence(&u);
        assert!(div.iter().all(|d| (d - 2.5).abs() < 1e-10));
    }

    #[test]
    fn div_residual_is_small() {
        let g = DiskGrid::new(16, 64).unwrap();
        let p = seg_field(&g, |x, y| x * x - y * y);
        let u = solve_div(&p, &g).unwrap();
        let div = g.segment_divergence(&u);
        let res: Vec<f64> = div.iter().zip(&p.values).map(|(a, b)| a - b).collect();
        assert!(g.l2_norm(Layout::Segment, &res) < 1e-8);
    }
}

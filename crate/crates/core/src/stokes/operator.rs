//! Discrete weak form on the stacked unknowns `[w^x, w^y, q]`.
//!
//! Velocity rows carry
//! `m (w, phi) + sum_q W_q S(w)_q : grad(phi)_q - sum_q W_q q_q div(phi)_q
//!  + kappa (w', phi')_Gamma`
//! and pressure rows `-W_q div(w)_q - theta W_q q_q`, so eliminating `q`
//! gives the penalty form `(1/theta)(div w, div phi)`.

use crate::ale_map::{AleMap, PointGeometry};
use crate::fields_ops::{flux_coefficients, FluxCoefficients};
use crate::geometry::BoundaryVector;
use crate::grid::{DiskGrid, Layout, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    /// Natural traction condition with `kappa (w', phi')` on the trace ring.
    Traction { kappa: f64 },
    /// `w = 0` on the trace ring.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    grid: DiskGrid,
    coeffs: Vec<FluxCoefficients>,
    mass: f64,
    theta: f64,
    boundary: BoundaryKind,
}

impl LinearSystem {
    pub fn new(grid: &DiskGrid, coeffs: Vec<FluxCoefficients>, mass: f64, theta: f64, boundary: BoundaryKind) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        Self { grid: grid.clone(), coeffs, mass, theta, boundary }
    }

    /// ALE flux of `map` at every segment point.
    pub fn ale(map: &AleMap, mass: f64, theta: f64, boundary: BoundaryKind) -> Self {
        let coeffs = map.segments.iter().map(flux_coefficients).collect();
        Self::new(map.grid(), coeffs, mass, theta, boundary)
    }

    /// Identity-map flux (`S = Def w`) scaled by `scale`.
    pub fn reference(grid: &DiskGrid, scale: f64, mass: f64, theta: f64, boundary: BoundaryKind) -> Self {
        let mut c = flux_coefficients(&PointGeometry::identity(0.0, 0.0));
        c.iter_mut().flatten().for_each(|v| *v *= scale);
        Self::new(grid, vec![c; grid.len()], mass, theta, boundary)
    }

    pub fn grid(&self) -> &DiskGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn coefficients(&self) -> &[FluxCoefficients] {
        &self.coeffs
    }

    pub fn n_unknowns(&self) -> usize {
        3 * self.grid.len()
    }

    /// Same system with new mass and penalty parameters.
    pub fn with_parameters(&self, mass: f64, theta: f64) -> Self {
        Self { mass, theta, ..self.clone() }
    }

    fn masked(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        if self.boundary == BoundaryKind::Dirichlet {
            let off = self.grid.boundary_ring() * self.grid.n_theta();
            v[off..].iter_mut().for_each(|x| *x = 0.0);
        }
        v
    }

    /// Velocity rows of the operator without the pressure coupling.
    pub fn apply_velocity(&self, wx: &[f64], wy: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
        let g = &self.grid;
        let n = g.n_theta();
        let len = g.len();
        let (wx, wy) = (self.masked(wx), self.masked(wy));
        let gx = g.segment_gradient(&wx);
        let gy = g.segment_gradient(&wy);
        let zero = vec![0.0; len];
        let mut b = [vec![0.0; len], vec![0.0; len]];
        let mut c = [vec![0.0; len], vec![0.0; len]];
        for (s, seg) in g.segments().iter().enumerate() {
            for j in 0..n {
                let k = s * n + j;
                let input = [gx.dx[k], gx.dy[k], gy.dx[k], gy.dy[k], gx.val[k], gy.val[k]];
                let cm = &self.coeffs[k];
                let flux: [f64; 4] = std::array::from_fn(|row| (0..6).map(|col| cm[row][col] * input[col]).sum());
                b[0][k] = seg.weight * flux[0];
                c[0][k] = seg.weight * flux[1];
                b[1][k] = seg.weight * flux[2];
                c[1][k] = seg.weight * flux[3];
            }
        }
        out_x.iter_mut().for_each(|v| *v = 0.0);
        out_y.iter_mut().for_each(|v| *v = 0.0);
        g.segment_gradient_adjoint(&zero, &b[0], &c[0], out_x);
        g.segment_gradient_adjoint(&zero, &b[1], &c[1], out_y);
        if self.mass != 0.0 {
            for i in 0..g.n_rings() {
                let m = self.mass * g.node_weight(i);
                for k in i * n..(i + 1) * n {
                    out_x[k] += m * wx[k];
                    out_y[k] += m * wy[k];
                }
            }
        }
        if let BoundaryKind::Traction { kappa } = self.boundary {
            if kappa != 0.0 {
                let off = g.boundary_ring() * n;
                let dth = g.dtheta();
                for (w, out) in [(&wx, &mut *out_x), (&wy, &mut *out_y)] {
                    let d = g.fourier().derivative(&w[off..], 1, 2.0 * std::f64::consts::PI);
                    let dd = g.fourier().derivative(&d, 1, 2.0 * std::f64::consts::PI);
                    for j in 0..n {
                        out[off + j] -= kappa * dth * dd[j];
                    }
                }
            }
        }
    }

    /// Adds `-Div^T (W q)` to the velocity rows.
    pub fn apply_pressure_coupling(&self, q: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
        let g = &self.grid;
        let n = g.n_theta();
        let wq: Vec<f64> = (0..g.len()).map(|k| -g.segments()[k / n].weight * q[k]).collect();
        g.segment_divergence_adjoint(&wq, out_x, out_y);
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let len = g.len();
        let n = g.n_theta();
        let (wx, rest) = x.split_at(len);
        let (wy, q) = rest.split_at(len);
        let (ox, rest) = out.split_at_mut(len);
        let (oy, oq) = rest.split_at_mut(len);
        self.apply_velocity(wx, wy, ox, oy);
        self.apply_pressure_coupling(q, ox, oy);
        let w = VectorField { x: self.masked(wx), y: self.masked(wy) };
        let div = g.segment_divergence(&w);
        for k in 0..len {
            let wt = g.segments()[k / n].weight;
            oq[k] = -wt * div[k] - self.theta * wt * q[k];
        }
        if self.boundary == BoundaryKind::Dirichlet {
            let off = g.boundary_ring() * n;
            ox[off..len].copy_from_slice(&wx[off..len]);
            oy[off..len].copy_from_slice(&wy[off..len]);
        }
    }

    /// Velocity load `m_load (u, phi) + (f, phi) + (g, phi)_Gamma`; pressure rows
    /// get `-W p` when a divergence target `p` is given.
    pub fn load(
        &self,
        f: Option<&VectorField>,
        mass_term: Option<(&VectorField, f64)>,
        g_bnd: Option<&BoundaryVector>,
        div_target: Option<&ScalarField>,
    ) -> Vec<f64> {
        let g = &self.grid;
        let len = g.len();
        let n = g.n_theta();
        let mut rhs = vec![0.0; 3 * len];
        for i in 0..g.n_rings() {
            let wgt = g.node_weight(i);
            for k in i * n..(i + 1) * n {
                if let Some(f) = f {
                    rhs[k] += wgt * f.x[k];
                    rhs[len + k] += wgt * f.y[k];
                }
                if let Some((u, m)) = mass_term {
                    rhs[k] += m * wgt * u.x[k];
                    rhs[len + k] += m * wgt * u.y[k];
                }
            }
        }
        let off = g.boundary_ring() * n;
        if let Some(gb) = g_bnd {
            for j in 0..n {
                rhs[off + j] += g.dtheta() * gb.values[j][0];
                rhs[len + off + j] += g.dtheta() * gb.values[j][1];
            }
        }
        if let Some(p) = div_target {
            assert_eq!(p.layout, Layout::Segment);
            for k in 0..len {
                rhs[2 * len + k] = -g.segments()[k / n].weight * p.values[k];
            }
        }
        if self.boundary == BoundaryKind::Dirichlet {
            for k in off..len {
                rhs[k] = 0.0;
                rhs[len + k] = 0.0;
            }
        }
        rhs
    }

    /// Splits a stacked vector into velocity and segment pressure.
    pub fn unpack(&self, x: &[f64]) -> (VectorField, ScalarField) {
        let len = self.grid.len();
        (
            VectorField { x: x[..len].to_vec(), y: x[len..2 * len].to_vec() },
            ScalarField { layout: Layout::Segment, values: x[2 * len..].to_vec() },
        )
    }

    pub fn pack(&self, w: &VectorField, q: &ScalarField) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_unknowns());
        x.extend_from_slice(&w.x);
        x.extend_from_slice(&w.y);
        x.extend_from_slice(&q.values);
        x
    }
}

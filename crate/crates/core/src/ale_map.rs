//! Harmonic extension of the boundary placement into the reference disk and
//! the pointwise quantities derived from it.
//!
//! Each Cartesian component of the boundary datum with Fourier coefficients
//! `c_k` extends to `Re[c_0 + 2 sum_{k>=1} c_k z^k]`, the real part of a
//! holomorphic function `G`. Derivatives follow from `G'` and `G''` at any
//! radius, so the map and its first two derivatives are exact on every ring.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{metric, unit_normal, HeightField, ReferenceCurve};
use crate::grid::{DiskGrid, Layout, VectorField};
use crate::spectral::Fourier;

const JACOBIAN_FLOOR: f64 = 1e-8;

pub type Mat2 = [[f64; 2]; 2];

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inv2(m: &Mat2) -> Mat2 {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose2(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Map data at one sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub psi: [f64; 2],
    /// `f[i][r] = psi^i_{,r}`
    pub f: Mat2,
    /// `hess[i][r][j] = psi^i_{,rj}`
    pub hess: [[[f64; 2]; 2]; 2],
    pub jac: f64,
    /// `a[k][l] = A^k_l`, the inverse of `f`.
    pub a: Mat2,
}

impl PointGeometry {
    pub fn identity(x: f64, y: f64) -> Self {
        Self {
            psi: [x, y],
            f: [[1.0, 0.0], [0.0, 1.0]],
            hess: [[[0.0; 2]; 2]; 2],
            jac: 1.0,
            a: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// `m[i][r][j] = (J^{-1} psi^i_{,r})_{,j}`
    pub fn jinv_f_gradient(&self) -> [[[f64; 2]; 2]; 2] {
        let f = &self.f;
        let mut djac = [0.0; 2];
        for (j, dj) in djac.iter_mut().enumerate() {
            let h = |i: usize, r: usize| self.hess[i][r][j];
            *dj = h(0, 0) * f[1][1] + f[0][0] * h(1, 1) - h(0, 1) * f[1][0] - f[0][1] * h(1, 0);
        }
        let mut m = [[[0.0; 2]; 2]; 2];
        let ij = 1.0 / self.jac;
        for i in 0..2 {
            for r in 0..2 {
                for j in 0..2 {
                    m[i][r][j] = ij * self.hess[i][r][j] - ij * ij * djac[j] * f[i][r];
                }
            }
        }
        m
    }

    /// `q[i][s][l] = (psi^i_{,s} A^k_l)_{,k}`
    pub fn piola_divergence(&self) -> [[[f64; 2]; 2]; 2] {
        // (dA^k_l/dx_k) = -A^k_m psi^m_{,nk} A^n_l
        let mut div_a = [0.0; 2];
        for (l, d) in div_a.iter_mut().enumerate() {
            for k in 0..2 {
                for m in 0..2 {
                    for n in 0..2 {
                        *d -= self.a[k][m] * self.hess[m][n][k] * self.a[n][l];
                    }
                }
            }
        }
        let mut q = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for s in 0..2 {
                for l in 0..2 {
                    let mut v = self.f[i][s] * div_a[l];
                    for k in 0..2 {
                        v += self.hess[i][s][k] * self.a[k][l];
                    }
                    q[i][s][l] = v;
                }
            }
        }
        q
    }

    /// `J^{-1} f`
    pub fn jinv_f(&self) -> Mat2 {
        let ij = 1.0 / self.jac;
        [[ij * self.f[0][0], ij * self.f[0][1]], [ij * self.f[1][0], ij * self.f[1][1]]]
    }
}

/// Holomorphic-series representation of a harmonic vector field on the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicExtension {
    /// Normalized Fourier coefficients `c_k`, `k = 0 .. n/2 - 1`, per component.
    coeffs: [Vec<Complex64>; 2],
}

impl HarmonicExtension {
    pub fn from_boundary(fourier: &Fourier, bx: &[f64], by: &[f64]) -> Self {
        let keep = fourier.len() / 2;
        let cx = fourier.coefficients(bx)[..keep].to_vec();
        let cy = fourier.coefficients(by)[..keep].to_vec();
        Self { coeffs: [cx, cy] }
    }

    /// `G^{(order)}` of component `comp` on the ring of radius `rho`.
    fn holomorphic(&self, fourier: &Fourier, comp: usize, rho: f64, order: usize) -> Vec<Complex64> {
        let n = fourier.len();
        let c = &self.coeffs[comp];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut rp = 1.0;
        for (m, slot) in buf.iter_mut().enumerate() {
            let k = m + order;
            if k >= c.len() {
                break;
            }
            let mut fall = 1.0;
            for t in 0..order {
                fall *= (k - t) as f64;
            }
            let scale = if k == 0 { 1.0 } else { 2.0 };
            *slot = c[k] * (scale * fall * rp);
            rp *= rho;
        }
        fourier.inverse_in_place(&mut buf);
        buf
    }

    /// Component values on a ring.
    pub fn values(&self, fourier: &Fourier, comp: usize, rho: f64) -> Vec<f64> {
        self.holomorphic(fourier, comp, rho, 0).iter().map(|z| z.re).collect()
    }

    /// Full map data on a ring of radius `rho`.
    pub fn ring(&self, fourier: &Fourier, rho: f64) -> Vec<PointGeometry> {
        let n = fourier.len();
        let mut out = vec![PointGeometry::identity(0.0, 0.0); n];
        for comp in 0..2 {
            let g0 = self.holomorphic(fourier, comp, rho, 0);
            let g1 = self.holomorphic(fourier, comp, rho, 1);
            let g2 = self.holomorphic(fourier, comp, rho, 2);
            for j in 0..n {
                let p = &mut out[j];
                p.psi[comp] = g0[j].re;
                p.f[comp] = [g1[j].re, -g1[j].im];
                p.hess[comp] = [[g2[j].re, -g2[j].im], [-g2[j].im, -g2[j].re]];
            }
        }
        for p in &mut out {
            p.jac = det2(&p.f);
            p.a = inv2(&p.f);
        }
        out
    }
}

/// The ALE map `psi` sampled on the disk grid.
#[derive(Debug, Clone)]
pub struct AleMap {
    grid: DiskGrid,
    extension: HarmonicExtension,
    boundary_height: HeightField,
    /// Map values at nodes.
    pub psi: VectorField,
    /// Map data at nodes, ring-major.
    pub nodes: Vec<PointGeometry>,
    /// Map data at segment points, ring-major.
    pub segments: Vec<PointGeometry>,
}

fn check_disk_curve(curve: &ReferenceCurve, grid: &DiskGrid) -> Result<()> {
    if curve.n_theta() != grid.n_theta() {
        return Err(Error::GridMismatch(format!(
            "curve has {} samples, disk grid has {}",
            curve.n_theta(),
            grid.n_theta()
        )));
    }
    let off = curve
        .position()
        .iter()
        .enumerate()
        .map(|(j, p)| (p[0] - grid.cos()[j]).abs().max((p[1] - grid.sin()[j]).abs()))
        .fold(0.0, f64::max);
    if off > 1e-12 {
        return Err(Error::InvalidArgument(
            "the reference domain must be the unit disk bounded by the unit circle".into(),
        ));
    }
    Ok(())
}

impl AleMap {
    pub fn identity(grid: &DiskGrid) -> Self {
        let curve = ReferenceCurve::unit_circle(grid.n_theta());
        harmonic_extend(&HeightField::zeros(grid.n_theta()), &curve, grid)
            .expect("identity map is a diffeomorphism")
    }

    pub fn grid(&self) -> &DiskGrid {
        &self.grid
    }

    pub fn boundary_height(&self) -> &HeightField {
        &self.boundary_height
    }

    pub fn extension(&self) -> &HarmonicExtension {
        &self.extension
    }

    pub fn geometry(&self, layout: Layout) -> &[PointGeometry] {
        match layout {
            Layout::Node => &self.nodes,
            Layout::Segment => &self.segments,
        }
    }

    pub fn jacobian(&self) -> Vec<f64> {
        self.nodes.iter().map(|p| p.jac).collect()
    }

    pub fn min_jacobian(&self) -> f64 {
        self.nodes.iter().chain(&self.segments).map(|p| p.jac).fold(f64::INFINITY, f64::min)
    }

    /// `max |A grad(psi) - Id|` over all samples.
    pub fn inverse_defect(&self) -> f64 {
        self.nodes
            .iter()
            .chain(&self.segments)
            .map(|p| {
                let m = mul2(&p.a, &p.f);
                (m[0][0] - 1.0).abs().max(m[0][1].abs()).max(m[1][0].abs()).max((m[1][1] - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Builds `psi` with `psi = e + h_ee N` on the unit circle and `Laplace psi = 0`.
pub fn harmonic_extend(h_ee: &HeightField, curve: &ReferenceCurve, grid: &DiskGrid) -> Result<AleMap> {
    check_disk_curve(curve, grid)?;
    crate::geometry::check_admissible(curve, h_ee)?;
    let n = grid.n_theta();
    let (bx, by): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| {
            let x = curve.position()[j];
            let nn = curve.normal()[j];
            (x[0] + h_ee.values[j] * nn[0], x[1] + h_ee.values[j] * nn[1])
        })
        .unzip();
    let extension = HarmonicExtension::from_boundary(grid.fourier(), &bx, &by);
    let mut nodes = Vec::with_capacity(grid.len());
    for i in 0..grid.n_rings() {
        nodes.extend(extension.ring(grid.fourier(), grid.radius(i)));
    }
    let mut segments = Vec::with_capacity(grid.len());
    for seg in grid.segments() {
        segments.extend(extension.ring(grid.fourier(), seg.rho));
    }
    let psi = VectorField {
        x: nodes.iter().map(|p| p.psi[0]).collect(),
        y: nodes.iter().map(|p| p.psi[1]).collect(),
    };
    let map = AleMap {
        grid: grid.clone(),
        extension,
        boundary_height: h_ee.clone(),
        psi,
        nodes,
        segments,
    };
    let min_jacobian = map.min_jacobian();
    if !(min_jacobian > JACOBIAN_FLOOR) {
        return Err(Error::NotDiffeomorphism { min_jacobian });
    }
    Ok(map)
}

fn piola_defect(curve: &ReferenceCurve, h_ee: &HeightField, cof: &[Mat2]) -> Result<f64> {
    let g = metric(curve, h_ee)?;
    let n = unit_normal(curve, h_ee)?;
    let mut worst: f64 = 0.0;
    for j in 0..curve.n_theta() {
        let nn = curve.normal()[j];
        let c = &cof[j];
        let sg = g.values[j].sqrt();
        for i in 0..2 {
            let lhs = c[i][0] * nn[0] + c[i][1] * nn[1];
            worst = worst.max((lhs - sg * n.values[j][i]).abs());
        }
    }
    Ok(worst)
}

/// `max_j |J A^T N - sqrt(g) n o psi|` with the map data on the trace ring.
pub fn piola_residual(map: &AleMap, h_ee: &HeightField, curve: &ReferenceCurve) -> Result<f64> {
    let grid = &map.grid;
    let off = grid.boundary_ring() * grid.n_theta();
    let cof: Vec<Mat2> = (0..grid.n_theta())
        .map(|j| {
            let p = &map.nodes[off + j];
            let at = transpose2(&p.a);
            [[p.jac * at[0][0], p.jac * at[0][1]], [p.jac * at[1][0], p.jac * at[1][1]]]
        })
        .collect();
    piola_defect(curve, h_ee, &cof)
}

/// Same residual with `J` and `A` carried to `r = 1` by linear extrapolation
/// from the two outermost interior rings.
pub fn piola_residual_extrapolated(map: &AleMap, h_ee: &HeightField, curve: &ReferenceCurve) -> Result<f64> {
    let grid = &map.grid;
    let n = grid.n_theta();
    let (i1, i2) = (grid.n_r() - 1, grid.n_r() - 2);
    let (r1, r2) = (grid.radius(i1), grid.radius(i2));
    let (w1, w2) = ((1.0 - r2) / (r1 - r2), (r1 - 1.0) / (r1 - r2));
    let cof: Vec<Mat2> = (0..n)
        .map(|j| {
            let p1 = &map.nodes[grid.idx(i1, j)];
            let p2 = &map.nodes[grid.idx(i2, j)];
            let jac = w1 * p1.jac + w2 * p2.jac;
            let mut c = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    // (J A^T)[a][b] = J A[b][a]
                    c[a][b] = jac * (w1 * p1.a[b][a] + w2 * p2.a[b][a]);
                }
            }
            c
        })
        .collect();
    piola_defect(curve, h_ee, &cof)
}

/// `w = J A v` at nodes.
pub fn pushforward_w(v: &VectorField, map: &AleMap) -> VectorField {
    let mut w = VectorField { x: vec![0.0; v.len()], y: vec![0.0; v.len()] };
    for (k, p) in map.nodes.iter().enumerate() {
        let (vx, vy) = (v.x[k], v.y[k]);
        w.x[k] = p.jac * (p.a[0][0] * vx + p.a[0][1] * vy);
        w.y[k] = p.jac * (p.a[1][0] * vx + p.a[1][1] * vy);
    }
    w
}

/// `v = J^{-1} grad(psi) w` at nodes.
pub fn pullback_v(w: &VectorField, map: &AleMap) -> VectorField {
    let mut v = VectorField { x: vec![0.0; w.len()], y: vec![0.0; w.len()] };
    for (k, p) in map.nodes.iter().enumerate() {
        let (wx, wy) = (w.x[k], w.y[k]);
        v.x[k] = (p.f[0][0] * wx + p.f[0][1] * wy) / p.jac;
        v.y[k] = (p.f[1][0] * wx + p.f[1][1] * wy) / p.jac;
    }
    v
}

fn check_same_grid(a: &AleMap, b: &AleMap) -> Result<()> {
    if a.grid.n_r() != b.grid.n_r() || a.grid.n_theta() != b.grid.n_theta() {
        return Err(Error::GridMismatch(format!(
            "maps on {}x{} and {}x{} grids",
            a.grid.n_r(),
            a.grid.n_theta(),
            b.grid.n_r(),
            b.grid.n_theta()
        )));
    }
    Ok(())
}

/// Backward difference `(psi_curr - psi_prev)/dt` at nodes.
pub fn map_time_derivative(prev: &AleMap, curr: &AleMap, dt: f64) -> Result<VectorField> {
    check_same_grid(prev, curr)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    Ok(curr.psi.combine(1.0 / dt, &prev.psi, -1.0 / dt))
}

/// Backward difference of `J^{-1} grad(psi)` at nodes.
pub fn jinv_f_rate(prev: &AleMap, curr: &AleMap, dt: f64) -> Result<Vec<Mat2>> {
    check_same_grid(prev, curr)?;
    Ok(prev
        .nodes
        .iter()
        .zip(&curr.nodes)
        .map(|(p, c)| {
            let (a, b) = (p.jinv_f(), c.jinv_f());
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for r in 0..2 {
                    m[i][r] = (b[i][r] - a[i][r]) / dt;
                }
            }
            m
        })
        .collect())
}

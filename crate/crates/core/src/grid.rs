//! Polar discretization of the reference disk.
//!
//! Node rings sit at `r_i = (i + 1/2)/n_r` for `i < n_r` plus one trace ring
//! at `r = 1`. Angles are `theta_j = 2 pi j / n_theta`, and vector fields are
//! stored in Cartesian components, ring-major.
//!
//! Weak forms are evaluated at segment points: one per ring gap along each
//! ray, with a special segment crossing the origin that pairs ring 0 at
//! `theta_j` with ring 0 at `theta_j + pi`. On segments the radial derivative
//! is a two-point difference and the angular derivative is spectral, which
//! makes `sum_q W_q div(phi)_q = sum_j dtheta phi_b(theta_j) . N_j` exact.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::Fourier;

/// One segment ring. Values are `(1 - t) u_lower + t u_upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub rho: f64,
    pub lower: usize,
    /// The lower endpoint is the lower ring at `theta + pi`.
    pub lower_opposite: bool,
    pub upper: usize,
    pub t: f64,
    pub length: f64,
    /// Quadrature weight of one segment point (includes `dtheta`).
    pub weight: f64,
}

#[derive(Debug, Clone)]
struct Stencil {
    /// `(ring, opposite, weight)`
    taps: Vec<(usize, bool, f64)>,
}

#[derive(Debug, Clone)]
pub struct DiskGrid {
    n_r: usize,
    n_theta: usize,
    dr: f64,
    dtheta: f64,
    radii: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    node_weights: Vec<f64>,
    segments: Vec<Segment>,
    radial: Vec<Stencil>,
    fourier: Fourier,
}

/// Finite-difference weights for the `order`-th derivative at `x0`
/// (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

impl DiskGrid {
    pub fn new(n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r < 4 {
            return Err(Error::InvalidArgument(format!("n_r = {n_r} must be at least 4")));
        }
        if n_theta < 8 || !n_theta.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "n_theta = {n_theta} must be even and at least 8"
            )));
        }
        let dr = 1.0 / n_r as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let mut radii: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
        radii.push(1.0);
        let cos = (0..n_theta).map(|j| (j as f64 * dtheta).cos()).collect();
        let sin = (0..n_theta).map(|j| (j as f64 * dtheta).sin()).collect();

        let mut segments = Vec::with_capacity(n_r + 1);
        segments.push(Segment {
            rho: dr / 4.0,
            lower: 0,
            lower_opposite: true,
            upper: 0,
            t: 0.75,
            length: dr,
            weight: dr * dr / 8.0 * dtheta,
        });
        for s in 1..n_r {
            let rho = s as f64 * dr;
            segments.push(Segment {
                rho,
                lower: s - 1,
                lower_opposite: false,
                upper: s,
                t: 0.5,
                length: dr,
                weight: rho * dr * dtheta,
            });
        }
        let rho = 1.0 - dr / 4.0;
        segments.push(Segment {
            rho,
            lower: n_r - 1,
            lower_opposite: false,
            upper: n_r,
            t: 0.5,
            length: dr / 2.0,
            weight: rho * dr / 2.0 * dtheta,
        });

        // Control volumes are bounded by the neighbouring segment radii.
        let mut bounds: Vec<f64> = vec![0.0];
        bounds.extend(segments[1..].iter().map(|s| s.rho));
        bounds.push(1.0);
        let node_weights = (0..=n_r)
            .map(|i| 0.5 * (bounds[i + 1].powi(2) - bounds[i].powi(2)) * dtheta)
            .collect();

        // Radial line through the origin: -1, -r_{n-1}, .., -r_0, r_0, .., r_{n-1}, 1.
        let line_len = 2 * n_r + 2;
        let line_x = |p: usize| -> f64 {
            if p <= n_r {
                -radii[n_r - p]
            } else {
                radii[p - n_r - 1]
            }
        };
        let line_node = |p: usize| -> (usize, bool) {
            if p <= n_r {
                (n_r - p, true)
            } else {
                (p - n_r - 1, false)
            }
        };
        let mut radial = Vec::with_capacity(n_r + 1);
        for i in 0..n_r {
            let p = n_r + 1 + i;
            let lo = p.saturating_sub(2).min(line_len - 5);
            let pts: Vec<usize> = (lo..lo + 5).collect();
            let xs: Vec<f64> = pts.iter().map(|&q| line_x(q)).collect();
            let w = fd_weights(line_x(p), &xs, 1);
            radial.push(Stencil {
                taps: pts.iter().zip(w).map(|(&q, w)| {
                    let (ring, opp) = line_node(q);
                    (ring, opp, w)
                })
                .collect(),
            });
        }
        let xs = [1.0, radii[n_r - 1], radii[n_r - 2]];
        let w = fd_weights(1.0, &xs, 1);
        radial.push(Stencil {
            taps: vec![(n_r, false, w[0]), (n_r - 1, false, w[1]), (n_r - 2, false, w[2])],
        });

        Ok(Self {
            n_r,
            n_theta,
            dr,
            dtheta,
            radii,
            cos,
            sin,
            node_weights,
            segments,
            radial,
            fourier: Fourier::new(n_theta),
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Node rings including the trace ring at `r = 1`.
    pub fn n_rings(&self) -> usize {
        self.n_r + 1
    }

    /// Samples per node (or segment) layout.
    pub fn len(&self) -> usize {
        self.n_rings() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn boundary_ring(&self) -> usize {
        self.n_r
    }

    #[inline]
    pub fn idx(&self, ring: usize, j: usize) -> usize {
        ring * self.n_theta + j
    }

    #[inline]
    pub fn opposite(&self, j: usize) -> usize {
        (j + self.n_theta / 2) % self.n_theta
    }

    /// Area weight of each node on ring `i` (includes `dtheta`).
    pub fn node_weight(&self, i: usize) -> f64 {
        self.node_weights[i]
    }

    pub fn node_position(&self, i: usize, j: usize) -> [f64; 2] {
        let r = self.radii[i];
        [r * self.cos[j], r * self.sin[j]]
    }

    pub fn segment_position(&self, s: usize, j: usize) -> [f64; 2] {
        let r = self.segments[s].rho;
        [r * self.cos[j], r * self.sin[j]]
    }

    /// Radius of a sample in the given layout.
    pub fn layout_radius(&self, layout: Layout, ring: usize) -> f64 {
        match layout {
            Layout::Node => self.radii[ring],
            Layout::Segment => self.segments[ring].rho,
        }
    }

    pub fn layout_weight(&self, layout: Layout, ring: usize) -> f64 {
        match layout {
            Layout::Node => self.node_weights[ring],
            Layout::Segment => self.segments[ring].weight,
        }
    }

    /// `sum_i w_i f_i` over the given layout.
    pub fn integrate(&self, layout: Layout, f: &[f64]) -> f64 {
        let n = self.n_theta;
        (0..self.n_rings())
            .map(|i| self.layout_weight(layout, i) * f[i * n..(i + 1) * n].iter().sum::<f64>())
            .sum()
    }

    pub fn l2_norm(&self, layout: Layout, f: &[f64]) -> f64 {
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        self.integrate(layout, &sq).sqrt()
    }

    /// Spectral angular derivative `d/dtheta`, ring by ring.
    pub fn angular_derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n_theta;
        let mut out = vec![0.0; u.len()];
        let mut scratch = Vec::with_capacity(n);
        for (src, dst) in u.chunks(n).zip(out.chunks_mut(n)) {
            self.fourier.derivative_into(src, dst, &mut scratch);
        }
        out
    }

    /// Radial derivative at nodes along the ray through each node.
    pub fn radial_derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n_theta;
        let mut out = vec![0.0; self.len()];
        for (i, st) in self.radial.iter().enumerate() {
            for j in 0..n {
                let jo = self.opposite(j);
                out[i * n + j] = st
                    .taps
                    .iter()
                    .map(|&(ring, opp, w)| w * u[ring * n + if opp { jo } else { j }])
                    .sum();
            }
        }
        out
    }

    /// Cartesian gradient `(d/dx, d/dy)` at nodes.
    pub fn node_gradient(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ur = self.radial_derivative(u);
        let ut = self.angular_derivative(u);
        let n = self.n_theta;
        let mut dx = vec![0.0; self.len()];
        let mut dy = vec![0.0; self.len()];
        for i in 0..self.n_rings() {
            let r = self.radii[i];
            for j in 0..n {
                let k = i * n + j;
                let (c, s) = (self.cos[j], self.sin[j]);
                dx[k] = c * ur[k] - s / r * ut[k];
                dy[k] = s * ur[k] + c / r * ut[k];
            }
        }
        (dx, dy)
    }

    /// Interpolated values at segment points.
    pub fn segment_values(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n_theta;
        let mut out = vec![0.0; self.len()];
        for (s, seg) in self.segments.iter().enumerate() {
            for j in 0..n {
                let jl = if seg.lower_opposite { self.opposite(j) } else { j };
                out[s * n + j] = (1.0 - seg.t) * u[seg.lower * n + jl] + seg.t * u[seg.upper * n + j];
            }
        }
        out
    }

    /// Values and Cartesian gradient at segment points.
    pub fn segment_gradient(&self, u: &[f64]) -> SegmentGradient {
        let n = self.n_theta;
        let val = self.segment_values(u);
        let dtheta = self.angular_derivative(&val);
        let mut dx = vec![0.0; self.len()];
        let mut dy = vec![0.0; self.len()];
        for (s, seg) in self.segments.iter().enumerate() {
            for j in 0..n {
                let jl = if seg.lower_opposite { self.opposite(j) } else { j };
                let k = s * n + j;
                let drho = (u[seg.upper * n + j] - u[seg.lower * n + jl]) / seg.length;
                let (c, sn) = (self.cos[j], self.sin[j]);
                dx[k] = c * drho - sn / seg.rho * dtheta[k];
                dy[k] = sn * drho + c / seg.rho * dtheta[k];
            }
        }
        SegmentGradient { val, dx, dy }
    }

    /// Adds to `out` the node vector `g` with
    /// `<g, u> = sum_q a_q val_q + b_q dx_q + c_q dy_q` for every `u`.
    pub fn segment_gradient_adjoint(&self, a: &[f64], b: &[f64], c: &[f64], out: &mut [f64]) {
        let n = self.n_theta;
        let mut e = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        for (s, seg) in self.segments.iter().enumerate() {
            for j in 0..n {
                let k = s * n + j;
                let (cs, sn) = (self.cos[j], self.sin[j]);
                e[k] = (-b[k] * sn + c[k] * cs) / seg.rho;
                d[k] = b[k] * cs + c[k] * sn;
            }
        }
        // The spectral derivative is antisymmetric.
        let de = self.angular_derivative(&e);
        for (s, seg) in self.segments.iter().enumerate() {
            for j in 0..n {
                let k = s * n + j;
                let jl = if seg.lower_opposite { self.opposite(j) } else { j };
                let vc = a[k] - de[k];
                let dc = d[k] / seg.length;
                out[seg.lower * n + jl] += (1.0 - seg.t) * vc - dc;
                out[seg.upper * n + j] += seg.t * vc + dc;
            }
        }
    }

    /// Divergence at segment points (the one paired with pressure).
    pub fn segment_divergence(&self, w: &VectorField) -> Vec<f64> {
        let gx = self.segment_gradient(&w.x);
        let gy = self.segment_gradient(&w.y);
        gx.dx.iter().zip(&gy.dy).map(|(a, b)| a + b).collect()
    }

    /// Adds `Div^T p` (segment-to-node adjoint of `segment_divergence`).
    pub fn segment_divergence_adjoint(&self, p: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
        let zero = vec![0.0; self.len()];
        self.segment_gradient_adjoint(&zero, p, &zero, out_x);
        self.segment_gradient_adjoint(&zero, &zero, p, out_y);
    }

    /// Cartesian to polar components `(radial, angular)` at nodes.
    pub fn to_polar(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_theta;
        let mut r = vec![0.0; x.len()];
        let mut t = vec![0.0; x.len()];
        for k in 0..x.len() {
            let (c, s) = (self.cos[k % n], self.sin[k % n]);
            r[k] = c * x[k] + s * y[k];
            t[k] = -s * x[k] + c * y[k];
        }
        (r, t)
    }

    pub fn from_polar(&self, r: &[f64], t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_theta;
        let mut x = vec![0.0; r.len()];
        let mut y = vec![0.0; r.len()];
        for k in 0..r.len() {
            let (c, s) = (self.cos[k % n], self.sin[k % n]);
            x[k] = c * r[k] - s * t[k];
            y[k] = s * r[k] + c * t[k];
        }
        (x, y)
    }

    /// Complex Fourier coefficients of each ring (unnormalized forward FFT).
    pub fn ring_transform(&self, u: &[f64]) -> Vec<Complex64> {
        let n = self.n_theta;
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for chunk in buf.chunks_mut(n) {
            self.fourier.forward_in_place(chunk);
        }
        buf
    }

    /// Inverse of [`ring_transform`](Self::ring_transform), returning real parts.
    pub fn ring_inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        let n = self.n_theta;
        let scale = 1.0 / n as f64;
        for chunk in buf.chunks_mut(n) {
            self.fourier.inverse_in_place(chunk);
        }
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::GridMismatch(format!(
                "{what} has {len} samples, grid expects {}",
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGradient {
    pub val: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Where the samples of a scalar field live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Layout {
    Node,
    Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &DiskGrid, layout: Layout) -> Self {
        Self { layout, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &DiskGrid, layout: Layout, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n_theta();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_rings() {
            let r = grid.layout_radius(layout, i);
            for j in 0..n {
                values.push(f(r * grid.cos[j], r * grid.sin[j]));
            }
        }
        Self { layout, values }
    }

    pub fn l2_norm(&self, grid: &DiskGrid) -> f64 {
        grid.l2_norm(self.layout, &self.values)
    }

    pub fn mean(&self, grid: &DiskGrid) -> f64 {
        grid.integrate(self.layout, &self.values) / PI
    }
}

/// Cartesian vector samples at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &DiskGrid) -> Self {
        Self { x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &DiskGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.n_rings() {
            for j in 0..grid.n_theta() {
                let [x, y] = grid.node_position(i, j);
                let v = f(x, y);
                let k = grid.idx(i, j);
                out.x[k] = v[0];
                out.y[k] = v[1];
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn get(&self, k: usize) -> [f64; 2] {
        [self.x[k], self.y[k]]
    }

    pub fn set(&mut self, k: usize, v: [f64; 2]) {
        self.x[k] = v[0];
        self.y[k] = v[1];
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.iter().map(|v| a * v).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            x: self.x.iter().zip(&other.x).map(|(u, v)| a * u + b * v).collect(),
            y: self.y.iter().zip(&other.y).map(|(u, v)| a * u + b * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Node-quadrature L2 norm.
    pub fn l2_norm(&self, grid: &DiskGrid) -> f64 {
        let sq: Vec<f64> = self.x.iter().zip(&self.y).map(|(a, b)| a * a + b * b).collect();
        grid.integrate(Layout::Node, &sq).sqrt()
    }

    /// Discrete H1 norm from segment values and gradients.
    pub fn h1_norm(&self, grid: &DiskGrid) -> f64 {
        let gx = grid.segment_gradient(&self.x);
        let gy = grid.segment_gradient(&self.y);
        let sq: Vec<f64> = (0..grid.len())
            .map(|k| {
                gx.val[k].powi(2)
                    + gy.val[k].powi(2)
                    + gx.dx[k].powi(2)
                    + gx.dy[k].powi(2)
                    + gy.dx[k].powi(2)
                    + gy.dy[k].powi(2)
            })
            .collect();
        grid.integrate(Layout::Segment, &sq).sqrt()
    }

    /// Discrete H2 norm: H1 norm plus nodal second derivatives.
    pub fn h2_norm(&self, grid: &DiskGrid) -> f64 {
        let mut sq = self.h1_norm(grid).powi(2);
        for comp in [&self.x, &self.y] {
            let (dx, dy) = grid.node_gradient(comp);
            for d in [&dx, &dy] {
                let (dxx, dxy) = grid.node_gradient(d);
                let s: Vec<f64> = dxx.iter().zip(&dxy).map(|(a, b)| a * a + b * b).collect();
                sq += grid.integrate(Layout::Node, &s);
            }
        }
        sq.sqrt()
    }

    /// Samples on the trace ring.
    pub fn boundary_trace(&self, grid: &DiskGrid) -> Vec<[f64; 2]> {
        let n = grid.n_theta();
        let off = grid.boundary_ring() * n;
        (0..n).map(|j| [self.x[off + j], self.y[off + j]]).collect()
    }
}

/// 2x2 tensor samples at nodes, `c[a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub c: [[Vec<f64>; 2]; 2],
}

impl TensorField {
    pub fn get(&self, k: usize) -> [[f64; 2]; 2] {
        [[self.c[0][0][k], self.c[0][1][k]], [self.c[1][0][k], self.c[1][1][k]]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_central_differences() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert!((w[0] + 0.5).abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_pi() {
        for (nr, nt) in [(4, 8), (16, 64), (33, 128)] {
            let g = DiskGrid::new(nr, nt).unwrap();
            let nodes: f64 = (0..g.n_rings()).map(|i| g.node_weight(i) * nt as f64).sum();
            let segs: f64 = g.segments().iter().map(|s| s.weight * nt as f64).sum();
            assert!((nodes - PI).abs() < 1e-12);
            assert!((segs - PI).abs() < 1e-12);
            assert!(g.radii().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(DiskGrid::new(3, 16).is_err());
        assert!(DiskGrid::new(8, 15).is_err());
    }

    #[test]
    fn gradients_of_polynomials() {
        let g = DiskGrid::new(12, 32).unwrap();
        let u = ScalarField::from_fn(&g, Layout::Node, |x, y| x * x * y - 2.0 * y * y + x);
        let (dx, dy) = g.node_gradient(&u.values);
        for i in 0..g.n_rings() {
            for j in 0..32 {
                let [x, y] = g.node_position(i, j);
                let k = g.idx(i, j);
                let tol = if i == g.n_r() { 1e-2 } else { 1e-11 };
                assert!((dx[k] - (2.0 * x * y + 1.0)).abs() < tol, "dx ring {i}");
                assert!((dy[k] - (x * x - 4.0 * y)).abs() < tol, "dy ring {i}");
            }
        }
        // Segment gradients are exact for linear functions.
        let lin = ScalarField::from_fn(&g, Layout::Node, |x, y| 3.0 * x - y + 0.5);
        let sg = g.segment_gradient(&lin.values);
        for s in 0..g.n_rings() {
            for j in 0..32 {
                let [x, y] = g.segment_position(s, j);
                let k = g.idx(s, j);
                assert!((sg.val[k] - (3.0 * x - y + 0.5)).abs() < 1e-13);
                assert!((sg.dx[k] - 3.0).abs() < 1e-12 && (sg.dy[k] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn segment_adjoint_matches_transpose() {
        let g = DiskGrid::new(6, 16).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let a: Vec<f64> = (0..g.len()).map(|k| ((k * 31) % 13) as f64 / 13.0).collect();
        let b: Vec<f64> = (0..g.len()).map(|k| ((k * 17) % 11) as f64 / 11.0 - 0.3).collect();
        let c: Vec<f64> = (0..g.len()).map(|k| ((k * 5) % 7) as f64 / 7.0 - 0.6).collect();
        let sg = g.segment_gradient(&u);
        let lhs: f64 = (0..g.len()).map(|k| a[k] * sg.val[k] + b[k] * sg.dx[k] + c[k] * sg.dy[k]).sum();
        let mut adj = vec![0.0; g.len()];
        g.segment_gradient_adjoint(&a, &b, &c, &mut adj);
        let rhs: f64 = adj.iter().zip(&u).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
    }

    #[test]
    fn discrete_divergence_theorem_is_exact() {
        let g = DiskGrid::new(8, 32).unwrap();
        let w = VectorField::from_fn(&g, |x, y| [(x * y).sin() + x * x, (2.0 * y).cos() * x]);
        let div = g.segment_divergence(&w);
        let lhs = g.integrate(Layout::Segment, &div);
        let rhs: f64 = w
            .boundary_trace(&g)
            .iter()
            .enumerate()
            .map(|(j, v)| g.dtheta() * (v[0] * g.cos()[j] + v[1] * g.sin()[j]))
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn polar_round_trip() {
        let g = DiskGrid::new(4, 8).unwrap();
        let w = VectorField::from_fn(&g, |x, y| [x - y, x * y]);
        let (r, t) = g.to_polar(&w.x, &w.y);
        let (x, y) = g.from_polar(&r, &t);
        for k in 0..g.len() {
            assert!((x[k] - w.x[k]).abs() < 1e-14 && (y[k] - w.y[k]).abs() < 1e-14);
        }
        let back = g.ring_inverse(g.ring_transform(&w.x));
        for k in 0..g.len() {
            assert!((back[k] - w.x[k]).abs() < 1e-14);
        }
    }
}

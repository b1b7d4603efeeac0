//! Transformed differential operators on the reference disk.
//!
//! With `v = J^{-1} grad(psi) w` the viscous flux is
//! `S^s_k = psi^i_{,s} A^k_l A^j_l v^i_{,j} + A^k_l v^l_{,s}`,
//! so `L(w) = div S`, the traction is `(S - q Id) N` and
//! `B(w, phi) = int S : grad(phi)`.

use crate::ale_map::{AleMap, Mat2, PointGeometry};
use crate::error::{Error, Result};
use crate::geometry::BoundaryVector;
use crate::grid::{DiskGrid, Layout, ScalarField, TensorField, VectorField};

/// `(v^i_{,j})` from `w`, its gradient `gw[r][j] = w^r_{,j}`, and the map.
pub fn ale_velocity_gradient(p: &PointGeometry, w: [f64; 2], gw: &Mat2) -> Mat2 {
    let m = p.jinv_f_gradient();
    let ij = 1.0 / p.jac;
    let mut gv = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut v = 0.0;
            for r in 0..2 {
                v += m[i][r][j] * w[r] + ij * p.f[i][r] * gw[r][j];
            }
            gv[i][j] = v;
        }
    }
    gv
}

/// Flux `S[s][k]` given the ALE velocity gradient.
pub fn flux_from_gradient(p: &PointGeometry, gv: &Mat2) -> Mat2 {
    let a = &p.a;
    // aat[j][k] = A^j_l A^k_l
    let mut aat = [[0.0; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            aat[j][k] = a[j][0] * a[k][0] + a[j][1] * a[k][1];
        }
    }
    let mut s = [[0.0; 2]; 2];
    for ss in 0..2 {
        for k in 0..2 {
            let mut v = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    v += p.f[i][ss] * gv[i][j] * aat[j][k];
                }
            }
            for l in 0..2 {
                v += a[k][l] * gv[l][ss];
            }
            s[ss][k] = v;
        }
    }
    s
}

pub fn flux(p: &PointGeometry, w: [f64; 2], gw: &Mat2) -> Mat2 {
    flux_from_gradient(p, &ale_velocity_gradient(p, w, gw))
}

/// Linear flux law `S = C [w^0_{,0}, w^0_{,1}, w^1_{,0}, w^1_{,1}, w^0, w^1]`,
/// rows ordered `S[0][0], S[0][1], S[1][0], S[1][1]`.
pub type FluxCoefficients = [[f64; 6]; 4];

pub fn flux_coefficients(p: &PointGeometry) -> FluxCoefficients {
    let mut c = [[0.0; 6]; 4];
    for col in 0..6 {
        let mut gw = [[0.0; 2]; 2];
        let mut w = [0.0; 2];
        if col < 4 {
            gw[col / 2][col % 2] = 1.0;
        } else {
            w[col - 4] = 1.0;
        }
        let s = flux(p, w, &gw);
        for row in 0..4 {
            c[row][col] = s[row / 2][row % 2];
        }
    }
    c
}

fn nodal_gradients(grid: &DiskGrid, w: &VectorField) -> [Vec<f64>; 4] {
    let (xx, xy) = grid.node_gradient(&w.x);
    let (yx, yy) = grid.node_gradient(&w.y);
    [xx, xy, yx, yy]
}

fn nodal_flux(map: &AleMap, w: &VectorField) -> Vec<Mat2> {
    let g = nodal_gradients(map.grid(), w);
    map.nodes
        .iter()
        .enumerate()
        .map(|(k, p)| flux(p, w.get(k), &[[g[0][k], g[1][k]], [g[2][k], g[3][k]]]))
        .collect()
}

/// Cartesian divergence at nodes.
pub fn divergence(grid: &DiskGrid, w: &VectorField) -> ScalarField {
    let (xx, _) = grid.node_gradient(&w.x);
    let (_, yy) = grid.node_gradient(&w.y);
    ScalarField { layout: Layout::Node, values: xx.iter().zip(&yy).map(|(a, b)| a + b).collect() }
}

/// `Def v = grad v + grad v^T` at nodes.
pub fn def_tensor(grid: &DiskGrid, v: &VectorField) -> TensorField {
    let [xx, xy, yx, yy] = nodal_gradients(grid, v);
    let off: Vec<f64> = xy.iter().zip(&yx).map(|(a, b)| a + b).collect();
    TensorField {
        c: [
            [xx.iter().map(|v| 2.0 * v).collect(), off.clone()],
            [off, yy.iter().map(|v| 2.0 * v).collect()],
        ],
    }
}

/// Strong form `[L(w)]^s = S^s_{k,k}` at nodes.
pub fn apply_l(map: &AleMap, w: &VectorField) -> VectorField {
    let grid = map.grid();
    let s = nodal_flux(map, w);
    let mut out = VectorField::zeros(grid);
    for comp in 0..2 {
        let s0: Vec<f64> = s.iter().map(|m| m[comp][0]).collect();
        let s1: Vec<f64> = s.iter().map(|m| m[comp][1]).collect();
        let (d0, _) = grid.node_gradient(&s0);
        let (_, d1) = grid.node_gradient(&s1);
        let target = if comp == 0 { &mut out.x } else { &mut out.y };
        for k in 0..target.len() {
            target[k] = d0[k] + d1[k];
        }
    }
    out
}

/// Pressure value on the trace ring.
fn boundary_pressure(grid: &DiskGrid, q: &ScalarField) -> Vec<f64> {
    let n = grid.n_theta();
    match q.layout {
        Layout::Node => q.values[grid.boundary_ring() * n..].to_vec(),
        Layout::Segment => {
            let (s1, s2) = (grid.n_r(), grid.n_r() - 1);
            let (r1, r2) = (grid.segments()[s1].rho, grid.segments()[s2].rho);
            let (w1, w2) = ((1.0 - r2) / (r1 - r2), (r1 - 1.0) / (r1 - r2));
            (0..n).map(|j| w1 * q.values[s1 * n + j] + w2 * q.values[s2 * n + j]).collect()
        }
    }
}

/// `[l(w, q)]^s = (S^s_k - q delta_sk) N_k` on the trace ring.
pub fn traction(map: &AleMap, w: &VectorField, q: &ScalarField) -> Result<BoundaryVector> {
    let grid = map.grid();
    grid.check_len("velocity", w.len())?;
    grid.check_len("pressure", q.values.len())?;
    let n = grid.n_theta();
    let off = grid.boundary_ring() * n;
    let s = nodal_flux(map, w);
    let qb = boundary_pressure(grid, q);
    Ok(BoundaryVector::new(
        (0..n)
            .map(|j| {
                let m = &s[off + j];
                let (c, sn) = (grid.cos()[j], grid.sin()[j]);
                [
                    (m[0][0] - qb[j]) * c + m[0][1] * sn,
                    m[1][0] * c + (m[1][1] - qb[j]) * sn,
                ]
            })
            .collect(),
    ))
}

/// Backward-differenced map rates used by the forcing.
#[derive(Debug, Clone)]
pub struct MapRates {
    pub psi_t: VectorField,
    /// `(J^{-1} psi^i_{,r})_t` at nodes.
    pub jinv_f_t: Vec<Mat2>,
}

/// Forcing `F` at nodes: transport, moving-frame and commutator groups.
pub fn forcing_f(map: &AleMap, rates: Option<&MapRates>, w: &VectorField) -> Result<VectorField> {
    let grid = map.grid();
    grid.check_len("velocity", w.len())?;
    if let Some(r) = rates {
        grid.check_len("psi_t", r.psi_t.len())?;
        if r.jinv_f_t.len() != grid.len() {
            return Err(Error::GridMismatch("map rate has the wrong sample count".into()));
        }
    }
    let g = nodal_gradients(grid, w);
    let mut out = VectorField::zeros(grid);
    for (k, p) in map.nodes.iter().enumerate() {
        let wk = w.get(k);
        let gw = [[g[0][k], g[1][k]], [g[2][k], g[3][k]]];
        let gv = ale_velocity_gradient(p, wk, &gw);
        let ij = 1.0 / p.jac;
        let v = [
            ij * (p.f[0][0] * wk[0] + p.f[0][1] * wk[1]),
            ij * (p.f[1][0] * wk[0] + p.f[1][1] * wk[1]),
        ];
        let rel = match rates {
            Some(r) => [v[0] - r.psi_t.x[k], v[1] - r.psi_t.y[k]],
            None => v,
        };
        // gva = grad(v) A
        let mut gva = [[0.0; 2]; 2];
        for i in 0..2 {
            for l in 0..2 {
                gva[i][l] = gv[i][0] * p.a[0][l] + gv[i][1] * p.a[1][l];
            }
        }
        let q = p.piola_divergence();
        let mut fs = [0.0; 2];
        for (s, fsv) in fs.iter_mut().enumerate() {
            let mut t = 0.0;
            for i in 0..2 {
                let conv = gva[i][0] * rel[0] + gva[i][1] * rel[1];
                t -= p.f[i][s] * conv;
            }
            if let Some(r) = rates {
                let m = &r.jinv_f_t[k];
                for i in 0..2 {
                    t -= p.f[i][s] * (m[i][0] * wk[0] + m[i][1] * wk[1]);
                }
            }
            for i in 0..2 {
                for l in 0..2 {
                    t += q[i][s][l] * (gva[i][l] + gva[l][i]);
                }
            }
            *fsv = t;
        }
        out.set(k, fs);
    }
    Ok(out)
}

/// `F + (delta - J^{-1} grad(psi)^T grad(psi)) w_t`.
pub fn forcing_f_bar(
    map: &AleMap,
    rates: Option<&MapRates>,
    w: &VectorField,
    w_t: &VectorField,
) -> Result<VectorField> {
    let mut f = forcing_f(map, rates, w)?;
    map.grid().check_len("w_t", w_t.len())?;
    for (k, p) in map.nodes.iter().enumerate() {
        let wt = w_t.get(k);
        let mut corr = [0.0; 2];
        for (s, c) in corr.iter_mut().enumerate() {
            let mut v = wt[s];
            for r in 0..2 {
                let ftf = p.f[0][s] * p.f[0][r] + p.f[1][s] * p.f[1][r];
                v -= ftf / p.jac * wt[r];
            }
            *c = v;
        }
        f.x[k] += corr[0];
        f.y[k] += corr[1];
    }
    Ok(f)
}

/// `B(w, phi) = sum_q W_q S(w)_q : grad(phi)_q` over segment points.
pub fn bilinear_b(map: &AleMap, w: &VectorField, phi: &VectorField) -> Result<f64> {
    let grid = map.grid();
    grid.check_len("w", w.len())?;
    grid.check_len("phi", phi.len())?;
    let (wx, wy) = (grid.segment_gradient(&w.x), grid.segment_gradient(&w.y));
    let (px, py) = (grid.segment_gradient(&phi.x), grid.segment_gradient(&phi.y));
    let n = grid.n_theta();
    let mut total = 0.0;
    for (s, seg) in grid.segments().iter().enumerate() {
        for j in 0..n {
            let k = s * n + j;
            let p = &map.segments[k];
            let gw = [[wx.dx[k], wx.dy[k]], [wy.dx[k], wy.dy[k]]];
            let sf = flux(p, [wx.val[k], wy.val[k]], &gw);
            let gp = [[px.dx[k], px.dy[k]], [py.dx[k], py.dy[k]]];
            let mut v = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    v += sf[a][b] * gp[a][b];
                }
            }
            total += seg.weight * v;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ale_map::harmonic_extend;
    use crate::geometry::{HeightField, ReferenceCurve};

    fn grid(nr: usize, nt: usize) -> DiskGrid {
        DiskGrid::new(nr, nt).unwrap()
    }

    fn interior_max(grid: &DiskGrid, f: &[f64]) -> f64 {
        f[..grid.n_r() * grid.n_theta()].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn divergence_examples() {
        let g = grid(16, 32);
        let c = VectorField::from_fn(&g, |_, _| [2.0, -1.0]);
        assert!(divergence(&g, &c).values.iter().all(|v| v.abs() < 1e-10));
        let r = VectorField::from_fn(&g, |x, y| [x, y]);
        assert!(divergence(&g, &r).values.iter().all(|v| (v - 2.0).abs() < 1e-8));
    }

    #[test]
    fn divergence_of_curl_refines() {
        // phi = sin(x) cos(2y) + x^3 y
        let curl = |x: f64, y: f64| {
            [-2.0 * x.sin() * (2.0 * y).sin() + x.powi(3), -(x.cos() * (2.0 * y).cos() + 3.0 * x * x * y)]
        };
        let mut errs = Vec::new();
        for nr in [16, 32] {
            let g = grid(nr, 64);
            let w = VectorField::from_fn(&g, curl);
            let d = divergence(&g, &w);
            errs.push(g.l2_norm(Layout::Node, &d.values));
        }
        assert!(errs[0] / errs[1] > 4.0, "{errs:?}");
    }

    #[test]
    fn def_tensor_examples() {
        let g = grid(8, 16);
        let rot = VectorField::from_fn(&g, |x, y| [-y, x]);
        let d = def_tensor(&g, &rot);
        for row in &d.c {
            for comp in row {
                assert!(comp.iter().all(|v| v.abs() < 1e-12));
            }
        }
        let strain = VectorField::from_fn(&g, |x, y| [x, -y]);
        let d = def_tensor(&g, &strain);
        for k in 0..g.len() {
            let t = d.get(k);
            assert!((t[0][0] - 2.0).abs() < 1e-12 && (t[1][1] + 2.0).abs() < 1e-12);
            assert!(t[0][1].abs() < 1e-12 && t[0][1] == t[1][0]);
        }
    }

    #[test]
    fn identity_map_reductions() {
        let g = grid(16, 32);
        let id = AleMap::identity(&g);
        let rot = VectorField::from_fn(&g, |x, y| [-y, x]);
        assert!(apply_l(&id, &rot).max_abs() < 1e-9);
        // Laplacian (2, 0) plus grad div (2, 0).
        let w = VectorField::from_fn(&g, |x, _| [x * x, 0.0]);
        let l = apply_l(&id, &w);
        assert!(interior_max(&g, &l.x.iter().map(|v| v - 4.0).collect::<Vec<_>>()) < 1e-6);
        assert!(interior_max(&g, &l.y) < 1e-6);
        // Traction at the identity.
        let q = ScalarField::from_fn(&g, Layout::Node, |_, _| 0.7);
        let t = traction(&id, &VectorField::zeros(&g), &q).unwrap();
        for (j, v) in t.values.iter().enumerate() {
            assert!((v[0] + 0.7 * g.cos()[j]).abs() < 1e-14 && (v[1] + 0.7 * g.sin()[j]).abs() < 1e-14);
        }
        let strain = VectorField::from_fn(&g, |x, y| [x, -y]);
        let t = traction(&id, &strain, &ScalarField::zeros(&g, Layout::Node)).unwrap();
        for (j, v) in t.values.iter().enumerate() {
            assert!((v[0] - 2.0 * g.cos()[j]).abs() < 1e-10 && (v[1] + 2.0 * g.sin()[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn static_circle_traction_balance() {
        let g = grid(8, 32);
        let curve = ReferenceCurve::unit_circle(32);
        let id = harmonic_extend(&HeightField::zeros(32), &curve, &g).unwrap();
        let sigma = 1.3;
        let lz = crate::geometry::regularized_curvature(&curve, &HeightField::zeros(32), &HeightField::zeros(32)).unwrap();
        // Laplace pressure q = sigma b0 balances sigma L(0) N.
        let q = ScalarField::from_fn(&g, Layout::Segment, |_, _| sigma);
        let t = traction(&id, &VectorField::zeros(&g), &q).unwrap();
        for j in 0..32 {
            let n = curve.normal()[j];
            for i in 0..2 {
                assert!((t.values[j][i] - sigma * lz.values[j] * n[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn scaling_map_chain_rule() {
        let g = grid(24, 32);
        let curve = ReferenceCurve::unit_circle(32);
        let c = 0.1;
        let m = harmonic_extend(&HeightField::constant(32, c), &curve, &g).unwrap();
        let w = VectorField::from_fn(&g, |x, y| [x * x, x * y]);
        // psi = (1 + c) y: S = (Def w)/(1 + c)^2 componentwise, L = div(Def w)/(1+c)^2.
        let l = apply_l(&m, &w);
        let s = (1.0 + c) * (1.0 + c);
        // div Def (x^2, xy) = Lap w + grad div w = (2, 0) + grad(3x) = (5, 0)
        let ex: Vec<f64> = l.x.iter().map(|v| v - 5.0 / s).collect();
        assert!(interior_max(&g, &ex) < 1e-6);
        assert!(interior_max(&g, &l.y) < 1e-6);
        // Forcing on the frozen scaling map: -(w . grad) w / (1 + c)^2.
        let f = forcing_f(&m, None, &w).unwrap();
        for i in 0..g.n_r() {
            for j in 0..32 {
                let k = g.idx(i, j);
                let [x, y] = g.node_position(i, j);
                let adv = [x * x * 2.0 * x, x * x * y + x * y * x];
                assert!((f.x[k] + adv[0] / s).abs() < 1e-5);
                assert!((f.y[k] + adv[1] / s).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn forcing_examples() {
        let g = grid(16, 32);
        let id = AleMap::identity(&g);
        let rot = VectorField::from_fn(&g, |x, y| [-y, x]);
        let f = forcing_f(&id, None, &rot).unwrap();
        let expect = VectorField::from_fn(&g, |x, y| [x, y]);
        assert!(f.combine(1.0, &expect, -1.0).max_abs() < 1e-6);
        let curve = ReferenceCurve::unit_circle(32);
        let m = harmonic_extend(&HeightField::from_fn(&curve, |s| 0.1 * (2.0 * s).cos()), &curve, &g).unwrap();
        assert_eq!(forcing_f(&m, None, &VectorField::zeros(&g)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bilinear_form_examples() {
        let g = grid(8, 32);
        let id = AleMap::identity(&g);
        let rot = VectorField::from_fn(&g, |x, y| [-y, x]);
        assert!(bilinear_b(&id, &rot, &rot).unwrap().abs() < 1e-8);
        let w = VectorField::from_fn(&g, |x, y| [x * y + (2.0 * x).sin(), x - y * y]);
        assert!(bilinear_b(&id, &w, &w).unwrap() > 0.0);
        // Coefficient form agrees with the direct flux.
        let curve = ReferenceCurve::unit_circle(32);
        let m = harmonic_extend(&HeightField::from_fn(&curve, |s| 0.1 * (3.0 * s).sin()), &curve, &g).unwrap();
        let p = &m.segments[40];
        let c = flux_coefficients(p);
        let (wv, gw) = ([0.3, -0.2], [[1.0, 0.5], [-0.7, 2.0]]);
        let s = flux(p, wv, &gw);
        let input = [gw[0][0], gw[0][1], gw[1][0], gw[1][1], wv[0], wv[1]];
        for row in 0..4 {
            let v: f64 = (0..6).map(|col| c[row][col] * input[col]).sum();
            assert!((v - s[row / 2][row % 2]).abs() < 1e-13);
        }
    }

    #[test]
    fn greens_identity_converges() {
        let curve_w = |x: f64, y: f64| [x * x * y + (x + y).sin(), (x * y).cos() - y * y * y];
        let phi_f = |x: f64, y: f64| [1.0 + x * y - y * y, (2.0 * x).sin() + x * y * y];
        let mut defects = Vec::new();
        for nr in [16, 32] {
            let g = grid(nr, 64);
            let curve = ReferenceCurve::unit_circle(64);
            let h = HeightField::from_fn(&curve, |s| 0.05 * (2.0 * s).cos() + 0.02 * (3.0 * s).sin());
            let m = harmonic_extend(&h, &curve, &g).unwrap();
            let w = VectorField::from_fn(&g, curve_w);
            let phi = VectorField::from_fn(&g, phi_f);
            let b = bilinear_b(&m, &w, &phi).unwrap();
            let l = apply_l(&m, &w);
            let lphi: Vec<f64> = (0..g.len()).map(|k| l.x[k] * phi.x[k] + l.y[k] * phi.y[k]).collect();
            let vol = g.integrate(Layout::Node, &lphi);
            let t = traction(&m, &w, &ScalarField::zeros(&g, Layout::Node)).unwrap();
            let pb = phi.boundary_trace(&g);
            let bnd: f64 = t.values.iter().zip(&pb).map(|(a, b)| g.dtheta() * (a[0] * b[0] + a[1] * b[1])).sum();
            defects.push((b + vol - bnd).abs() / b.abs());
        }
        assert!(defects[1] < defects[0] / 2.0 && defects[1] < 1e-2, "{defects:?}");
    }
}

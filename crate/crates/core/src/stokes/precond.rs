//! Block-circulant inverse of a rotation-invariant system.
//!
//! A system with angle-independent coefficients commutes with grid rotations
//! once velocities are written in polar components, so each angular Fourier
//! mode decouples into a dense `3 n_rings` block.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::operator::LinearSystem;
use crate::grid::DiskGrid;

#[derive(Debug, Clone)]
pub struct ModalInverse {
    grid: DiskGrid,
    /// Pseudo-inverse of the mode block for `m = 0..=n_theta/2`.
    blocks: Vec<DMatrix<Complex64>>,
}

impl ModalInverse {
    /// `sys` must have coefficients that do not depend on the angle.
    pub fn new(sys: &LinearSystem) -> Self {
        let grid = sys.grid().clone();
        let n = grid.n_theta();
        let nr = grid.n_rings();
        let len = grid.len();
        let dim = 3 * nr;
        let half = n / 2;
        let mut blocks = vec![DMatrix::<Complex64>::zeros(dim, dim); half + 1];
        let mut x = vec![0.0; 3 * len];
        let mut out = vec![0.0; 3 * len];
        for comp in 0..3 {
            for ring in 0..nr {
                x.iter_mut().for_each(|v| *v = 0.0);
                // At angle zero the polar frame is the Cartesian one.
                x[comp * len + ring * n] = 1.0;
                sys.apply(&x, &mut out);
                let (or, ot) = grid.to_polar(&out[..len], &out[len..2 * len]);
                let col = comp * nr + ring;
                for (oc, part) in [&or[..], &ot[..], &out[2 * len..]].into_iter().enumerate() {
                    let hat = grid.ring_transform(part);
                    for i in 0..nr {
                        for (m, block) in blocks.iter_mut().enumerate() {
                            block[(oc * nr + i, col)] = hat[i * n + m];
                        }
                    }
                }
            }
        }
        let blocks = blocks
            .into_iter()
            .map(|b| {
                let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
                b.pseudo_inverse(1e-14 * scale).expect("non-negative tolerance")
            })
            .collect();
        Self { grid, blocks }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n_theta();
        let nr = g.n_rings();
        let len = g.len();
        let (vr, vt) = g.to_polar(&v[..len], &v[len..2 * len]);
        let hats = [g.ring_transform(&vr), g.ring_transform(&vt), g.ring_transform(&v[2 * len..])];
        let mut sol = [vec![Complex64::default(); len], vec![Complex64::default(); len], vec![Complex64::default(); len]];
        let mut rhs = nalgebra::DVector::<Complex64>::zeros(3 * nr);
        for m in 0..n {
            let (block, flip) = if m <= n / 2 { (&self.blocks[m], false) } else { (&self.blocks[n - m], true) };
            for c in 0..3 {
                for i in 0..nr {
                    let z = hats[c][i * n + m];
                    rhs[c * nr + i] = if flip { z.conj() } else { z };
                }
            }
            let y = block * &rhs;
            for c in 0..3 {
                for i in 0..nr {
                    let z = y[c * nr + i];
                    sol[c][i * n + m] = if flip { z.conj() } else { z };
                }
            }
        }
        let [sr, st, sq] = sol;
        let (r, t, q) = (g.ring_inverse(sr), g.ring_inverse(st), g.ring_inverse(sq));
        let (x, y) = g.from_polar(&r, &t);
        let mut out = x;
        out.extend(y);
        out.extend(q);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stokes::operator::BoundaryKind;

    #[test]
    fn inverts_the_reference_operator() {
        let g = DiskGrid::new(6, 16).unwrap();
        for bc in [BoundaryKind::Traction { kappa: 1e-3 }, BoundaryKind::Dirichlet] {
            let sys = LinearSystem::reference(&g, 1.0, 50.0, 1e-4, bc);
            let pre = ModalInverse::new(&sys);
            let n = sys.n_unknowns();
            let x: Vec<f64> = (0..n).map(|k| ((k * 37 % 101) as f64 / 101.0) - 0.5).collect();
            let mut ax = vec![0.0; n];
            sys.apply(&x, &mut ax);
            let back = pre.apply(&ax);
            let err = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "{bc:?}: {err}");
        }
    }
}

//! Quick invariant checks on built-in cases.

use std::f64::consts::PI;

use crate::ale_map::harmonic_extend;
use crate::geometry::{curvature, HeightField, ReferenceCurve};
use crate::grid::{DiskGrid, Layout, ScalarField, VectorField};
use crate::smoothing::commutator;
use crate::stokes::PressureRecovery;
use crate::timestepper::{SolverConfig, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, passed: value <= limit, detail: format!("{value:.3e} <= {limit:e}") }
}

pub fn run() -> Vec<Check> {
    let mut out = Vec::new();
    let curve = ReferenceCurve::unit_circle(64);
    let grid = DiskGrid::new(8, 64).expect("valid grid");

    let c = 0.1;
    let k = curvature(&curve, &HeightField::constant(64, c)).expect("admissible");
    let err = k.values.iter().map(|v| (v + 1.0 / (1.0 + c)).abs()).fold(0.0, f64::max);
    out.push(check("circle curvature", err, 1e-10));

    let h = HeightField::from_fn(&curve, |s| 0.1 * (3.0 * s).cos());
    let err = match harmonic_extend(&h, &curve, &grid) {
        Ok(m) => {
            let n = grid.n_theta();
            (0..grid.len())
                .map(|idx| {
                    let r = grid.radius(idx / n);
                    let th = grid.theta(idx % n);
                    // cos(3t) cos(t) = (cos(4t) + cos(2t)) / 2
                    let ex = r * th.cos() + 0.05 * (r.powi(4) * (4.0 * th).cos() + r * r * (2.0 * th).cos());
                    (m.psi.x[idx] - ex).abs()
                })
                .fold(0.0, f64::max)
        }
        Err(_) => f64::INFINITY,
    };
    out.push(check("harmonic extension of a single mode", err, 1e-12));

    let f: Vec<f64> = (0..64).map(|j| (j as f64 * 2.0 * PI / 64.0).sin()).collect();
    let g: Vec<f64> = (0..64).map(|j| (3.0 * j as f64 * 2.0 * PI / 64.0).cos()).collect();
    let eps = 0.2;
    let ratio = commutator(&curve, &f, &g, eps)
        .map(|cm| {
            let n2 = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() * 2.0 * PI / 64.0).sqrt();
            n2(&cm) / (eps * n2(&g))
        })
        .unwrap_or(f64::INFINITY);
    out.push(check("commutator bound ratio", ratio, 1.05));

    let rec = PressureRecovery::new(&grid, false);
    let q0 = ScalarField::from_fn(&grid, Layout::Segment, |x, y| 1.0 + x * y);
    let (tx, ty) = PressureRecovery::div_adjoint(&grid, &q0.values);
    let q = rec.solve(&tx, &ty);
    let err = q.values.iter().zip(&q0.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(check("pressure plant and recover", err, 1e-8));

    let cfg = SolverConfig { n_r: 8, n_theta: 32, epsilon: SolverConfig::default_epsilon(32), ..Default::default() };
    let eq = Stepper::new(&cfg).and_then(|st| {
        let s0 = st.initial_state(&HeightField::zeros(32), &VectorField::zeros(st.grid()))?;
        let (s1, _) = st.step(&s0)?;
        Ok(s1.w.max_abs())
    });
    out.push(check("static circle velocity", eq.unwrap_or(f64::INFINITY), 1e-6));
    out
}

//! Periodic mollification along the reference curve and the damped height
//! equation `h'' + eps^2 h_t'' = f`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{HeightField, ReferenceCurve};

/// Discrete mollifier `eta_eps(s) = eta(s/eps)/eps` sampled on the curve grid.
///
/// `eta` is the bump `exp(-1/(1 - (s/a)^2))` with `a = length/4`; the
/// sampled weights are renormalized to unit sum so constants are preserved
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    epsilon: f64,
    /// `(offset, weight)` pairs; symmetric in the offset.
    taps: Vec<(isize, f64)>,
}

impl MollifierKernel {
    pub fn new(curve: &ReferenceCurve, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::KernelSupport { epsilon });
        }
        let half_width = epsilon * curve.length() / 4.0;
        let ds = curve.spacing();
        let reach = (half_width / ds).floor() as isize;
        let mut taps = Vec::with_capacity(2 * reach as usize + 1);
        for m in -reach..=reach {
            let x = m as f64 * ds / half_width;
            if x.abs() < 1.0 {
                taps.push((m, (-1.0 / (1.0 - x * x)).exp()));
            }
        }
        let total: f64 = taps.iter().map(|t| t.1).sum();
        taps.iter_mut().for_each(|t| t.1 /= total);
        Ok(Self { epsilon, taps })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn taps(&self) -> &[(isize, f64)] {
        &self.taps
    }

    /// Discrete symbol `sum_m w_m cos(k m ds)` for integer mode `k`.
    pub fn symbol(&self, k: i64, n: usize) -> f64 {
        self.taps
            .iter()
            .map(|&(m, w)| w * (2.0 * PI * (k * m as i64) as f64 / n as f64).cos())
            .sum()
    }

    /// Periodic convolution `(eta_eps * f)_j = sum_m w_m f_{j-m}`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len() as isize;
        (0..n)
            .map(|j| {
                self.taps
                    .iter()
                    .map(|&(m, w)| w * f[(j - m).rem_euclid(n) as usize])
                    .sum()
            })
            .collect()
    }
}

pub fn mollify(curve: &ReferenceCurve, f: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    Ok(MollifierKernel::new(curve, epsilon)?.apply(f))
}

/// `h_ee = eta_eps * (eta_eps * h)`.
pub fn double_mollify(curve: &ReferenceCurve, h: &HeightField, epsilon: f64) -> Result<HeightField> {
    let kernel = MollifierKernel::new(curve, epsilon)?;
    Ok(HeightField::new(kernel.apply(&kernel.apply(&h.values))))
}

/// `[eta_eps *, f] g = eta_eps * (f g) - f (eta_eps * g)`.
pub fn commutator(curve: &ReferenceCurve, f: &[f64], g: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let kernel = MollifierKernel::new(curve, epsilon)?;
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let a = kernel.apply(&fg);
    let b = kernel.apply(g);
    Ok(a.iter().zip(&b).zip(f).map(|((x, y), fv)| x - fv * y).collect())
}

/// Advances `h'' + eps^2 h_t'' = f` with `f` frozen over each step.
///
/// Per Fourier mode `k != 0` the equation reads
/// `d/dt h_k = -h_k/eps^2 - f_k/(eps^2 kappa^2)` and is integrated exactly.
/// The mean mode is annihilated by the operator and stays at its initial
/// value. Returns `n_steps + 1` states starting with `h0`.
pub fn damped_height_evolution(
    curve: &ReferenceCurve,
    h0: &HeightField,
    forcing: &[Vec<f64>],
    epsilon: f64,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<HeightField>> {
    if !(epsilon > 0.0) {
        return Err(Error::DegenerateDamping);
    }
    if forcing.len() < n_steps {
        return Err(Error::InvalidArgument(format!(
            "forcing has {} entries for {n_steps} steps",
            forcing.len()
        )));
    }
    let fourier = curve.fourier();
    let n = curve.n_theta();
    let base = 2.0 * PI / curve.length();
    let decay = (-dt / (epsilon * epsilon)).exp();
    let mut coeffs = fourier.coefficients(&h0.values);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(h0.clone());
    for f in forcing.iter().take(n_steps) {
        let fc = fourier.coefficients(f);
        for m in 1..n {
            let kappa = base * fourier.wavenumber(m) as f64;
            let steady: Complex64 = -fc[m] / (kappa * kappa);
            coeffs[m] = coeffs[m] * decay + steady * (1.0 - decay);
        }
        out.push(HeightField::new(fourier.synthesize(&coeffs)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2(f: &[f64]) -> f64 {
        (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt()
    }

    #[test]
    fn kernel_has_unit_mass_and_support() {
        let c = ReferenceCurve::unit_circle(128);
        for eps in [1.0, 0.4, 0.1, 0.01] {
            let k = MollifierKernel::new(&c, eps).unwrap();
            let mass: f64 = k.taps().iter().map(|t| t.1).sum();
            assert!((mass - 1.0).abs() < 1e-12);
            assert!(k.taps().iter().all(|t| t.1 >= 0.0));
            for &(m, _) in k.taps() {
                assert!((m as f64 * c.spacing()).abs() < c.length() / 4.0 * eps);
            }
        }
        assert!(matches!(MollifierKernel::new(&c, 1.5), Err(Error::KernelSupport { .. })));
        assert!(MollifierKernel::new(&c, 0.0).is_err());
    }

    #[test]
    fn constants_are_preserved() {
        let c = ReferenceCurve::unit_circle(64);
        let m = mollify(&c, &[2.5; 64], 0.3).unwrap();
        assert!(m.iter().all(|v| (v - 2.5).abs() < 1e-14));
        let h = double_mollify(&c, &HeightField::constant(64, -0.1), 0.3).unwrap();
        assert!(h.values.iter().all(|v| (v + 0.1).abs() < 1e-14));
    }

    #[test]
    fn double_mollify_is_mollify_twice() {
        let c = ReferenceCurve::unit_circle(64);
        let h = HeightField::from_fn(&c, |s| (3.0 * s).sin() + 0.2 * s.cos());
        let once = mollify(&c, &h.values, 0.2).unwrap();
        let twice = mollify(&c, &once, 0.2).unwrap();
        assert_eq!(double_mollify(&c, &h, 0.2).unwrap().values, twice);
    }

    #[test]
    fn cosine_is_scaled_by_symbol() {
        let c = ReferenceCurve::unit_circle(128);
        let kernel = MollifierKernel::new(&c, 0.2).unwrap();
        let k = 5;
        let f: Vec<f64> = (0..128).map(|j| (k as f64 * c.arclength(j)).cos()).collect();
        let g = kernel.apply(&f);
        // Direct quadrature of the convolution integral with the sampled kernel.
        let sym = kernel.symbol(k, 128);
        assert!(sym.abs() <= 1.0);
        for j in 0..128 {
            let s = c.arclength(j);
            let direct: f64 = kernel
                .taps()
                .iter()
                .map(|&(m, w)| w * (k as f64 * (s - m as f64 * c.spacing())).cos())
                .sum();
            assert!((g[j] - direct).abs() < 1e-13);
            assert!((g[j] - sym * f[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn consistency_sweep_decreases() {
        let c = ReferenceCurve::unit_circle(256);
        let h = HeightField::from_fn(&c, |s| 0.1 * (3.0 * s).cos() + 0.05 * (2.0 * s).sin());
        let mut last = f64::INFINITY;
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let he = double_mollify(&c, &h, eps).unwrap();
            let diff: Vec<f64> = he.values.iter().zip(&h.values).map(|(a, b)| a - b).collect();
            let e = l2(&diff);
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn commutator_of_constant_vanishes() {
        let c = ReferenceCurve::unit_circle(64);
        let g: Vec<f64> = (0..64).map(|j| (c.arclength(j) * 2.0).sin()).collect();
        let r = commutator(&c, &[3.0; 64], &g, 0.2).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn commutator_shrinks_with_epsilon() {
        let c = ReferenceCurve::unit_circle(256);
        let f: Vec<f64> = (0..256).map(|j| (c.arclength(j).sin()).exp()).collect();
        let g: Vec<f64> = (0..256).map(|j| (3.0 * c.arclength(j)).cos()).collect();
        let mut last = f64::INFINITY;
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let e = l2(&commutator(&c, &f, &g, eps).unwrap());
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn damped_evolution_free_decay() {
        let c = ReferenceCurve::unit_circle(32);
        let h0 = HeightField::from_fn(&c, |s| 0.3 + 0.1 * (2.0 * s).cos() - 0.05 * (5.0 * s).sin());
        let (eps, dt, steps) = (0.5, 0.01, 20);
        let zero = vec![vec![0.0; 32]; steps];
        let traj = damped_height_evolution(&c, &h0, &zero, eps, dt, steps).unwrap();
        let t = dt * steps as f64;
        let decay = (-t / (eps * eps)).exp();
        for j in 0..32 {
            let s = c.arclength(j);
            let exact = 0.3 + decay * (0.1 * (2.0 * s).cos() - 0.05 * (5.0 * s).sin());
            assert!((traj[steps].values[j] - exact).abs() < 1e-13);
        }
        let mean = traj[steps].values.iter().sum::<f64>() / 32.0;
        assert!((mean - 0.3).abs() < 1e-14);
    }

    #[test]
    fn damped_evolution_reaches_steady_state() {
        let c = ReferenceCurve::unit_circle(32);
        let (k, amp) = (3.0, 0.02);
        let f: Vec<f64> = (0..32).map(|j| -k * k * amp * (k * c.arclength(j)).cos()).collect();
        let steps = 400;
        let forcing = vec![f; steps];
        let traj = damped_height_evolution(&c, &HeightField::zeros(32), &forcing, 0.2, 0.01, steps).unwrap();
        for j in 0..32 {
            assert!((traj[steps].values[j] - amp * (k * c.arclength(j)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn damped_evolution_matches_rk4() {
        let c = ReferenceCurve::unit_circle(16);
        let h0 = HeightField::from_fn(&c, |s| 0.1 * s.cos() + 0.02 * (3.0 * s).sin());
        let f: Vec<f64> = (0..16).map(|j| (2.0 * c.arclength(j)).cos() - 0.5 * c.arclength(j).sin()).collect();
        let (eps, dt) = (0.3, 1e-3);
        let one = damped_height_evolution(&c, &h0, std::slice::from_ref(&f), eps, dt, 1).unwrap();

        // RK4 on the modal ODE with 100 substeps.
        let fourier = c.fourier();
        let mut hc = fourier.coefficients(&h0.values);
        let fc = fourier.coefficients(&f);
        let sub = 100;
        let tau = dt / sub as f64;
        for m in 1..16 {
            let k = fourier.wavenumber(m) as f64;
            let rhs = |y: Complex64| -y / (eps * eps) - fc[m] / (eps * eps * k * k);
            let mut y = hc[m];
            for _ in 0..sub {
                let k1 = rhs(y);
                let k2 = rhs(y + k1 * (tau / 2.0));
                let k3 = rhs(y + k2 * (tau / 2.0));
                let k4 = rhs(y + k3 * tau);
                y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (tau / 6.0);
            }
            hc[m] = y;
        }
        let oracle = fourier.synthesize(&hc);
        for j in 0..16 {
            assert!((one[1].values[j] - oracle[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        let c = ReferenceCurve::unit_circle(16);
        let r = damped_height_evolution(&c, &HeightField::zeros(16), &[vec![0.0; 16]], 0.0, 0.1, 1);
        assert_eq!(r, Err(Error::DegenerateDamping));
    }
}

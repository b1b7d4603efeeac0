//! Periodic Fourier helpers shared by the boundary and the disk grid.
//!
//! Coefficients use the normalization `c_k = (1/n) * sum_j f_j exp(-i k theta_j)`,
//! so `c_0` is the sample mean. The Nyquist mode is dropped by every odd
//! derivative and, for consistency with `D1 * D1`, by the even ones too.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// FFT plans for one periodic sample count.
#[derive(Clone)]
pub struct Fourier {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed integer wavenumber stored at FFT index `m`.
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m <= n / 2 {
            m
        } else {
            m - n
        }
    }

    fn is_nyquist(&self, m: usize) -> bool {
        self.n.is_multiple_of(2) && m == self.n / 2
    }

    /// Normalized complex Fourier coefficients of real samples.
    pub fn coefficients(&self, f: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(f.len(), self.n);
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// In-place unnormalized forward transform.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// In-place unnormalized inverse transform (`sum_m c_m exp(+i m theta_j)`).
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Real samples from normalized coefficients.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// `order`-th derivative of periodic samples with period `length`.
    pub fn derivative(&self, f: &[f64], order: u32, length: f64) -> Vec<f64> {
        if order == 0 {
            return f.to_vec();
        }
        let mut c = self.coefficients(f);
        let base = 2.0 * PI / length;
        for (m, cm) in c.iter_mut().enumerate() {
            if self.is_nyquist(m) {
                *cm = Complex64::new(0.0, 0.0);
                continue;
            }
            let ik = Complex64::new(0.0, base * self.wavenumber(m) as f64);
            *cm *= ik.powu(order);
        }
        self.synthesize(&c)
    }

    /// First derivative on a `2*pi` period written into `out`.
    pub fn derivative_into(&self, f: &[f64], out: &mut [f64], scratch: &mut Vec<Complex64>) {
        scratch.clear();
        scratch.extend(f.iter().map(|&v| Complex64::new(v, 0.0)));
        self.forward.process(scratch);
        let scale = 1.0 / self.n as f64;
        for (m, cm) in scratch.iter_mut().enumerate() {
            if self.is_nyquist(m) {
                *cm = Complex64::new(0.0, 0.0);
            } else {
                let k = self.wavenumber(m) as f64;
                *cm = Complex64::new(-cm.im * k * scale, cm.re * k * scale);
            }
        }
        self.inverse.process(scratch);
        for (o, c) in out.iter_mut().zip(scratch.iter()) {
            *o = c.re;
        }
    }

    /// Sobolev `H^s` norm `(sum_k (1 + kappa_k^2)^s |c_k|^2)^(1/2)` with
    /// physical wavenumbers `kappa_k = 2 pi k / length`.
    pub fn sobolev_norm(&self, f: &[f64], s: f64, length: f64) -> f64 {
        let c = self.coefficients(f);
        let base = 2.0 * PI / length;
        c.iter()
            .enumerate()
            .map(|(m, cm)| {
                let kappa = base * self.wavenumber(m) as f64;
                (1.0 + kappa * kappa).powf(s) * cm.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_trig_polynomial() {
        let n = 32;
        let fourier = Fourier::new(n);
        let theta: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let f: Vec<f64> = theta.iter().map(|t| (3.0 * t).sin() + 0.5 * t.cos()).collect();
        let d = fourier.derivative(&f, 1, 2.0 * PI);
        for (t, v) in theta.iter().zip(&d) {
            assert!((v - (3.0 * (3.0 * t).cos() - 0.5 * t.sin())).abs() < 1e-12);
        }
        let mut out = vec![0.0; n];
        let mut scratch = Vec::new();
        fourier.derivative_into(&f, &mut out, &mut scratch);
        for (a, b) in out.iter().zip(&d) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_operator_is_antisymmetric() {
        let n = 16;
        let fourier = Fourier::new(n);
        let mut mat = vec![vec![0.0; n]; n];
        for (col, _) in (0..n).enumerate() {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let d = fourier.derivative(&e, 1, 2.0 * PI);
            for row in 0..n {
                mat[row][col] = d[row];
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((mat[i][j] + mat[j][i]).abs() < 1e-13);
            }
        }
    }
}

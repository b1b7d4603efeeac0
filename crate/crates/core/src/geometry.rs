//! Reference curve and the differential geometry of the height-graph boundary
//! `x = X(s) + h(s) N(s)`.
//!
//! Sign convention: the curvature `H` follows the ALE formula literally, so a
//! counter-clockwise circle of radius `R` has `H = -1/R` (the negative of the
//! usual signed curvature). The surface-tension traction `sigma * H * n` then
//! points inward and the equilibrium pressure of a static drop is `+sigma/R`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::Fourier;

/// `1 + b0 h` must stay above this at every sample.
pub const ADMISSIBILITY_FLOOR: f64 = 1e-6;

/// Fixed smooth closed curve parametrized by arc length on a uniform grid.
#[derive(Debug, Clone)]
pub struct ReferenceCurve {
    length: f64,
    position: Vec<[f64; 2]>,
    tangent: Vec<[f64; 2]>,
    normal: Vec<[f64; 2]>,
    b0: Vec<f64>,
    b0_prime: Vec<f64>,
    fourier: Fourier,
}

impl ReferenceCurve {
    /// Unit circle, `s = theta`, `b0 = 1`.
    pub fn unit_circle(n_theta: usize) -> Self {
        let length = 2.0 * PI;
        let ds = length / n_theta as f64;
        let mut position = Vec::with_capacity(n_theta);
        let mut tangent = Vec::with_capacity(n_theta);
        let mut normal = Vec::with_capacity(n_theta);
        for j in 0..n_theta {
            let (sin, cos) = (j as f64 * ds).sin_cos();
            position.push([cos, sin]);
            tangent.push([-sin, cos]);
            normal.push([cos, sin]);
        }
        Self {
            length,
            position,
            tangent,
            normal,
            b0: vec![1.0; n_theta],
            b0_prime: vec![0.0; n_theta],
            fourier: Fourier::new(n_theta),
        }
    }

    /// Curve from counter-clockwise samples already spaced uniformly in arc
    /// length. Tangent, normal and curvature come from spectral derivatives.
    pub fn from_arclength_samples(position: Vec<[f64; 2]>, length: f64) -> Result<Self> {
        let n = position.len();
        if n < 8 || !(length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need at least 8 samples and positive length (got {n}, {length})"
            )));
        }
        let fourier = Fourier::new(n);
        let xs: Vec<f64> = position.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = position.iter().map(|p| p[1]).collect();
        let dx = fourier.derivative(&xs, 1, length);
        let dy = fourier.derivative(&ys, 1, length);
        let ddx = fourier.derivative(&xs, 2, length);
        let ddy = fourier.derivative(&ys, 2, length);
        let tangent: Vec<[f64; 2]> = dx.iter().zip(&dy).map(|(&a, &b)| [a, b]).collect();
        let normal: Vec<[f64; 2]> = tangent.iter().map(|t| [t[1], -t[0]]).collect();
        let b0: Vec<f64> = (0..n)
            .map(|j| -(ddx[j] * normal[j][0] + ddy[j] * normal[j][1]))
            .collect();
        let b0_prime = fourier.derivative(&b0, 1, length);
        Ok(Self {
            length,
            position,
            tangent,
            normal,
            b0,
            b0_prime,
            fourier,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.position.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_theta() as f64
    }

    pub fn arclength(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn position(&self) -> &[[f64; 2]] {
        &self.position
    }

    pub fn tangent(&self) -> &[[f64; 2]] {
        &self.tangent
    }

    pub fn normal(&self) -> &[[f64; 2]] {
        &self.normal
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    pub fn b0_prime(&self) -> &[f64] {
        &self.b0_prime
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_theta() {
            return Err(Error::GridMismatch(format!(
                "boundary samples {len} vs curve grid {}",
                self.n_theta()
            )));
        }
        Ok(())
    }
}

/// Periodic samples of the normal displacement `h` on the reference curve.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub values: Vec<f64>,
}

/// Periodic scalar samples on the reference curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScalar {
    pub values: Vec<f64>,
}

/// Periodic `R^2`-valued samples on the reference curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVector {
    pub values: Vec<[f64; 2]>,
}

impl HeightField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(vec![c; n])
    }

    /// Samples `f(s_j)` on the curve grid.
    pub fn from_fn(curve: &ReferenceCurve, f: impl Fn(f64) -> f64) -> Self {
        Self::new((0..curve.n_theta()).map(|j| f(curve.arclength(j))).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl BoundaryScalar {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl BoundaryVector {
    pub fn new(values: Vec<[f64; 2]>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![[0.0; 2]; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn from_components(x: &[f64], y: &[f64]) -> Self {
        Self::new(x.iter().zip(y).map(|(&a, &b)| [a, b]).collect())
    }
}

/// Arc-length derivative of order 1, 2 or 3 by periodic spectral
/// differentiation.
pub fn arc_derivative(curve: &ReferenceCurve, f: &[f64], order: u32) -> Vec<f64> {
    debug_assert!((1..=3).contains(&order));
    curve.fourier.derivative(f, order, curve.length)
}

/// Componentwise [`arc_derivative`] of a boundary vector.
pub fn arc_derivative_vector(curve: &ReferenceCurve, f: &BoundaryVector, order: u32) -> BoundaryVector {
    let dx = arc_derivative(curve, &f.component(0), order);
    let dy = arc_derivative(curve, &f.component(1), order);
    BoundaryVector::from_components(&dx, &dy)
}

/// Rejects heights with `1 + b0 h < ADMISSIBILITY_FLOOR` anywhere.
pub fn check_admissible(curve: &ReferenceCurve, h: &HeightField) -> Result<()> {
    curve.check_len(h.len())?;
    for (index, (&b0, &hv)) in curve.b0.iter().zip(&h.values).enumerate() {
        let value = 1.0 + b0 * hv;
        if !(value >= ADMISSIBILITY_FLOOR) {
            return Err(Error::AdmissibilityViolation { index, value });
        }
    }
    Ok(())
}

/// Metric `g = (1 + b0 h)^2 + h'^2` of the moving boundary.
pub fn metric(curve: &ReferenceCurve, h: &HeightField) -> Result<BoundaryScalar> {
    check_admissible(curve, h)?;
    let dh = arc_derivative(curve, &h.values, 1);
    Ok(BoundaryScalar::new(
        (0..h.len())
            .map(|j| {
                let a = 1.0 + curve.b0[j] * h.values[j];
                a * a + dh[j] * dh[j]
            })
            .collect(),
    ))
}

/// Unnormalized normal `-h' X' + (1 + b0 h) N`.
pub fn scaled_normal(curve: &ReferenceCurve, h: &HeightField) -> Result<BoundaryVector> {
    check_admissible(curve, h)?;
    let dh = arc_derivative(curve, &h.values, 1);
    Ok(BoundaryVector::new(
        (0..h.len())
            .map(|j| {
                let a = 1.0 + curve.b0[j] * h.values[j];
                let t = curve.tangent[j];
                let n = curve.normal[j];
                [-dh[j] * t[0] + a * n[0], -dh[j] * t[1] + a * n[1]]
            })
            .collect(),
    ))
}

/// Outward unit normal of the moving boundary expressed on the reference grid.
pub fn unit_normal(curve: &ReferenceCurve, h: &HeightField) -> Result<BoundaryVector> {
    let g = metric(curve, h)?;
    let mut n = scaled_normal(curve, h)?;
    for (v, gj) in n.values.iter_mut().zip(&g.values) {
        let s = gj.sqrt();
        v[0] /= s;
        v[1] /= s;
    }
    Ok(n)
}

/// Mean curvature `H o psi` of the moving boundary.
pub fn curvature(curve: &ReferenceCurve, h: &HeightField) -> Result<BoundaryScalar> {
    regularized_curvature(curve, h, h)
}

/// Regularized curvature: `h''` comes from `h`, every other height
/// occurrence from the double-mollified `h_ee`. With `h_ee = h` this is
/// exactly [`curvature`].
pub fn regularized_curvature(
    curve: &ReferenceCurve,
    h: &HeightField,
    h_ee: &HeightField,
) -> Result<BoundaryScalar> {
    check_admissible(curve, h)?;
    check_admissible(curve, h_ee)?;
    let d2h = arc_derivative(curve, &h.values, 2);
    let de = arc_derivative(curve, &h_ee.values, 1);
    Ok(BoundaryScalar::new(
        (0..h.len())
            .map(|j| {
                let b0 = curve.b0[j];
                let he = h_ee.values[j];
                let a = 1.0 + b0 * he;
                let num = a * d2h[j] - b0 * (a * a + 2.0 * de[j] * de[j]) - he * de[j] * curve.b0_prime[j];
                let g = a * a + de[j] * de[j];
                num / (g * g.sqrt())
            })
            .collect(),
    ))
}

/// Laplace-Beltrami operator on the reference curve (second arc derivative).
pub fn laplace_beltrami(curve: &ReferenceCurve, f: &[f64]) -> Vec<f64> {
    arc_derivative(curve, f, 2)
}

pub fn laplace_beltrami_vector(curve: &ReferenceCurve, f: &BoundaryVector) -> BoundaryVector {
    arc_derivative_vector(curve, f, 2)
}

/// Sampled boundary points `X + h N`.
pub fn boundary_points(curve: &ReferenceCurve, h: &HeightField) -> BoundaryVector {
    BoundaryVector::new(
        (0..h.len())
            .map(|j| {
                let x = curve.position[j];
                let n = curve.normal[j];
                [x[0] + h.values[j] * n[0], x[1] + h.values[j] * n[1]]
            })
            .collect(),
    )
}

/// Area enclosed by `X + h N` from `1/2 \oint (x y' - y x') ds`.
pub fn enclosed_area(curve: &ReferenceCurve, h: &HeightField) -> Result<f64> {
    check_admissible(curve, h)?;
    let pts = boundary_points(curve, h);
    let x = pts.component(0);
    let y = pts.component(1);
    let dx = arc_derivative(curve, &x, 1);
    let dy = arc_derivative(curve, &y, 1);
    let sum: f64 = (0..x.len()).map(|j| x[j] * dy[j] - y[j] * dx[j]).sum();
    Ok(0.5 * sum * curve.spacing())
}

/// Length of the moving boundary, `\oint sqrt(g) ds`.
pub fn interface_length(curve: &ReferenceCurve, h: &HeightField) -> Result<f64> {
    let g = metric(curve, h)?;
    Ok(g.values.iter().map(|v| v.sqrt()).sum::<f64>() * curve.spacing())
}

/// `(sum_k (1 + k^2)^s |f_k|^2)^(1/2)` with `f_0` the sample mean.
pub fn sobolev_norm(curve: &ReferenceCurve, f: &[f64], s: f64) -> f64 {
    curve.fourier.sobolev_norm(f, s, curve.length)
}

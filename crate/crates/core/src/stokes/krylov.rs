//! Restarted GMRES with right preconditioning.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from `x`. `apply(v, out)` writes `A v`,
/// `precond(v)` returns an approximation of `A^{-1} v`.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    opts: GmresOptions,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome { iterations: 0, rel_residual: 0.0, converged: true };
    }
    let m = opts.restart.max(1);
    let mut total = 0;
    let mut ax = vec![0.0; n];
    let mut rel;
    while total < opts.max_iter {
        apply(x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.rel_tol {
            return GmresOutcome { iterations: total, rel_residual: rel, converged: true };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if total >= opts.max_iter {
                break;
            }
            total += 1;
            let z = precond(&basis[k]);
            let mut w = vec![0.0; n];
            apply(&z, &mut w);
            zs.push(z);
            // Modified Gram-Schmidt, twice for stability.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let h = dot(&w, v);
                    hess[i][k] += h;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= h * b);
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let d = (hess[k][k].powi(2) + hess[k + 1][k].powi(2)).sqrt();
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / d;
            sn[k] = hess[k + 1][k] / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= opts.rel_tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(a, b)| *a += yi * b);
        }
        if k_used == 0 {
            break;
        }
    }
    apply(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let final_rel = norm(&r) / bnorm;
    GmresOutcome { iterations: total, rel_residual: final_rel, converged: final_rel <= opts.rel_tol }
}

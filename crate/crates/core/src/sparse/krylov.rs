//! Flexible GMRES and preconditioned conjugate gradients.

use super::{axpy, dot, norm2, Preconditioner, SparseMatrix};
use crate::error::{MhdError, Result};

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Relative residual estimates, starting with the initial one.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Set when the Krylov space became invariant before convergence.
    pub breakdown: bool,
}

impl KrylovReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub tol: f64,
    pub maxit: usize,
    /// Restart length; `None` keeps the full Krylov basis.
    pub restart: Option<usize>,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            maxit: 200,
            restart: None,
        }
    }
}

/// Right-preconditioned flexible GMRES from a zero initial guess.
///
/// `apply_a(x, y)` writes `A x` into `y`; `apply_m(r, z)` writes the
/// preconditioned direction into `z` and may change between calls. The
/// stopping test is `||b - A x|| <= tol ||b||`, monitored through the
/// Givens-rotated least-squares residual.
pub fn fgmres(
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    mut apply_m: impl FnMut(&[f64], &mut [f64]),
    opts: &GmresOptions,
) -> (Vec<f64>, KrylovReport) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut report = KrylovReport::default();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.residuals.push(0.0);
        return (x, report);
    }
    let m = opts.restart.unwrap_or(opts.maxit).clamp(1, opts.maxit.max(1));
    let mut r = b.to_vec();
    let mut w = vec![0.0; n];
    report.residuals.push(1.0);

    loop {
        let beta = norm2(&r);
        if beta <= opts.tol * bnorm {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.maxit {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        // Hessenberg columns, each of length j + 2.
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut stop = false;

        for j in 0..m {
            if report.iterations >= opts.maxit {
                break;
            }
            let mut zj = vec![0.0; n];
            apply_m(&v[j], &mut zj);
            apply_a(&zj, &mut w);
            z.push(zj);
            let mut col = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                col[i] = hij;
                axpy(-hij, vi, &mut w);
            }
            let hn = norm2(&w);
            col[j + 1] = hn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            col[j] = denom;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            report.iterations += 1;
            let rel = g[j + 1].abs() / bnorm;
            report.residuals.push(rel);
            if rel <= opts.tol {
                report.converged = true;
                stop = true;
                break;
            }
            if hn <= 1e-14 * beta {
                report.breakdown = true;
                stop = true;
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }

        // Back substitution for the least-squares coefficients.
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= h[l][i] * y[l];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&z) {
            axpy(*yi, zi, &mut x);
        }
        if stop || report.iterations >= opts.maxit {
            break;
        }
        apply_a(&x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
    }
    (x, report)
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops when `||b - A x|| <= tol ||b||`. A non-positive curvature `p'Ap`
/// is reported as [`MhdError::Indefinite`].
pub fn pcg(a: &SparseMatrix, b: &[f64], m: &dyn Preconditioner, tol: f64, maxit: usize) -> Result<(Vec<f64>, KrylovReport)> {
    let n = b.len();
    if a.n_rows != n || a.n_cols != n {
        return Err(MhdError::DimensionMismatch {
            context: "pcg",
            expected: a.n_rows,
            got: n,
        });
    }
    let mut x = vec![0.0; n];
    let mut report = KrylovReport::default();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.residuals.push(0.0);
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    report.residuals.push(1.0);
    while report.iterations < maxit {
        a.mul_acc(&p, &mut ap, 0.0, 1.0);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(MhdError::Indefinite {
                iteration: report.iterations,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        report.iterations += 1;
        let rel = norm2(&r) / bnorm;
        report.residuals.push(rel);
        if rel <= tol {
            report.converged = true;
            break;
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((x, report))
}

use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::math::{axpy, dot, norm};

/// Stopping parameters for [`solve_spd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `‖Kx − b‖ / ‖b‖`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 · n`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite matrix.
///
/// The residual is recomputed from scratch before returning so the reported
/// relative residual is the true one.
pub fn solve_spd(k: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<(Vec<f64>, CgStats)> {
    let n = k.nrows();
    if k.ncols() != n || b.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch in solve_spd"));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = k
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut kp = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = opts.tol * bnorm;
    let mut iterations = 0;
    let mut rnorm = bnorm;

    while iterations < max_iter {
        k.mul_vec_into(&p, &mut kp);
        let curvature = dot(&p, &kp);
        if curvature <= 0.0 {
            return Err(Error::Breakdown {
                solver: "cg",
                iteration: iterations,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &kp, &mut r);
        iterations += 1;
        rnorm = norm(&r);
        if rnorm <= target {
            // guard against drift of the recursive residual
            k.mul_vec_into(&x, &mut kp);
            for i in 0..n {
                r[i] = b[i] - kp[i];
            }
            rnorm = norm(&r);
            if rnorm <= target {
                break;
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rnorm > target {
        return Err(Error::NotConverged {
            solver: "cg",
            iterations,
            residual: rnorm / bnorm,
        });
    }
    Ok((
        x,
        CgStats {
            iterations,
            relative_residual: rnorm / bnorm,
        },
    ))
}

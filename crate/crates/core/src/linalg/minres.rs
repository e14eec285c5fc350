use alloc::vec;
use alloc::vec::Vec;

use super::{solve_spd, CgOptions, CgStats, CsrMatrix};
use crate::error::{Error, Result};
use crate::math::{abs, dot, norm, sqrt};

/// Preconditioned MINRES for symmetric, possibly indefinite matrices.
///
/// The preconditioner is `diag(|K_ii|)⁻¹`. Iteration stops on the
/// preconditioned residual estimate; the returned statistics carry the true
/// relative residual.
pub fn solve_minres(k: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<(Vec<f64>, CgStats)> {
    let n = k.nrows();
    if k.ncols() != n || b.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch in solve_minres"));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
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
        .map(|&d| if d != 0.0 { 1.0 / abs(d) } else { 1.0 })
        .collect();
    let precondition = |r: &[f64]| -> Vec<f64> { r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect() };

    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = precondition(&r1);
    let beta1 = sqrt(dot(&r1, &y));
    let mut beta = beta1;
    let mut old_beta = 0.0;
    let mut dbar = 0.0;
    let mut eps = 0.0;
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            v[i] = y[i] / beta;
        }
        k.mul_vec_into(&v, &mut av);
        if iterations >= 2 {
            let s = beta / old_beta;
            for i in 0..n {
                av[i] -= s * r1[i];
            }
        }
        let alpha = dot(&v, &av);
        let s = alpha / beta;
        for i in 0..n {
            av[i] -= s * r2[i];
        }
        core::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&av);
        y = precondition(&r2);
        old_beta = beta;
        let b2 = dot(&r2, &y);
        if b2 < 0.0 {
            return Err(Error::Breakdown {
                solver: "minres",
                iteration: iterations,
            });
        }
        beta = sqrt(b2);

        let old_eps = eps;
        let delta = cs * dbar + sn * alpha;
        let gbar = sn * dbar - cs * alpha;
        eps = sn * beta;
        dbar = -cs * beta;
        let gamma = sqrt(gbar * gbar + beta * beta).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - old_eps * w1 - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= opts.tol * beta1 || beta == 0.0 {
            break;
        }
    }

    k.mul_vec_into(&x, &mut av);
    let rnorm = sqrt(b.iter().zip(&av).map(|(b, a)| (b - a) * (b - a)).sum());
    if rnorm > 10.0 * opts.tol * bnorm {
        return Err(Error::NotConverged {
            solver: "minres",
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

/// CG, falling back to MINRES when CG meets non-positive curvature.
pub fn solve_symmetric(k: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<(Vec<f64>, CgStats)> {
    match solve_spd(k, b, opts) {
        Err(Error::Breakdown { .. }) => solve_minres(k, b, opts),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn indefinite_diagonal() {
        let k = CsrMatrix::from_dense(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (x, _) = solve_minres(&k, &[1.0, 1.0], CgOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_spd_cg() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.1 * i as f64));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (a, _) = solve_minres(&k, &b, CgOptions::with_tol(1e-12)).unwrap();
        let (c, _) = solve_spd(&k, &b, CgOptions::with_tol(1e-12)).unwrap();
        for (a, c) in a.iter().zip(&c) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn fallback_solves_shifted_laplacian() {
        // 1D Laplacian shifted so a few eigenvalues are negative
        let n = 40;
        let mut seed = 7;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 - 0.3));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
        assert!(matches!(solve_spd(&k, &b, CgOptions::default()), Err(Error::Breakdown { .. })));
        let (x, stats) = solve_symmetric(&k, &b, CgOptions::default()).unwrap();
        assert!(stats.relative_residual < 1e-9);
        let kx = k.mul_vec(&x);
        for (a, b) in kx.iter().zip(&b) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

//! Dense LU with partial pivoting for the small systems met when building
//! reference elements (at most 64×64).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::abs;

/// Solves `A X = B` for a row-major `n×n` matrix and `n×m` right-hand side.
pub fn solve(n: usize, a: &[f64], b: &[f64], m: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * m);
    let mut a = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| abs(a[i * n + k]).total_cmp(&abs(a[j * n + k])))
            .unwrap();
        if abs(a[pivot * n + k]) < 1e-300 {
            return Err(Error::InvalidArgument("singular dense matrix"));
        }
        if pivot != k {
            for c in 0..n {
                a.swap(k * n + c, pivot * n + c);
            }
            for c in 0..m {
                x.swap(k * m + c, pivot * m + c);
            }
        }
        let d = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                a[i * n + c] -= f * a[k * n + c];
            }
            for c in 0..m {
                x[i * m + c] -= f * x[k * m + c];
            }
        }
    }
    for k in (0..n).rev() {
        let d = a[k * n + k];
        for c in 0..m {
            let mut s = x[k * m + c];
            for j in k + 1..n {
                s -= a[k * n + j] * x[j * m + c];
            }
            x[k * m + c] = s / d;
        }
    }
    Ok(x)
}

/// Inverse of a row-major `n×n` matrix.
pub fn inverse(n: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut eye = alloc::vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    solve(n, a, &eye, n)
}

//! Matrix-free preconditioned conjugate gradients with a diagonal (Jacobi)
//! preconditioner.

use crate::error::{Error, Result};

/// Relative residual the iteration aims for.
pub const TARGET_TOL: f64 = 1e-13;
/// Relative residual above which a solve is reported as failed.
pub const FAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`, recomputed from scratch.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Solves `A x = b` for symmetric positive (semi)definite `A` given as a
/// closure `apply(x, out)`. `x` holds the initial guess on entry.
///
/// Iterates until the relative residual drops below [`TARGET_TOL`] or
/// `max_iter` is reached; returns an error if the final true residual is
/// above [`FAIL_TOL`].
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    max_iter: usize,
) -> Result<CgStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while iterations < max_iter {
        if dot(&r, &r).sqrt() <= TARGET_TOL * bnorm {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
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
        iterations += 1;
    }

    apply(x, &mut ap);
    let mut res = 0.0;
    for i in 0..n {
        let d = b[i] - ap[i];
        res += d * d;
    }
    let residual = res.sqrt() / bnorm;
    if !(residual <= FAIL_TOL) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverDiverged { residual, iterations });
    }
    Ok(CgStats { iterations, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_shifted(shift: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], out: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                out[i] = (shift + 2.0) * x[i] - x[(i + 1) % n] - x[(i + n - 1) % n];
            }
        }
    }

    #[test]
    fn solves_shifted_periodic_laplacian() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; n];
        let stats = pcg(laplace_shifted(0.1), &vec![2.1; n], &b, &mut x, 10 * n).unwrap();
        assert!(stats.residual <= 1e-12);
        let mut ax = vec![0.0; n];
        laplace_shifted(0.1)(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 8];
        let stats = pcg(laplace_shifted(1.0), &[3.0; 8], &[0.0; 8], &mut x, 80).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_consistent_system_converges() {
        let n = 32;
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let mut x = vec![0.0; n];
        pcg(laplace_shifted(0.0), &vec![2.0; n], &b, &mut x, 10 * n).unwrap();
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let n = 64;
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let mut x = vec![0.0; n];
        let err = pcg(laplace_shifted(1e-6), &vec![2.0; n], &b, &mut x, 2).unwrap_err();
        assert!(matches!(err, Error::SolverDiverged { iterations: 2, .. }));
    }
}

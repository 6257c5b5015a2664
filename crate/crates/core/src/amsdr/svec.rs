//! Real coordinates for Hermitian matrices.
//!
//! `svec(X)` lists the diagonal, then `√2 Re X_ij` and `√2 Im X_ij` for
//! `i < j` in row-major order, so `‖svec(X)‖ = ‖X‖_F` and
//! `tr(C X) = coeffs(C) · svec(X)`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) fn svec_len(n: usize) -> usize {
    n * n
}

pub(crate) fn svec(x: &DMatrix<Complex64>) -> Vec<f64> {
    let n = x.nrows();
    let mut out = Vec::with_capacity(n * n);
    out.extend((0..n).map(|i| x[(i, i)].re));
    for i in 0..n {
        for j in i + 1..n {
            out.push(SQRT_2 * x[(i, j)].re);
            out.push(SQRT_2 * x[(i, j)].im);
        }
    }
    out
}

pub(crate) fn smat(v: &[f64], n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        m[(i, i)] = Complex64::new(v[i], 0.0);
    }
    let mut idx = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(v[idx], v[idx + 1]) / SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Coefficients `c` with `c · svec(X) = tr(C X)` for Hermitian `C`.
pub(crate) fn trace_coeffs(c: &DMatrix<Complex64>) -> Vec<f64> {
    svec(c)
}

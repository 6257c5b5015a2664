//! Dense numerical kernels shared by the optimizers: Hermitian
//! eigendecomposition, SVD, zero-padded DFT evaluation and bracketed
//! scalar root finding.
//!
//! Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Absolute tolerance on `H[i][j] - conj(H[j][i])` accepted by
/// [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A dense square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Validates the Hermitian invariant within [`HERMITIAN_TOL`].
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::invalid(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..=i {
                let d = m[(i, j)] - m[(j, i)].conj();
                if !d.re.is_finite() || !d.im.is_finite() || d.norm() > HERMITIAN_TOL {
                    return Err(Error::invalid(format!(
                        "matrix is not Hermitian at ({i}, {j}): deviation {:.3e}",
                        d.norm()
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Hermitian part `(M + M†)/2` of an arbitrary square matrix. Used for
    /// matrices that are Hermitian in exact arithmetic but accumulate
    /// rounding asymmetry.
    pub fn hermitian_part(m: &DMatrix<Complex64>) -> Self {
        assert!(m.is_square(), "hermitian_part needs a square matrix");
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// The rank-one matrix `x x†`.
    pub fn outer(x: &[Complex64]) -> Self {
        let v = DVector::from_column_slice(x);
        Self(&v * v.adjoint())
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `tr(self · other)`, real for Hermitian arguments.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim());
        // tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Quadratic form `x† H x`.
    pub fn quad_form(&self, x: &[Complex64]) -> f64 {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += self.0[(i, j)] * x[j];
            }
            acc += x[i].conj() * row;
        }
        acc.re
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let v = DVector::from_column_slice(x);
        (&self.0 * v).iter().copied().collect()
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<Complex64>,
}

/// Singular value decomposition `M = U Σ V†`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub u: DMatrix<Complex64>,
    pub v_adjoint: DMatrix<Complex64>,
}

pub fn eig_hermitian(h: &HermitianMatrix) -> Result<Eigen> {
    let n = h.dim();
    let eig = nalgebra::SymmetricEigen::try_new(h.0.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NonFinite("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(h: &HermitianMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.values[0])
}

/// Thin SVD, singular values in descending order. Singular vectors paired
/// with zero singular values are unit-norm but otherwise unspecified.
pub fn svd(m: &DMatrix<Complex64>) -> Result<Svd> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("svd input".into()));
    }
    let (r, c) = m.shape();
    let k = r.min(c);
    // Eigenpairs of [[0, M], [M†, 0]] are (±σ, [u; ±v]/√2).
    let mut dil = DMatrix::from_element(r + c, r + c, Complex64::new(0.0, 0.0));
    dil.view_mut((0, r), (r, c)).copy_from(m);
    dil.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let eig = eig_hermitian(&HermitianMatrix(dil))?;
    let mut u = DMatrix::from_element(r, k, Complex64::new(0.0, 0.0));
    let mut v = DMatrix::from_element(c, k, Complex64::new(0.0, 0.0));
    for j in 0..k {
        let col = eig.vectors.column(j);
        let (cu, cv) = (col.rows(0, r), col.rows(r, c));
        let (nu, nv) = (cu.norm(), cv.norm());
        if nu > 0.0 {
            u.set_column(j, &(cu / Complex64::new(nu, 0.0)));
        }
        if nv > 0.0 {
            v.set_column(j, &(cv / Complex64::new(nv, 0.0)));
        }
    }
    Ok(Svd {
        singular_values: eig.values[..k].iter().map(|s| s.max(0.0)).collect(),
        u,
        v_adjoint: v.adjoint(),
    })
}

/// Bisection on a sign-changing bracket.
///
/// Stops when `|f(x)| <= tol` or the bracket is narrower than `tol`.
pub fn bisect_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    // 2100 halvings exhaust any finite f64 bracket.
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() <= tol || (hi - lo) <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Evaluates `S[q] = Σ_j c_j exp(sign · j2π (j + offset) q / M)` for
/// `q = 0..M` with one zero-padded FFT of length `M >= c.len()`.
///
/// `sign = +1` gives the Doppler sums of a lag-product vector, `sign = -1`
/// the DTFT of a sequence sampled on the `M`-point grid.
pub fn dft_on_grid(c: &[Complex64], offset: usize, m: usize, sign: i32) -> Vec<Complex64> {
    assert!(m >= c.len() && m > 0, "grid size must cover the input");
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..c.len()].copy_from_slice(c);
    let mut planner = FftPlanner::<f64>::new();
    let fft = if sign >= 0 {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    fft.process(&mut buf);
    if offset != 0 {
        let s = if sign >= 0 { 1.0 } else { -1.0 };
        for (q, v) in buf.iter_mut().enumerate() {
            let phase = s * 2.0 * std::f64::consts::PI * ((offset * q) % m) as f64 / m as f64;
            *v *= Complex64::from_polar(1.0, phase);
        }
    }
    buf
}

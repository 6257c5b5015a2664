//! Surrogate construction for one MM step: ambiguity and spectral
//! evaluations, majorizer coefficients, the quadratic matrix `Φ` and the
//! step bound `μ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ambiguity::{lag_range, oracle};
use crate::error::{Error, Result};
use crate::numerics::{lambda_max, HermitianMatrix};
use crate::waveform::{papr, Sequence, SpectralMask, ZoneCell, ZoneOfOperation};

use super::projection::project_papr;

/// Units of the augmented Lagrangian terms.
///
/// Sidelobes enter as `A / sidelobe` and ESD values as `E / spectral`.
/// With `p = 22` raw magnitudes would push `|A|^p` far from the stopband
/// terms, so the solver rescales both to unit size. [`Scaling::IDENTITY`]
/// gives the unscaled formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub sidelobe: f64,
    pub spectral: f64,
}

impl Scaling {
    pub const IDENTITY: Scaling = Scaling {
        sidelobe: 1.0,
        spectral: 1.0,
    };
}

/// Per-cell majorizer data, in the order of [`ZoneOfOperation::cells`].
#[derive(Debug, Clone, PartialEq)]
pub struct MajorizerCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub z: f64,
    /// `A_{k,l} / sidelobe`.
    pub af: Vec<Complex64>,
    pub p: u32,
    pub scaling: Scaling,
}

/// Ambiguity values on Γ and the stopband spectrum at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub af: Vec<Complex64>,
    pub esd: Vec<f64>,
}

/// Precomputed phasors and DTFT kernels for a fixed `(zone, mask, N)`.
#[derive(Debug, Clone)]
pub struct Model {
    n: usize,
    cells: Vec<ZoneCell>,
    /// `phasors[l][j] = exp(j2π(j+1) f_l)`.
    phasors: Vec<Vec<Complex64>>,
    n_doppler: usize,
    bins: Vec<f64>,
    /// `kernels[s][i] = exp(-j2π f_s i)`.
    kernels: Vec<Vec<Complex64>>,
    u_max: f64,
    lambda_l: f64,
}

impl Model {
    pub fn new(zone: &ZoneOfOperation, mask: &SpectralMask, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sequence length must be positive"));
        }
        zone.check_length(n)?;
        let phasors = zone
            .doppler()
            .iter()
            .map(|&f| {
                (0..n)
                    .map(|j| Complex64::from_polar(1.0, 2.0 * PI * f * (j + 1) as f64))
                    .collect()
            })
            .collect();
        let kernels = mask
            .bins()
            .iter()
            .map(|&f| {
                (0..n)
                    .map(|i| Complex64::from_polar(1.0, -2.0 * PI * f * i as f64))
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            cells: zone.cells(),
            phasors,
            n_doppler: zone.doppler().len(),
            bins: mask.bins().to_vec(),
            kernels,
            u_max: mask.u_max(),
            lambda_l: lambda_max_l_exact(mask.bins(), n)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[ZoneCell] {
        &self.cells
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// `λmax(L)` for the actual stopband bins.
    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }

    pub fn evaluate(&self, x: &[Complex64]) -> Evaluation {
        let af = self
            .cells
            .iter()
            .map(|c| {
                let ph = &self.phasors[c.doppler_index];
                let mut acc = Complex64::new(0.0, 0.0);
                for j in lag_range(self.n, c.delay) {
                    let i = (j as i64 + c.delay) as usize;
                    acc += x[i].conj() * ph[j] * x[j];
                }
                acc
            })
            .collect();
        let esd = self.kernels.iter().map(|row| dot(row, x).norm_sqr()).collect();
        Evaluation { af, esd }
    }

    pub fn wpsl(&self, eval: &Evaluation) -> f64 {
        self.cells
            .iter()
            .zip(&eval.af)
            .map(|(c, a)| c.weight * a.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `E_s - U_max`, floored at zero.
    pub fn max_violation(&self, eval: &Evaluation) -> f64 {
        eval.esd
            .iter()
            .map(|e| e - self.u_max)
            .fold(0.0, f64::max)
    }

    pub fn max_esd(&self, eval: &Evaluation) -> Option<f64> {
        eval.esd.iter().copied().reduce(f64::max)
    }

    /// Unit-size scaling at `eval`: `sidelobe = max w_k^(1/p)|A|`,
    /// `spectral = U_max`.
    pub fn scaling_at(&self, eval: &Evaluation, p: u32) -> Scaling {
        let s = self
            .cells
            .iter()
            .zip(&eval.af)
            .filter(|(c, _)| c.weight > 0.0)
            .map(|(c, a)| c.weight.powf(1.0 / p as f64) * a.norm())
            .fold(0.0, f64::max);
        Scaling {
            sidelobe: if s > 0.0 && s.is_finite() { s } else { 1.0 },
            spectral: if self.bins.is_empty() { 1.0 } else { self.u_max },
        }
    }

    /// `a`, `b` and `z` in ratio form: with `r = |A|/z`,
    /// `a = z^(p-2) Σ_{m=0}^{p-2} (m+1) r^m` and `b = p|A|^(p-1) - 2a|A|`.
    /// The polynomial equals the difference quotient exactly and reduces
    /// to `p(p-1)/2` at `r = 1`.
    pub fn coefficients(
        &self,
        eval: &Evaluation,
        lambda: &[f64],
        p: u32,
        scaling: Scaling,
    ) -> Result<MajorizerCoefficients> {
        if p < 2 {
            return Err(Error::invalid(format!("p must be at least 2, got {p}")));
        }
        self.check_lambda(lambda)?;
        let af: Vec<Complex64> = eval.af.iter().map(|a| a / scaling.sidelobe).collect();
        let u_hat = self.u_max / scaling.spectral;
        let extra: f64 = eval
            .esd
            .iter()
            .zip(lambda)
            .map(|(e, l)| {
                let e = e / scaling.spectral;
                l * e + (e - u_hat) * (e - u_hat)
            })
            .sum();

        let pf = p as f64;
        let mut logs: Vec<f64> = af
            .iter()
            .map(|a| a.norm())
            .filter(|&m| m > 0.0)
            .map(|m| pf * m.ln())
            .collect();
        if extra > 0.0 {
            logs.push(extra.ln());
        }
        let ln_z = if logs.is_empty() {
            f64::NEG_INFINITY
        } else {
            log_sum_exp(&logs) / pf
        };
        if ln_z.is_nan() || ln_z == f64::INFINITY {
            return Err(Error::NumericalOverflow(format!("z is not finite (ln z = {ln_z})")));
        }
        let z = ln_z.exp();
        if !z.is_finite() {
            return Err(Error::NumericalOverflow(format!(
                "z = exp({ln_z}) overflows; reduce p or enable normalization"
            )));
        }

        let mut a = Vec::with_capacity(af.len());
        let mut b = Vec::with_capacity(af.len());
        for v in &af {
            let m = v.norm();
            let (ak, bk) = majorizer_ab(m, z, p);
            if !ak.is_finite() || !bk.is_finite() {
                return Err(Error::NumericalOverflow(format!(
                    "majorizer coefficients overflow at z = {z}, p = {p}"
                )));
            }
            a.push(ak);
            b.push(bk);
        }
        Ok(MajorizerCoefficients {
            a,
            b,
            z,
            af,
            p,
            scaling,
        })
    }

    /// `λmax(Λ_l) = max_k w_k a_{k,l} (N - |k|)`, in scaled units.
    pub fn lambda_max_lambda(&self, coeffs: &MajorizerCoefficients, l: usize) -> f64 {
        let s2 = coeffs.scaling.sidelobe * coeffs.scaling.sidelobe;
        self.cells
            .iter()
            .zip(&coeffs.a)
            .filter(|(c, _)| c.doppler_index == l)
            .map(|(c, a)| c.weight * a * (self.n as f64 - c.delay.unsigned_abs() as f64) / s2)
            .fold(0.0, f64::max)
    }

    fn lambda_sum(&self, coeffs: &MajorizerCoefficients) -> f64 {
        (0..self.n_doppler)
            .map(|l| self.lambda_max_lambda(coeffs, l))
            .sum()
    }

    /// `μ = 2N Σ w_k (a|A| + |b|)/s + ρ(N/σ) Σ E_s + (N/σ) Σ λ_s`.
    pub fn mu(&self, coeffs: &MajorizerCoefficients, eval: &Evaluation, lambda: &[f64], rho: f64) -> f64 {
        let nf = self.n as f64;
        let s = coeffs.scaling.sidelobe;
        let sigma = coeffs.scaling.spectral;
        let side: f64 = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| c.weight * (coeffs.a[i] * coeffs.af[i].norm() + coeffs.b[i].abs()))
            .sum();
        let spec: f64 = eval.esd.iter().sum::<f64>() / sigma;
        let lam: f64 = lambda.iter().sum();
        2.0 * nf * side / s + rho * nf * spec + nf * lam / sigma
    }

    /// `Φ(x) y` without forming `Φ`.
    ///
    /// Per cell the `M` and halved `N` terms combine into the gradient
    /// weight `w_k (p/2) |A|^(p-2) conj(A)` on `U y` (and its conjugate on
    /// `U† y`); the `λmax` terms are rank one along `x`.
    pub fn phi_times(
        &self,
        x: &[Complex64],
        coeffs: &MajorizerCoefficients,
        eval: &Evaluation,
        lambda: &[f64],
        rho: f64,
        y: &[Complex64],
    ) -> Vec<Complex64> {
        let n = self.n;
        let s = coeffs.scaling.sidelobe;
        let sigma = coeffs.scaling.spectral;
        let half_p = coeffs.p as f64 / 2.0;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.weight == 0.0 {
                continue;
            }
            let av = coeffs.af[i];
            let m = av.norm();
            if m == 0.0 && coeffs.p > 2 {
                continue;
            }
            let c = av.conj() * (cell.weight * half_p * m.powi(coeffs.p as i32 - 2) / s);
            let cc = c.conj();
            let ph = &self.phasors[cell.doppler_index];
            let k = cell.delay;
            for j in lag_range(n, k) {
                let jk = (j as i64 + k) as usize;
                out[jk] += c * ph[j] * y[j];
                out[j] += cc * ph[j].conj() * y[jk];
            }
        }

        let radial = 2.0 * self.lambda_sum(coeffs) + rho * self.lambda_l / (sigma * sigma);
        let proj = dot_conj(x, y);
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= xi * proj * radial;
        }

        let u_hat = self.u_max / sigma;
        for ((row, e), l) in self.kernels.iter().zip(&eval.esd).zip(lambda) {
            let coef = (rho * e / sigma + l - rho * u_hat) / sigma;
            if coef == 0.0 {
                continue;
            }
            let d = dot(row, y) * coef;
            for (o, r) in out.iter_mut().zip(row) {
                *o += r.conj() * d;
            }
        }
        out
    }

    /// Dense `Φ = M + M† + N + N† + (ρ/2)(P + P†) + Σ λ_s F_s - ρU_max Σ F_s`
    /// with `M = Σ_l (Σ_k w a conj(A) U - λmax(Λ_l) x x†)`,
    /// `N = ½ Σ w b (A/|A|) U†` and `P = Σ E_s F_s - λmax(L) x x†`.
    pub fn build_phi(
        &self,
        x: &[Complex64],
        coeffs: &MajorizerCoefficients,
        eval: &Evaluation,
        lambda: &[f64],
        rho: f64,
    ) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&self.build_phi_unsymmetrized(x, coeffs, eval, lambda, rho))
    }

    /// [`Model::build_phi`] before removing rounding asymmetry.
    pub fn build_phi_unsymmetrized(
        &self,
        x: &[Complex64],
        coeffs: &MajorizerCoefficients,
        eval: &Evaluation,
        lambda: &[f64],
        rho: f64,
    ) -> DMatrix<Complex64> {
        let n = self.n;
        let s = coeffs.scaling.sidelobe;
        let sigma = coeffs.scaling.spectral;
        let zero = Complex64::new(0.0, 0.0);
        let xx = HermitianMatrix::outer(x).into_inner();

        let mut m = DMatrix::from_element(n, n, zero);
        let mut nn = DMatrix::from_element(n, n, zero);
        for (i, cell) in self.cells.iter().enumerate() {
            let u = oracle::u_matrix(n, cell.delay, cell.doppler) / Complex64::new(s, 0.0);
            let av = coeffs.af[i];
            m += &u * (av.conj() * (cell.weight * coeffs.a[i]));
            let unit = if av.norm() > 0.0 { av / av.norm() } else { zero };
            nn += u.adjoint() * (unit * (0.5 * cell.weight * coeffs.b[i]));
        }
        m -= &xx * Complex64::new(self.lambda_sum(coeffs), 0.0);

        let mut pm = DMatrix::from_element(n, n, zero);
        let mut lin = DMatrix::from_element(n, n, zero);
        let u_hat = self.u_max / sigma;
        for ((&f, e), l) in self.bins.iter().zip(&eval.esd).zip(lambda) {
            let fm = oracle::dtft_matrix(n, f) / Complex64::new(sigma, 0.0);
            pm += &fm * Complex64::new(e / sigma, 0.0);
            lin += fm * Complex64::new(l - rho * u_hat, 0.0);
        }
        pm -= &xx * Complex64::new(self.lambda_l / (sigma * sigma), 0.0);

        let half_rho = Complex64::new(0.5 * rho, 0.0);
        &m + m.adjoint() + &nn + nn.adjoint() + (&pm + pm.adjoint()) * half_rho + lin
    }

    /// `W = Σ w|A|^p + Σ λ_s E_s + (ρ/2) Σ E_s² - ρ U_max Σ E_s`, scaled.
    pub fn merit(&self, eval: &Evaluation, lambda: &[f64], rho: f64, p: u32, scaling: Scaling) -> f64 {
        let side: f64 = self
            .cells
            .iter()
            .zip(&eval.af)
            .map(|(c, a)| c.weight * (a.norm() / scaling.sidelobe).powi(p as i32))
            .sum();
        let u_hat = self.u_max / scaling.spectral;
        let spec: f64 = eval
            .esd
            .iter()
            .zip(lambda)
            .map(|(e, l)| {
                let e = e / scaling.spectral;
                l * e + 0.5 * rho * e * e - rho * u_hat * e
            })
            .sum();
        side + spec
    }

    /// One MM map `x ↦ P(μx - Φx)`. A zero direction leaves a feasible `x`
    /// unchanged.
    pub fn mm_map(
        &self,
        x: &[Complex64],
        eval: &Evaluation,
        lambda: &[f64],
        rho: f64,
        p: u32,
        gamma: f64,
        scaling: Scaling,
    ) -> Result<Sequence> {
        let coeffs = self.coefficients(eval, lambda, p, scaling)?;
        let mu = self.mu(&coeffs, eval, lambda, rho);
        let phix = self.phi_times(x, &coeffs, eval, lambda, rho, x);
        let v: Vec<Complex64> = x.iter().zip(&phix).map(|(xi, pi)| xi * mu - pi).collect();
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("MM direction".into()));
        }
        if v.iter().all(|z| z.norm_sqr() == 0.0) {
            if let Ok(seq) = Sequence::new(x.to_vec()) {
                if papr(&seq)? <= gamma * (1.0 + 1e-9) {
                    return Ok(seq);
                }
            }
            return project_papr(x, gamma, self.n);
        }
        project_papr(&v, gamma, self.n)
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.bins.len() {
            return Err(Error::invalid(format!(
                "{} multipliers for {} stopband bins",
                lambda.len(),
                self.bins.len()
            )));
        }
        Ok(())
    }
}

/// `(a, b)` for one cell with `|A| = m`.
pub(crate) fn majorizer_ab(m: f64, z: f64, p: u32) -> (f64, f64) {
    if z == 0.0 {
        return (if p == 2 { 1.0 } else { 0.0 }, 0.0);
    }
    let r = (m / z).min(1.0);
    let a = z.powi(p as i32 - 2) * poly_h(r, p);
    let b = p as f64 * m.powi(p as i32 - 1) - 2.0 * a * m;
    (a, b)
}

/// `Σ_{m=0}^{p-2} (m+1) r^m`, by Horner's rule.
fn poly_h(r: f64, p: u32) -> f64 {
    let mut acc = 0.0;
    for m in (0..=p - 2).rev() {
        acc = acc * r + (m + 1) as f64;
    }
    acc
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + v.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `Σ a_i b_i`.
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `a† b`.
fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(u, v)| u.conj() * v).sum()
}

/// The operating value `λmax(L) = N²` of the lifted spectral term.
pub fn lambda_max_l(n: usize) -> f64 {
    (n * n) as f64
}

/// Exact `λmax(Σ_s vec(F_s) vec(F_s)†)`, the top eigenvalue of the Gram
/// matrix `G_is = |f_i† f_s|²`. Equals `N²` when the bins are mutually
/// DFT-orthogonal and exceeds it otherwise.
pub fn lambda_max_l_exact(bins: &[f64], n: usize) -> Result<f64> {
    if bins.is_empty() {
        return Ok(0.0);
    }
    let gram = DMatrix::from_fn(bins.len(), bins.len(), |i, s| {
        let d = bins[s] - bins[i];
        let v: Complex64 = (0..n)
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * d * t as f64))
            .sum();
        Complex64::new(v.norm_sqr(), 0.0)
    });
    let top = lambda_max(&HermitianMatrix::hermitian_part(&gram))?;
    Ok(top.max(lambda_max_l(n)))
}

/// Coefficients at `x` with identity scaling. `ρ` does not enter `z`.
pub fn compute_coefficients(
    x: &[Complex64],
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    lambda: &[f64],
    p: u32,
) -> Result<MajorizerCoefficients> {
    let model = Model::new(zone, mask, x.len())?;
    let eval = model.evaluate(x);
    model.coefficients(&eval, lambda, p, Scaling::IDENTITY)
}

/// `max_k w_k a_{k,l} (N - |k|)` over the cells of `zone` at Doppler index `l`.
pub fn lambda_max_lambda(coeffs: &MajorizerCoefficients, zone: &ZoneOfOperation, n: usize, l: usize) -> f64 {
    let s2 = coeffs.scaling.sidelobe * coeffs.scaling.sidelobe;
    zone.cells()
        .iter()
        .zip(&coeffs.a)
        .filter(|(c, _)| c.doppler_index == l)
        .map(|(c, a)| c.weight * a * (n as f64 - c.delay.unsigned_abs() as f64) / s2)
        .fold(0.0, f64::max)
}

pub fn build_phi(
    x: &[Complex64],
    coeffs: &MajorizerCoefficients,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    lambda: &[f64],
    rho: f64,
) -> Result<HermitianMatrix> {
    let model = Model::new(zone, mask, x.len())?;
    let eval = model.evaluate(x);
    Ok(model.build_phi(x, coeffs, &eval, lambda, rho))
}

pub fn compute_mu(
    x: &[Complex64],
    coeffs: &MajorizerCoefficients,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    lambda: &[f64],
    rho: f64,
) -> Result<f64> {
    let model = Model::new(zone, mask, x.len())?;
    let eval = model.evaluate(x);
    Ok(model.mu(coeffs, &eval, lambda, rho))
}

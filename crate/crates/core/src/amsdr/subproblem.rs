//! The two convex subproblems of the alternating SDR scheme.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;
use crate::waveform::{SpectralMask, ZoneOfOperation};

/// A Hermitian matrix as dense row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHermitian {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl DenseHermitian {
    pub fn from_matrix(m: &HermitianMatrix) -> Self {
        let n = m.dim();
        let a = m.as_matrix();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(a[(i, j)].re);
                im.push(a[(i, j)].im);
            }
        }
        Self { n, re, im }
    }

    pub fn to_matrix(&self) -> Result<HermitianMatrix> {
        if self.re.len() != self.n * self.n || self.im.len() != self.n * self.n {
            return Err(Error::invalid("dense Hermitian data has the wrong length"));
        }
        HermitianMatrix::new(DMatrix::from_fn(self.n, self.n, |i, j| {
            Complex64::new(self.re[i * self.n + j], self.im[i * self.n + j])
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    LessEqual,
    Equal,
}

/// `tr(C X) - phi_coeff·φ  (≤ | =)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConstraint {
    pub matrix: DenseHermitian,
    pub phi_coeff: f64,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

/// `(1-η)φ + tr(C X) + κ (t - tr(G X))²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpObjective {
    pub phi_weight: f64,
    pub linear: Option<DenseHermitian>,
    pub square: Option<SquareTerm>,
}

/// `weight · (target - tr(G X))²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareTerm {
    pub weight: f64,
    pub target: f64,
    pub matrix: DenseHermitian,
}

/// `min objective  s.t.  constraints,  X ⪰ 0`, `X` of dimension `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSubproblem {
    pub n: usize,
    pub objective: SdpObjective,
    pub constraints: Vec<TraceConstraint>,
}

impl SdpSubproblem {
    pub fn validate(&self) -> Result<()> {
        let check = |d: &DenseHermitian| -> Result<()> {
            if d.n != self.n {
                return Err(Error::invalid(format!("matrix of dimension {} in a problem of dimension {}", d.n, self.n)));
            }
            d.to_matrix().map(|_| ())
        };
        if let Some(c) = &self.objective.linear {
            check(c)?;
        }
        if let Some(s) = &self.objective.square {
            check(&s.matrix)?;
            if s.weight < 0.0 {
                return Err(Error::invalid("square term weight must be non-negative"));
            }
        }
        if self.objective.phi_weight < 0.0 {
            return Err(Error::invalid("phi weight must be non-negative"));
        }
        for c in &self.constraints {
            check(&c.matrix)?;
            if !c.rhs.is_finite() || !c.phi_coeff.is_finite() {
                return Err(Error::invalid("constraint data must be finite"));
            }
        }
        Ok(())
    }

    /// Objective value at `(X, φ)`.
    pub fn objective_value(&self, x: &HermitianMatrix, phi: f64) -> Result<f64> {
        let mut v = self.objective.phi_weight * phi;
        if let Some(c) = &self.objective.linear {
            v += c.to_matrix()?.trace_product(x);
        }
        if let Some(s) = &self.objective.square {
            let d = s.target - s.matrix.to_matrix()?.trace_product(x);
            v += s.weight * d * d;
        }
        Ok(v)
    }

    /// Largest constraint violation at `(X, φ)`.
    pub fn max_violation(&self, x: &HermitianMatrix, phi: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs = c.matrix.to_matrix()?.trace_product(x) - c.phi_coeff * phi;
            let viol = match c.kind {
                ConstraintKind::LessEqual => (lhs - c.rhs).max(0.0),
                ConstraintKind::Equal => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        Ok(worst)
    }
}

/// `w U X U†` for `U = J_k Diag(p(f))`, by index.
fn conj_u(x: &DMatrix<Complex64>, k: i64, f: f64, w: f64) -> DMatrix<Complex64> {
    let n = x.nrows() as i64;
    let p = |m: i64| Complex64::from_polar(1.0, 2.0 * PI * f * (m + 1) as f64);
    DMatrix::from_fn(x.nrows(), x.ncols(), |a, b| {
        let (c, d) = (a as i64 - k, b as i64 - k);
        if c < 0 || d < 0 || c >= n || d >= n {
            Complex64::new(0.0, 0.0)
        } else {
            p(c) * x[(c as usize, d as usize)] * p(d).conj() * w
        }
    })
}

/// `w U† X U`, by index.
fn conj_u_adjoint(x: &DMatrix<Complex64>, k: i64, f: f64, w: f64) -> DMatrix<Complex64> {
    let n = x.nrows() as i64;
    let p = |m: i64| Complex64::from_polar(1.0, 2.0 * PI * f * (m + 1) as f64);
    DMatrix::from_fn(x.nrows(), x.ncols(), |c, d| {
        let (a, b) = (c as i64 + k, d as i64 + k);
        if a < 0 || b < 0 || a >= n || b >= n {
            Complex64::new(0.0, 0.0)
        } else {
            p(c as i64).conj() * x[(a as usize, b as usize)] * p(d as i64) * w
        }
    })
}

fn dtft_outer(n: usize, f: f64) -> HermitianMatrix {
    let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, 2.0 * PI * f * i as f64)).collect();
    HermitianMatrix::outer(&v)
}

fn hermitian(m: DMatrix<Complex64>) -> HermitianMatrix {
    HermitianMatrix::hermitian_part(&m)
}

fn check_fixed(x: &HermitianMatrix, zone: &ZoneOfOperation, eta: f64) -> Result<()> {
    zone.check_length(x.dim())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta {eta} outside [0, 1]")));
    }
    Ok(())
}

/// Shared constraints: Γ rows, stopband caps, `tr(X) = N`, `X_nn ≤ γ`.
fn common_constraints(
    sidelobe: Vec<HermitianMatrix>,
    n: usize,
    mask: &SpectralMask,
    gamma: f64,
) -> Vec<TraceConstraint> {
    let mut out: Vec<TraceConstraint> = sidelobe
        .iter()
        .map(|c| TraceConstraint {
            matrix: DenseHermitian::from_matrix(c),
            phi_coeff: 1.0,
            kind: ConstraintKind::LessEqual,
            rhs: 0.0,
        })
        .collect();
    for &f in mask.bins() {
        out.push(TraceConstraint {
            matrix: DenseHermitian::from_matrix(&dtft_outer(n, f)),
            phi_coeff: 0.0,
            kind: ConstraintKind::LessEqual,
            rhs: mask.u_max(),
        });
    }
    out.push(TraceConstraint {
        matrix: DenseHermitian::from_matrix(&HermitianMatrix::identity(n)),
        phi_coeff: 0.0,
        kind: ConstraintKind::Equal,
        rhs: n as f64,
    });
    for i in 0..n {
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        out.push(TraceConstraint {
            matrix: DenseHermitian::from_matrix(&HermitianMatrix::from_diagonal(&d)),
            phi_coeff: 0.0,
            kind: ConstraintKind::LessEqual,
            rhs: gamma,
        });
    }
    out
}

/// Subproblem in `X₁` with `X₂` fixed:
/// `min (1-η)φ + η(N² - tr(X₁X₂))²` s.t. `tr(w_k U† X₁ U X₂) ≤ φ` on Γ,
/// `tr(F_s X₁) ≤ U_max`, `tr(X₁) = N`, `X₁,nn ≤ γ`, `X₁ ⪰ 0`.
pub fn build_subproblem_x1(
    x2: &HermitianMatrix,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    gamma: f64,
    eta: f64,
) -> Result<SdpSubproblem> {
    check_fixed(x2, zone, eta)?;
    let n = x2.dim();
    // tr(U† X₁ U X₂) = tr(X₁ · U X₂ U†).
    let side = zone
        .cells()
        .iter()
        .map(|c| hermitian(conj_u(x2.as_matrix(), c.delay, c.doppler, c.weight)))
        .collect();
    Ok(SdpSubproblem {
        n,
        objective: SdpObjective {
            phi_weight: 1.0 - eta,
            linear: None,
            square: Some(SquareTerm {
                weight: eta,
                target: (n * n) as f64,
                matrix: DenseHermitian::from_matrix(x2),
            }),
        },
        constraints: common_constraints(side, n, mask, gamma),
    })
}

/// Subproblem in `X₂` with `X₁` fixed: `min (1-η)φ - η tr(X₁X₂)` under
/// the mirrored constraints.
pub fn build_subproblem_x2(
    x1: &HermitianMatrix,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    gamma: f64,
    eta: f64,
) -> Result<SdpSubproblem> {
    check_fixed(x1, zone, eta)?;
    let n = x1.dim();
    let side = zone
        .cells()
        .iter()
        .map(|c| hermitian(conj_u_adjoint(x1.as_matrix(), c.delay, c.doppler, c.weight)))
        .collect();
    let linear = hermitian(x1.as_matrix() * Complex64::new(-eta, 0.0));
    Ok(SdpSubproblem {
        n,
        objective: SdpObjective {
            phi_weight: 1.0 - eta,
            linear: Some(DenseHermitian::from_matrix(&linear)),
            square: None,
        },
        constraints: common_constraints(side, n, mask, gamma),
    })
}

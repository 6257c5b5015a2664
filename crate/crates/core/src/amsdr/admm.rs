//! Conic backend contract and the reference operator-splitting solver.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::subproblem::{ConstraintKind, SdpSubproblem};
use super::svec::{smat, svec, svec_len, trace_coeffs};
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, HermitianMatrix};

/// Largest matrix dimension accepted by [`AdmmBackend`].
pub const MAX_REFERENCE_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConicStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: ConicStatus,
    /// `None` when the problem was found infeasible.
    pub x: Option<HermitianMatrix>,
    pub phi: Option<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// A solver for [`SdpSubproblem`]s.
pub trait ConicBackend {
    fn solve(&self, prob: &SdpSubproblem, tol: f64) -> Result<ConicSolution>;
}

/// ADMM in the style of OSQP over `{box} × {PSD cone}`.
///
/// Variables are `v = (svec(X), φ)`. Linear trace rows are box-constrained,
/// an identity block on `svec(X)` is projected onto the PSD cone by
/// eigenvalue clipping, and the convex square objective enters the
/// quadratic term directly. Each linear system uses a dense Cholesky
/// factor that is refreshed when the step size adapts.
#[derive(Debug, Clone)]
pub struct AdmmBackend {
    pub max_iters: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Seeds a random starting point; `None` starts from zero.
    pub seed: Option<u64>,
    /// Iterations between residual checks.
    pub check_every: usize,
    /// Iterations between step-size adaptations.
    pub adapt_every: usize,
}

impl Default for AdmmBackend {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            seed: None,
            check_every: 5,
            adapt_every: 50,
        }
    }
}

/// Solves with the default reference backend.
pub fn conic_solve(prob: &SdpSubproblem, tol: f64) -> Result<ConicSolution> {
    AdmmBackend::default().solve(prob, tol)
}

const EQ_RHO_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

struct Data {
    n: usize,
    /// Dimension of `svec(X)`; `φ` sits at index `ds`.
    ds: usize,
    p: DMatrix<f64>,
    q: DVector<f64>,
    /// Row-equilibrated box rows.
    a: DMatrix<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    eq: Vec<bool>,
    /// Objective scale applied to `p` and `q`.
    cost_scale: f64,
}

fn assemble(prob: &SdpSubproblem) -> Result<Data> {
    let n = prob.n;
    let ds = svec_len(n);
    let d = ds + 1;
    let mut p = DMatrix::zeros(d, d);
    let mut q = DVector::zeros(d);
    q[ds] = prob.objective.phi_weight;
    if let Some(c) = &prob.objective.linear {
        for (i, v) in trace_coeffs(c.to_matrix()?.as_matrix()).into_iter().enumerate() {
            q[i] += v;
        }
    }
    if let Some(s) = &prob.objective.square {
        let g = trace_coeffs(s.matrix.to_matrix()?.as_matrix());
        for i in 0..ds {
            q[i] -= 2.0 * s.weight * s.target * g[i];
            for j in 0..ds {
                p[(i, j)] += 2.0 * s.weight * g[i] * g[j];
            }
        }
    }

    let m = prob.constraints.len() + 1;
    let mut a = DMatrix::zeros(m, d);
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    let mut eq = Vec::with_capacity(m);
    for (r, c) in prob.constraints.iter().enumerate() {
        let coeffs = trace_coeffs(c.matrix.to_matrix()?.as_matrix());
        let mut norm2 = c.phi_coeff * c.phi_coeff;
        for (j, v) in coeffs.iter().enumerate() {
            a[(r, j)] = *v;
            norm2 += v * v;
        }
        a[(r, ds)] = -c.phi_coeff;
        let scale = if norm2 > 0.0 { 1.0 / norm2.sqrt() } else { 1.0 };
        for j in 0..d {
            a[(r, j)] *= scale;
        }
        match c.kind {
            ConstraintKind::LessEqual => {
                lo.push(f64::NEG_INFINITY);
                hi.push(c.rhs * scale);
                eq.push(false);
            }
            ConstraintKind::Equal => {
                lo.push(c.rhs * scale);
                hi.push(c.rhs * scale);
                eq.push(true);
            }
        }
    }
    // φ ≥ 0 keeps φ bounded when no row involves it.
    a[(m - 1, ds)] = 1.0;
    lo.push(0.0);
    hi.push(f64::INFINITY);
    eq.push(false);

    let pmax = p.iter().fold(0.0f64, |acc: f64, v: &f64| acc.max(v.abs()));
    let qmax = q.iter().fold(0.0f64, |acc: f64, v: &f64| acc.max(v.abs()));
    let cost_scale = 1.0 / pmax.max(qmax).max(1.0);
    p *= cost_scale;
    q *= cost_scale;
    Ok(Data {
        n,
        ds,
        p,
        q,
        a,
        lo,
        hi,
        eq,
        cost_scale,
    })
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn project_psd(v: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = HermitianMatrix::hermitian_part(&smat(v, n));
    let eig = eig_hermitian(&m)?;
    if eig.values.iter().all(|&l| l >= 0.0) {
        return Ok(v.to_vec());
    }
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (i, &l) in eig.values.iter().enumerate() {
        if l > 0.0 {
            let col = eig.vectors.column(i);
            out += col * col.adjoint() * Complex64::new(l, 0.0);
        }
    }
    Ok(svec(&out))
}

fn lambda_max_svec(v: &[f64], n: usize) -> Result<f64> {
    Ok(eig_hermitian(&HermitianMatrix::hermitian_part(&smat(v, n)))?.values[0])
}

struct Factor {
    chol: Cholesky<f64, Dyn>,
}

impl Factor {
    fn new(data: &Data, rho_box: &[f64], rho_psd: f64, sigma: f64) -> Result<Self> {
        let d = data.ds + 1;
        let mut k = data.p.clone();
        for i in 0..d {
            k[(i, i)] += sigma;
        }
        for i in 0..data.ds {
            k[(i, i)] += rho_psd;
        }
        let scaled = DMatrix::from_fn(data.a.nrows(), d, |r, c| data.a[(r, c)] * rho_box[r]);
        k += data.a.transpose() * scaled;
        let chol = Cholesky::new(k).ok_or_else(|| Error::NonFinite("ADMM system is not positive definite".into()))?;
        Ok(Self { chol })
    }
}

impl AdmmBackend {
    fn rho_vector(&self, data: &Data, rho: f64) -> Vec<f64> {
        data.eq
            .iter()
            .map(|&e| if e { rho * EQ_RHO_SCALE } else { rho })
            .collect()
    }
}

impl ConicBackend for AdmmBackend {
    fn solve(&self, prob: &SdpSubproblem, tol: f64) -> Result<ConicSolution> {
        if prob.n == 0 || prob.n > MAX_REFERENCE_DIM {
            return Err(Error::invalid(format!(
                "reference backend handles 1 <= N <= {MAX_REFERENCE_DIM}, got {}",
                prob.n
            )));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        prob.validate()?;
        let data = assemble(prob)?;
        let (n, ds) = (data.n, data.ds);
        let d = ds + 1;
        let mb = data.a.nrows();

        let mut x = DVector::<f64>::zeros(d);
        if let Some(seed) = self.seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            x.iter_mut().for_each(|v| *v = rng.random::<f64>() - 0.5);
        }
        let mut z_box: DVector<f64> = &data.a * &x;
        for (i, v) in z_box.iter_mut().enumerate() {
            *v = v.clamp(data.lo[i], data.hi[i]);
        }
        let mut z_psd = DVector::from_vec(project_psd(&x.as_slice()[..ds], n)?);
        let mut y_box = DVector::<f64>::zeros(mb);
        let mut y_psd = DVector::<f64>::zeros(ds);

        let mut rho = self.rho;
        let mut rho_box = self.rho_vector(&data, rho);
        let mut factor = Factor::new(&data, &rho_box, rho, self.sigma)?;
        let alpha = self.alpha;

        let mut status = ConicStatus::MaxIters;
        let mut iterations = 0;
        let (mut prim, mut dual) = (f64::INFINITY, f64::INFINITY);
        for it in 1..=self.max_iters {
            iterations = it;
            let mut rhs = &x * self.sigma - &data.q;
            let w_box = DVector::from_fn(mb, |i, _| rho_box[i] * z_box[i] - y_box[i]);
            rhs += data.a.transpose() * w_box;
            for i in 0..ds {
                rhs[i] += rho * z_psd[i] - y_psd[i];
            }
            let xt = factor.chol.solve(&rhs);
            let zt_box = &data.a * &xt;

            x = &xt * alpha + &x * (1.0 - alpha);
            let zh_box = &zt_box * alpha + &z_box * (1.0 - alpha);
            let zh_psd = DVector::from_fn(ds, |i, _| alpha * xt[i] + (1.0 - alpha) * z_psd[i]);

            let mut new_box = DVector::from_fn(mb, |i, _| zh_box[i] + y_box[i] / rho_box[i]);
            for (i, v) in new_box.iter_mut().enumerate() {
                *v = v.clamp(data.lo[i], data.hi[i]);
            }
            let shifted: Vec<f64> = (0..ds).map(|i| zh_psd[i] + y_psd[i] / rho).collect();
            let new_psd = DVector::from_vec(project_psd(&shifted, n)?);

            let dy_box = DVector::from_fn(mb, |i, _| rho_box[i] * (zh_box[i] - new_box[i]));
            let dy_psd = (&zh_psd - &new_psd) * rho;
            y_box += &dy_box;
            y_psd += &dy_psd;
            z_box = new_box;
            z_psd = new_psd;

            if it % self.check_every != 0 && it != self.max_iters {
                continue;
            }
            let ax_box = &data.a * &x;
            let ax_psd = x.rows(0, ds).into_owned();
            let r_box = &ax_box - &z_box;
            let r_psd = &ax_psd - &z_psd;
            prim = inf_norm(&r_box).max(inf_norm(&r_psd));
            let px = &data.p * &x;
            let mut aty = data.a.transpose() * &y_box;
            for i in 0..ds {
                aty[i] += y_psd[i];
            }
            let dres = &px + &data.q + &aty;
            dual = inf_norm(&dres);
            let ax_norm = inf_norm(&ax_box).max(inf_norm(&ax_psd));
            let z_norm = inf_norm(&z_box).max(inf_norm(&z_psd));
            let eps_prim = tol + tol * ax_norm.max(z_norm);
            let dual_scale = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&data.q));
            let eps_dual = tol + tol * dual_scale;
            if prim <= eps_prim && dual <= eps_dual {
                status = ConicStatus::Optimal;
                break;
            }

            if primal_infeasible(&data, &dy_box, &dy_psd, tol)? {
                status = ConicStatus::Infeasible;
                break;
            }

            if it % self.adapt_every == 0 {
                let num = prim / ax_norm.max(z_norm).max(1e-30);
                let den = dual / dual_scale.max(1e-30);
                if num > 0.0 && den > 0.0 {
                    let ratio = (num / den).sqrt();
                    if !(0.2..=5.0).contains(&ratio) {
                        rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                        rho_box = self.rho_vector(&data, rho);
                        factor = Factor::new(&data, &rho_box, rho, self.sigma)?;
                    }
                }
            }
        }

        if status == ConicStatus::Infeasible {
            return Ok(ConicSolution {
                status,
                x: None,
                phi: None,
                objective: f64::NAN,
                iterations,
                primal_residual: prim,
                dual_residual: dual / data.cost_scale,
            });
        }
        let xm = HermitianMatrix::hermitian_part(&smat(z_psd.as_slice(), n));
        let phi = x[ds];
        let objective = prob.objective_value(&xm, phi)?;
        if !objective.is_finite() {
            return Err(Error::NonFinite("conic objective".into()));
        }
        Ok(ConicSolution {
            status,
            x: Some(xm),
            phi: Some(phi),
            objective,
            iterations,
            primal_residual: prim,
            dual_residual: dual / data.cost_scale,
        })
    }
}

/// Dual-ray certificate: `A'δy ≈ 0` with a negative support value of the
/// constraint set in direction `δy`.
fn primal_infeasible(data: &Data, dy_box: &DVector<f64>, dy_psd: &DVector<f64>, tol: f64) -> Result<bool> {
    let scale = inf_norm(dy_box).max(inf_norm(dy_psd));
    if scale <= 1e-12 {
        return Ok(false);
    }
    let mut aty = data.a.transpose() * dy_box;
    for i in 0..data.ds {
        aty[i] += dy_psd[i];
    }
    if inf_norm(&aty) > tol * scale {
        return Ok(false);
    }
    let mut support = 0.0;
    for (i, &v) in dy_box.iter().enumerate() {
        if v > tol * scale {
            if data.hi[i].is_infinite() {
                return Ok(false);
            }
            support += data.hi[i] * v;
        } else if v < -tol * scale {
            if data.lo[i].is_infinite() {
                return Ok(false);
            }
            support += data.lo[i] * v;
        }
    }
    if lambda_max_svec(dy_psd.as_slice(), data.n)? > tol * scale {
        return Ok(false);
    }
    Ok(support < -tol * scale)
}

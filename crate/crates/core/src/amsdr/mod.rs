//! Alternating minimization over the biconvex semidefinite relaxation
//! (AM/SDR).
//!
//! The lifted problem couples two PSD matrices through the penalty
//! `N² - tr(X₁X₂)`, which vanishes only when both equal the same rank-one
//! `x x†`. Each half-step is a convex SDP handed to a [`ConicBackend`].

mod admm;
mod subproblem;
mod svec;


use std::time::Instant;

use serde::Serialize;

pub use admm::{conic_solve, AdmmBackend, ConicBackend, ConicSolution, ConicStatus, MAX_REFERENCE_DIM};
pub use subproblem::{
    build_subproblem_x1, build_subproblem_x2, ConstraintKind, DenseHermitian, SdpObjective, SdpSubproblem,
    SquareTerm, TraceConstraint,
};

use crate::alamm::project_papr;
use crate::error::{Error, Result};
use crate::numerics::{svd, HermitianMatrix};
use crate::waveform::{papr, DesignConfig, Sequence, SpectralMask, ZoneOfOperation};

/// Negative coupling gap tolerated per unit of backend tolerance; iterates
/// satisfy `tr(X) = N` only to solver accuracy.
const GAP_SLACK_PER_TOL: f64 = 100.0;

/// One AM sweep (both subproblems).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmTraceRecord {
    pub iter: usize,
    pub gap: f64,
    pub phi: f64,
    /// `σ₁/σ₀` of the current `X₂`.
    pub sigma_ratio: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AmStatus {
    /// Rank-one extraction succeeded.
    Converged,
    /// `σ₁/σ₀` of the final `X₂` exceeded `eps_r`; no sequence is returned.
    RankOneFailure { sigma_ratio: f64 },
}

#[derive(Debug, Clone)]
pub struct AmOutcome {
    pub status: AmStatus,
    pub sequence: Option<Sequence>,
    pub trace: Vec<AmTraceRecord>,
    pub gap: f64,
    pub sweeps: usize,
    pub x1: HermitianMatrix,
    pub x2: HermitianMatrix,
}

/// `1 - tr(X₁X₂)/N²`.
pub fn coupling_gap(x1: &HermitianMatrix, x2: &HermitianMatrix) -> f64 {
    let n = x1.dim() as f64;
    1.0 - x1.trace_product(x2) / (n * n)
}

/// Leading singular pair of `X` and the ratio `σ₁/σ₀`.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub sigma_ratio: f64,
    /// `√σ₀ u₀`.
    pub vector: Vec<num_complex::Complex64>,
}

pub fn rank_one_part(x: &HermitianMatrix) -> Result<RankOne> {
    let dec = svd(x.as_matrix())?;
    let s0 = dec.singular_values[0];
    if s0 <= 0.0 {
        return Err(Error::Degenerate("zero matrix has no rank-one part".into()));
    }
    let s1 = dec.singular_values.get(1).copied().unwrap_or(0.0);
    let vector = dec.u.column(0).iter().map(|v| v * s0.sqrt()).collect();
    Ok(RankOne {
        sigma_ratio: s1 / s0,
        vector,
    })
}

/// Rank-one extraction: `x = √σ₀ u₀`, re-projected onto the energy/PAPR
/// set and rotated so the first nonzero entry is real and non-negative.
/// Fails with `None` when `σ₁/σ₀ > eps_r`.
pub fn extract_sequence(x2: &HermitianMatrix, gamma: f64, eps_r: f64) -> Result<(f64, Option<Sequence>)> {
    let r = rank_one_part(x2)?;
    if r.sigma_ratio > eps_r {
        return Ok((r.sigma_ratio, None));
    }
    let x = project_papr(&r.vector, gamma, x2.dim())?;
    Ok((r.sigma_ratio, Some(x.with_canonical_phase())))
}

/// AM/SDR with the reference backend.
pub fn am_solve(
    x_init: &Sequence,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    config: &DesignConfig,
) -> Result<AmOutcome> {
    let backend = AdmmBackend {
        max_iters: config.backend_max_iters,
        ..AdmmBackend::default()
    };
    am_solve_with(&backend, x_init, zone, mask, config)
}

/// AM/SDR: alternate the `X₁` and `X₂` subproblems from
/// `X₁ = X₂ = x_init x_init†` until the coupling gap is at most `eps_x` or
/// `t_max` sweeps have run, then extract a sequence from `X₂`.
pub fn am_solve_with(
    backend: &dyn ConicBackend,
    x_init: &Sequence,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    config: &DesignConfig,
) -> Result<AmOutcome> {
    let n = x_init.len();
    if n > MAX_REFERENCE_DIM {
        return Err(Error::invalid(format!(
            "AM/SDR is limited to N <= {MAX_REFERENCE_DIM}, got {n}"
        )));
    }
    config.validate(n)?;
    zone.check_length(n)?;
    let gamma = config.papr_bound;
    if papr(x_init)? > gamma * (1.0 + 1e-9) {
        return Err(Error::invalid("initial sequence violates the PAPR bound"));
    }
    let start = Instant::now();
    let clock = || {
        if config.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };

    let mut x2 = HermitianMatrix::outer(x_init);
    let mut x1 = x2.clone();
    let mut trace = vec![AmTraceRecord {
        iter: 0,
        gap: coupling_gap(&x1, &x2),
        phi: max_sidelobe_trace(&x1, &x2, zone)?,
        sigma_ratio: rank_one_part(&x2)?.sigma_ratio,
        wall_ms: clock(),
    }];

    let mut gap;
    let mut t = 0;
    loop {
        t += 1;
        let p1 = build_subproblem_x1(&x2, zone, mask, gamma, config.eta)?;
        let s1 = solve_checked(backend, &p1, config.backend_tol)?;
        x1 = s1.0;
        let p2 = build_subproblem_x2(&x1, zone, mask, gamma, config.eta)?;
        let (next, phi) = solve_checked(backend, &p2, config.backend_tol)?;
        x2 = next;
        gap = coupling_gap(&x1, &x2);
        if gap < -GAP_SLACK_PER_TOL * config.backend_tol {
            return Err(Error::NonFinite(format!("negative coupling gap {gap} at sweep {t}")));
        }
        trace.push(AmTraceRecord {
            iter: t,
            gap,
            phi,
            sigma_ratio: rank_one_part(&x2)?.sigma_ratio,
            wall_ms: clock(),
        });
        if gap <= config.eps_x || t >= config.t_max {
            break;
        }
    }

    let (ratio, sequence) = extract_sequence(&x2, gamma, config.eps_r)?;
    let status = if sequence.is_some() {
        AmStatus::Converged
    } else {
        AmStatus::RankOneFailure { sigma_ratio: ratio }
    };
    Ok(AmOutcome {
        status,
        sequence,
        trace,
        gap,
        sweeps: t,
        x1,
        x2,
    })
}

fn solve_checked(backend: &dyn ConicBackend, prob: &SdpSubproblem, tol: f64) -> Result<(HermitianMatrix, f64)> {
    let sol = backend.solve(prob, tol)?;
    match (sol.status, sol.x, sol.phi) {
        (ConicStatus::Infeasible, _, _) => Err(Error::Infeasible),
        (_, Some(x), Some(phi)) => Ok((x, phi)),
        _ => Err(Error::Infeasible),
    }
}

/// `max_{(k,l) ∈ Γ} tr(w_k U† X₁ U X₂)`.
pub fn max_sidelobe_trace(x1: &HermitianMatrix, x2: &HermitianMatrix, zone: &ZoneOfOperation) -> Result<f64> {
    let p = build_subproblem_x1(x2, zone, &SpectralMask::none(x2.dim()), 1.0, 0.0)?;
    let mut best: f64 = 0.0;
    for c in p.constraints.iter().filter(|c| c.phi_coeff != 0.0) {
        best = best.max(c.matrix.to_matrix()?.trace_product(x1));
    }
    Ok(best)
}

//! SQUAREM-accelerated MM inner loop and the augmented-Lagrangian outer
//! loop.

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::ambiguity::wpsl_db;
use crate::error::{Error, Result};
use crate::waveform::{papr, DesignConfig, Sequence, SpectralMask, ZoneOfOperation};

use super::model::{Evaluation, Model, Scaling};

/// Largest number of step-length halvings per SQUAREM step.
pub const MAX_HALVINGS: usize = 60;

/// One accepted inner iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub wpsl_db: f64,
    pub merit: f64,
    pub max_stopband_violation: f64,
    pub papr: f64,
    pub wall_ms: f64,
    /// Outer (multiplier) iteration the step belongs to.
    pub outer: usize,
    /// Merit of the previous iterate under the same multipliers and scaling.
    pub merit_before: f64,
}

#[derive(Debug, Clone)]
pub struct ALState {
    pub x: Sequence,
    pub eval: Evaluation,
    pub lambda: Vec<f64>,
    pub scaling: Scaling,
    pub iter: usize,
    pub outer: usize,
}

impl ALState {
    pub fn new(model: &Model, x: Sequence, p: u32, normalize: bool) -> Self {
        let eval = model.evaluate(&x);
        let scaling = if normalize {
            model.scaling_at(&eval, p)
        } else {
            Scaling::IDENTITY
        };
        Self {
            x,
            eval,
            lambda: vec![0.0; model.bins().len()],
            scaling,
            iter: 0,
            outer: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub rho: f64,
    pub p: u32,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Extrapolated step accepted after `halvings` backtracks.
    Accelerated { halvings: usize },
    /// Degenerate extrapolation; the plain MM step was taken.
    Plain,
    /// No candidate decreased the merit; the iterate is unchanged.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub x: Sequence,
    pub eval: Evaluation,
    pub merit_before: f64,
    pub merit_after: f64,
    pub kind: StepKind,
}

fn finite_merit(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("merit evaluated to {v}")))
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One SQUAREM step from `state.x` under the state's multipliers and
/// scaling. The merit never increases.
pub fn squarem_step(model: &Model, state: &ALState, params: StepParams) -> Result<StepOutcome> {
    let StepParams { rho, p, gamma } = params;
    let lam = &state.lambda;
    let sc = state.scaling;
    let merit = |e: &Evaluation| finite_merit(model.merit(e, lam, rho, p, sc));

    let x0 = state.x.values();
    let w0 = merit(&state.eval)?;
    let x1 = model.mm_map(x0, &state.eval, lam, rho, p, gamma, sc)?;
    let e1 = model.evaluate(&x1);
    let w1 = merit(&e1)?;
    let x2 = model.mm_map(&x1, &e1, lam, rho, p, gamma, sc)?;

    let r: Vec<Complex64> = x1.iter().zip(x0).map(|(a, b)| a - b).collect();
    let u: Vec<Complex64> = x2
        .iter()
        .zip(x1.iter())
        .zip(&r)
        .map(|((c, b), d)| c - b - d)
        .collect();
    let (nr, nu) = (norm(&r), norm(&u));

    let plain = |x1: Sequence, e1: Evaluation| -> StepOutcome {
        if w1 <= w0 {
            StepOutcome {
                x: x1,
                eval: e1,
                merit_before: w0,
                merit_after: w1,
                kind: StepKind::Plain,
            }
        } else {
            StepOutcome {
                x: state.x.clone(),
                eval: state.eval.clone(),
                merit_before: w0,
                merit_after: w0,
                kind: StepKind::Stalled,
            }
        }
    };
    if nu == 0.0 || nr == 0.0 {
        return Ok(plain(x1, e1));
    }

    let mut alpha = -nr / nu;
    for halvings in 0..=MAX_HALVINGS {
        let x3: Vec<Complex64> = x0
            .iter()
            .zip(&r)
            .zip(&u)
            .map(|((x, r), u)| x - r * (2.0 * alpha) + u * (alpha * alpha))
            .collect();
        if x3.iter().any(|z| z.norm_sqr() > 0.0) {
            let e3 = model.evaluate(&x3);
            if let Ok(xn) = model.mm_map(&x3, &e3, lam, rho, p, gamma, sc) {
                let en = model.evaluate(&xn);
                let wn = merit(&en)?;
                if wn <= w0 {
                    return Ok(StepOutcome {
                        x: xn,
                        eval: en,
                        merit_before: w0,
                        merit_after: wn,
                        kind: StepKind::Accelerated { halvings },
                    });
                }
            }
        }
        alpha = (alpha - 1.0) / 2.0;
    }
    Ok(plain(x1, e1))
}

/// `λ_s ← max(0, λ_s + ρ(E_s - U_max))`, in the scaled units of `scaling`.
pub fn update_multipliers(lambda: &mut [f64], esd: &[f64], u_max: f64, rho: f64, scaling: Scaling) {
    let u_hat = u_max / scaling.spectral;
    for (l, e) in lambda.iter_mut().zip(esd) {
        *l = (*l + rho * (e / scaling.spectral - u_hat)).max(0.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AlammStatus {
    /// Stopband satisfied and WPSL settled.
    Converged,
    /// `outer_max` multiplier updates were used.
    IterationLimit,
    /// A non-finite value stopped the run; the best iterate so far is kept.
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct AlammOutcome {
    pub sequence: Sequence,
    pub trace: Vec<TraceRecord>,
    pub status: AlammStatus,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub lambda: Vec<f64>,
}

/// Best-iterate bookkeeping: stopband-feasible (within slack) iterates rank
/// by WPSL, the rest by violation.
struct Best {
    x: Sequence,
    feasible: bool,
    wpsl: f64,
    violation: f64,
}

impl Best {
    fn offer(&mut self, x: &Sequence, feasible: bool, wpsl: f64, violation: f64) {
        let better = match (feasible, self.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => wpsl < self.wpsl,
            (false, false) => violation < self.violation || (violation == self.violation && wpsl < self.wpsl),
        };
        if better {
            *self = Best {
                x: x.clone(),
                feasible,
                wpsl,
                violation,
            };
        }
    }
}

/// Augmented-Lagrangian MM design of a low-WPSL sequence.
pub fn alamm_solve(
    x_init: &Sequence,
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    config: &DesignConfig,
) -> Result<AlammOutcome> {
    let n = x_init.len();
    config.validate(n)?;
    let gamma = config.papr_bound;
    if papr(x_init)? > gamma * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "initial sequence PAPR {} exceeds bound {gamma}",
            papr(x_init)?
        )));
    }
    let model = Model::new(zone, mask, n)?;
    let params = StepParams {
        rho: config.rho,
        p: config.p,
        gamma,
    };
    let start = Instant::now();
    let clock = || {
        if config.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };
    let u_max = model.u_max();
    let slack_cap = u_max * (1.0 + config.select_slack);
    let feasible = |e: &Evaluation| model.max_esd(e).is_none_or(|m| m <= slack_cap);

    let mut state = ALState::new(&model, x_init.clone(), config.p, config.normalize);
    let w_init = model.wpsl(&state.eval);
    let mut best = Best {
        x: x_init.clone(),
        feasible: feasible(&state.eval),
        wpsl: w_init,
        violation: model.max_violation(&state.eval),
    };
    let mut trace = Vec::new();
    let record = |state: &ALState, merit: f64, merit_before: f64, wall_ms: f64| -> Result<TraceRecord> {
        Ok(TraceRecord {
            iter: state.iter,
            wpsl_db: wpsl_db(model.wpsl(&state.eval), n),
            merit,
            max_stopband_violation: model.max_violation(&state.eval),
            papr: papr(&state.x)?,
            wall_ms,
            outer: state.outer,
            merit_before,
        })
    };
    let w0 = model.merit(&state.eval, &state.lambda, config.rho, config.p, state.scaling);
    trace.push(record(&state, w0, w0, clock())?);

    let mut prev_wpsl = w_init;
    let mut status = AlammStatus::IterationLimit;
    'outer: for outer in 0..config.outer_max {
        state.outer = outer;
        for _ in 0..config.inner_max {
            let step = match squarem_step(&model, &state, params) {
                Ok(s) => s,
                Err(e @ (Error::NonFinite(_) | Error::NumericalOverflow(_))) => {
                    status = AlammStatus::Aborted(e.to_string());
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            if step.kind == StepKind::Stalled {
                break;
            }
            state.x = step.x;
            state.eval = step.eval;
            state.iter += 1;
            trace.push(record(&state, step.merit_after, step.merit_before, clock())?);
            best.offer(
                &state.x,
                feasible(&state.eval),
                model.wpsl(&state.eval),
                model.max_violation(&state.eval),
            );
            let denom = step.merit_before.abs().max(f64::MIN_POSITIVE);
            if (step.merit_before - step.merit_after) / denom < config.inner_tol {
                break;
            }
        }

        update_multipliers(&mut state.lambda, &state.eval.esd, u_max, config.rho, state.scaling);

        let w = model.wpsl(&state.eval);
        let settled = if prev_wpsl > 0.0 {
            (prev_wpsl - w).abs() / prev_wpsl < config.outer_tol
        } else {
            w == 0.0
        };
        prev_wpsl = w;
        if model.max_violation(&state.eval) <= config.feas_tol * u_max && settled {
            status = AlammStatus::Converged;
            break;
        }

        if config.normalize {
            let next = model.scaling_at(&state.eval, config.p);
            let ratio = (state.scaling.sidelobe / next.sidelobe).powi(config.p as i32);
            if ratio.is_finite() && ratio > 0.0 {
                state.lambda.iter_mut().for_each(|l| *l *= ratio);
                state.scaling = next;
            }
        }
    }

    Ok(AlammOutcome {
        sequence: best.x,
        trace,
        status,
        iterations: state.iter,
        outer_iterations: state.outer + 1,
        lambda: state.lambda,
    })
}

//! Augmented-Lagrangian majorization-minimization (ALaMM).
//!
//! The stopband caps enter through an augmented Lagrangian. Each inner step
//! majorizes the ℓp sidelobe surrogate `Σ w_k |A_{k,l}|^p` by a quadratic
//! `x†Φx`, bounds `Φ ⪯ μI`, and maximizes `Re((μx - Φx)†x')` over the
//! energy/PAPR set in closed form. SQUAREM extrapolation with a merit
//! safeguard accelerates the inner loop.

mod model;
mod projection;
mod solver;

#[cfg(test)]
mod tests;

pub use model::{
    build_phi, compute_coefficients, compute_mu, lambda_max_l, lambda_max_l_exact, lambda_max_lambda, Evaluation,
    MajorizerCoefficients, Model, Scaling,
};
pub use projection::project_papr;
pub use solver::{
    alamm_solve, squarem_step, update_multipliers, ALState, AlammOutcome, AlammStatus, StepKind, StepOutcome,
    StepParams, TraceRecord, MAX_HALVINGS,
};

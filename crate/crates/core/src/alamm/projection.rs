//! Projection onto `{x : x†x = N, |x_n| <= √γ}` that maximizes `Re(v†x)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::Sequence;

/// `P(v)`.
///
/// With `m` nonzero entries in `v`: if `N - mγ >= 0` the support gets
/// modulus `√γ` and the zero set shares the remaining energy equally
/// (phase 0 there). Otherwise moduli are `min(β|v_n|, √γ)` where `β`
/// solves `Σ min(β²|v_n|², γ) = N`. Phases follow `v` on its support.
pub fn project_papr(v: &[Complex64], gamma: f64, n: usize) -> Result<Sequence> {
    if v.len() != n {
        return Err(Error::invalid(format!("vector length {} != N = {n}", v.len())));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("PAPR bound {gamma} must be >= 1")));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("projection input".into()));
    }
    let mags: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    let m = mags.iter().filter(|&&a| a > 0.0).count();
    if m == 0 {
        return Err(Error::Degenerate("cannot project the zero vector".into()));
    }
    let nf = n as f64;
    let slack = nf - m as f64 * gamma;
    let root_gamma = gamma.sqrt();

    let out: Vec<Complex64> = if slack >= 0.0 {
        let fill = if m < n {
            (slack / (n - m) as f64).sqrt()
        } else {
            0.0
        };
        v.iter()
            .zip(&mags)
            .map(|(z, &a)| {
                if a > 0.0 {
                    z * (root_gamma / a)
                } else {
                    Complex64::new(fill, 0.0)
                }
            })
            .collect()
    } else {
        let beta = solve_beta(&mags, gamma, nf)?;
        v.iter()
            .zip(&mags)
            .map(|(z, &a)| {
                if a > 0.0 {
                    let target = (beta * a).min(root_gamma);
                    z * (target / a)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    };
    Sequence::new(out)
}

/// `β` with `Σ min(β²|v_n|², γ) = N`, given `Σ_{v_n ≠ 0} γ > N`.
///
/// The energy is `jγ + β² S_j` while exactly the `j` largest magnitudes
/// saturate, with `S_j` the squared norm of the rest; each piece is solved
/// in closed form and the first self-consistent one is kept.
pub(crate) fn solve_beta(mags: &[f64], gamma: f64, n: f64) -> Result<f64> {
    let mut sorted: Vec<f64> = mags.iter().copied().filter(|&a| a > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let root_gamma = gamma.sqrt();
    // tail[j] = Σ_{i >= j} sorted[i]², summed from the small end.
    let mut tail = vec![0.0; sorted.len() + 1];
    for j in (0..sorted.len()).rev() {
        tail[j] = tail[j + 1] + sorted[j] * sorted[j];
    }
    for j in 0..sorted.len() {
        let rest = n - j as f64 * gamma;
        if rest <= 0.0 {
            break;
        }
        let beta = (rest / tail[j]).sqrt();
        let below = beta * sorted[j] <= root_gamma * (1.0 + 1e-12);
        let above = j == 0 || beta * sorted[j - 1] >= root_gamma * (1.0 - 1e-12);
        if below && above {
            return Ok(beta);
        }
    }
    Err(Error::Degenerate(format!(
        "no scaling reaches energy {n} under PAPR bound {gamma}"
    )))
}

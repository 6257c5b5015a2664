//! Discrete ambiguity function over a zone of operation, the WPSL
//! objective, energy spectral density and feasibility reporting.
//!
//! `A(k, f) = x† U_{k,f} x` with `U_{k,f} = J_k Diag(p(f))`,
//! `J_k(n, m) = 1` iff `n - m = k` and `p(f)_m = exp(j2π m f)`, `m = 1..N`.
//! None of the matrices are formed outside of [`oracle`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::dft_on_grid;
use crate::waveform::{energy, papr, SpectralMask, ZoneOfOperation};

/// Largest oversampled Doppler grid considered for the FFT path.
const MAX_FFT_GRID: usize = 1 << 16;

/// Row range `j` of lag products `conj(x[j + k]) x[j]` for delay `k`.
#[inline]
pub(crate) fn lag_range(n: usize, k: i64) -> std::ops::Range<usize> {
    if k >= 0 {
        0..n - k as usize
    } else {
        (-k) as usize..n
    }
}

/// `x† U_{k,f} x`, streamed in O(N).
pub fn af_value(x: &[Complex64], k: i64, f: f64) -> Result<Complex64> {
    let n = x.len();
    if k.unsigned_abs() as usize >= n {
        return Err(Error::DelayOutOfRange { delay: k, len: n });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for j in lag_range(n, k) {
        let i = (j as i64 + k) as usize;
        let phase = 2.0 * PI * f * (j + 1) as f64;
        acc += x[i].conj() * x[j] * Complex64::from_polar(1.0, phase);
    }
    Ok(acc)
}

/// How [`af_grid_with`] evaluates each delay row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfMethod {
    /// FFT when the Doppler grid lies on an `M`-point DFT grid and the
    /// transform is cheaper than direct summation.
    Auto,
    Direct,
    /// Fails with `InvalidInput` if the Doppler grid is not FFT-aligned.
    Fft,
}

/// Ambiguity function sampled on Γ ∪ {(0, 0)}.
#[derive(Debug, Clone)]
pub struct AfGrid {
    pub zone: ZoneOfOperation,
    /// `values[k + r][l] = A(k, f_l)`.
    pub values: Vec<Vec<Complex64>>,
    /// `A(0, 0) = x†x`.
    pub mainlobe: Complex64,
}

impl AfGrid {
    pub fn get(&self, k: i64, l: usize) -> Complex64 {
        self.values[(k + self.zone.max_delay() as i64) as usize][l]
    }
}

/// Smallest `M` in `[n, MAX_FFT_GRID]` with every `f_l · M` an integer.
pub fn fft_grid_size(doppler: &[f64], n: usize) -> Option<usize> {
    (n.max(1)..=MAX_FFT_GRID).find(|&m| {
        doppler
            .iter()
            .all(|f| (f * m as f64 - (f * m as f64).round()).abs() <= 1e-9)
    })
}

pub fn af_grid(x: &[Complex64], zone: &ZoneOfOperation) -> Result<AfGrid> {
    af_grid_with(x, zone, AfMethod::Auto)
}

pub fn af_grid_with(x: &[Complex64], zone: &ZoneOfOperation, method: AfMethod) -> Result<AfGrid> {
    let n = x.len();
    zone.check_length(n)?;
    let doppler = zone.doppler();
    let grid = match method {
        AfMethod::Direct => None,
        AfMethod::Fft => Some(fft_grid_size(doppler, n).ok_or_else(|| {
            Error::invalid("Doppler grid is not aligned with any DFT grid")
        })?),
        AfMethod::Auto => fft_grid_size(doppler, n).filter(|&m| {
            let fft_cost = 2.0 * m as f64 * (m as f64).log2();
            fft_cost < (doppler.len() * n) as f64
        }),
    };
    let delays: Vec<i64> = zone.delays().collect();
    let values = delays
        .par_iter()
        .map(|&k| match grid {
            Some(m) => row_fft(x, k, doppler, m),
            None => doppler.iter().map(|&f| af_value(x, k, f)).collect(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AfGrid {
        zone: zone.clone(),
        values,
        mainlobe: Complex64::new(energy(x), 0.0),
    })
}

fn row_fft(x: &[Complex64], k: i64, doppler: &[f64], m: usize) -> Result<Vec<Complex64>> {
    let n = x.len();
    let range = lag_range(n, k);
    let start = range.start;
    let lags: Vec<Complex64> = range
        .map(|j| x[(j as i64 + k) as usize].conj() * x[j])
        .collect();
    let sums = dft_on_grid(&lags, start + 1, m, 1);
    Ok(doppler
        .iter()
        .map(|f| {
            let q = (f * m as f64).round() as i64;
            sums[q.rem_euclid(m as i64) as usize]
        })
        .collect())
}

/// `max_{(k, f_l) ∈ Γ} w_k |A(k, f_l)|`.
pub fn wpsl(x: &[Complex64], zone: &ZoneOfOperation) -> Result<f64> {
    let grid = af_grid(x, zone)?;
    Ok(wpsl_of_grid(&grid))
}

pub fn wpsl_of_grid(grid: &AfGrid) -> f64 {
    grid.zone
        .cells()
        .iter()
        .map(|c| c.weight * grid.get(c.delay, c.doppler_index).norm())
        .fold(0.0, f64::max)
}

/// `20 log10(wpsl / N)`: sidelobe level relative to the mainlobe.
pub fn wpsl_db(wpsl: f64, n: usize) -> f64 {
    20.0 * (wpsl / n as f64).log10()
}

/// `|Σ_{n=0}^{N-1} x_{n+1} exp(-j2π f n)|² = x† F_s x`.
pub fn esd(x: &[Complex64], f: f64) -> f64 {
    dtft(x, f).norm_sqr()
}

pub(crate) fn dtft(x: &[Complex64], f: f64) -> Complex64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * f * i as f64))
        .sum()
}

/// ESD on the uniform grid `f = q / m`, `q = 0..m`.
pub fn esd_grid(x: &[Complex64], m: usize) -> Vec<f64> {
    if m >= x.len() {
        dft_on_grid(x, 0, m, -1).iter().map(|v| v.norm_sqr()).collect()
    } else {
        (0..m).map(|q| esd(x, q as f64 / m as f64)).collect()
    }
}

/// `U_max = N · 10^(-A/10)`.
pub fn u_max(n: usize, attenuation_db: f64) -> f64 {
    n as f64 * 10f64.powf(-0.1 * attenuation_db)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopbandViolation {
    pub frequency: f64,
    pub esd: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub energy_error: f64,
    pub papr_value: f64,
    pub papr_bound: f64,
    pub stopband_violations: Vec<StopbandViolation>,
    pub max_stopband_esd: Option<f64>,
    pub wpsl: f64,
    pub wpsl_db: f64,
}

impl FeasibilityReport {
    pub fn papr_ok(&self) -> bool {
        self.papr_value <= self.papr_bound * (1.0 + 1e-9)
    }

    /// Largest `esd - U_max` over the stopband, zero when satisfied.
    pub fn max_violation(&self) -> f64 {
        self.stopband_violations
            .iter()
            .map(|v| v.esd - v.u_max)
            .fold(0.0, f64::max)
    }
}

pub fn feasibility_report(
    x: &[Complex64],
    zone: &ZoneOfOperation,
    mask: &SpectralMask,
    papr_bound: f64,
) -> Result<FeasibilityReport> {
    let n = x.len();
    let w = wpsl(x, zone)?;
    let esds: Vec<(f64, f64)> = mask.bins().iter().map(|&f| (f, esd(x, f))).collect();
    let stopband_violations = esds
        .iter()
        .filter(|(_, e)| *e > mask.u_max())
        .map(|&(f, e)| StopbandViolation {
            frequency: f,
            esd: e,
            u_max: mask.u_max(),
        })
        .collect();
    Ok(FeasibilityReport {
        energy_error: (energy(x) - n as f64).abs(),
        papr_value: papr(x)?,
        papr_bound,
        stopband_violations,
        max_stopband_esd: esds.iter().map(|(_, e)| *e).reduce(f64::max),
        wpsl: w,
        wpsl_db: wpsl_db(w, n),
    })
}

/// Dense reference constructions. Only for tests and cross-checks: every
/// function materializes `N×N` matrices.
pub mod oracle {
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    /// `J_k(n, m) = 1` iff `n - m = k`.
    pub fn shift_matrix(n: usize, k: i64) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |r, c| {
            if r as i64 - c as i64 == k {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `Diag(p(f))`, `p(f)_m = exp(j2π m f)` for `m = 1..N`.
    pub fn doppler_diag(n: usize, f: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::from_polar(1.0, 2.0 * PI * f * (r + 1) as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn u_matrix(n: usize, k: i64, f: f64) -> DMatrix<Complex64> {
        shift_matrix(n, k) * doppler_diag(n, f)
    }

    /// `F = f f†` with `f = [1, e^{j2πf}, …, e^{j2πf(N-1)}]ᵀ`.
    pub fn dtft_matrix(n: usize, f: f64) -> DMatrix<Complex64> {
        let v = DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, 2.0 * PI * f * i as f64));
        &v * v.adjoint()
    }

    pub fn quad(m: &DMatrix<Complex64>, x: &[Complex64]) -> Complex64 {
        let v = DVector::from_column_slice(x);
        (v.adjoint() * m * &v)[(0, 0)]
    }

    pub fn af_value(x: &[Complex64], k: i64, f: f64) -> Complex64 {
        quad(&u_matrix(x.len(), k, f), x)
    }

    pub fn esd(x: &[Complex64], f: f64) -> f64 {
        quad(&dtft_matrix(x.len(), f), x).re
    }

    /// Column-major vectorization.
    pub fn vec_of(m: &DMatrix<Complex64>) -> DVector<Complex64> {
        DVector::from_column_slice(m.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{gen_chirp, gen_filtered_polyphase, gen_random_polyphase, Sequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(n: usize, rng: &mut ChaCha8Rng) -> Sequence {
        Sequence::normalized(
            (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mainlobe_is_energy() {
        let x = gen_random_polyphase(37, 2).unwrap();
        assert!((af_value(&x, 0, 0.0).unwrap() - Complex64::new(37.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_ones_lag_one() {
        let x = [Complex64::new(1.0, 0.0); 2];
        assert!((af_value(&x, 1, 0.0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((af_value(&x, -1, 0.0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn delay_out_of_range() {
        let x = [Complex64::new(1.0, 0.0); 4];
        assert!(matches!(af_value(&x, 4, 0.0), Err(Error::DelayOutOfRange { .. })));
        assert!(matches!(af_value(&x, -4, 0.0), Err(Error::DelayOutOfRange { .. })));
    }

    #[test]
    fn af_value_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_seq(8, &mut rng);
        for k in -2..=2 {
            for l in 0..7 {
                let f = -0.3 + 0.1 * l as f64;
                let a = af_value(&x, k, f).unwrap();
                let b = oracle::af_value(&x, k, f);
                assert!((a - b).norm() < 1e-10, "k={k} f={f}");
            }
        }
    }

    #[test]
    fn conjugate_symmetry_of_dense_and_streamed() {
        // A(-k, -f) = conj(A(k, f)) · exp(-j2π k f) for this phase convention.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [5usize, 11, 16] {
            let x = random_seq(n, &mut rng);
            for k in -3i64..=3 {
                for f in [-0.21, 0.0, 0.07, 0.33] {
                    let a = af_value(&x, k, f).unwrap();
                    let b = af_value(&x, -k, -f).unwrap();
                    let rot = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * f);
                    assert!((b - a.conj() * rot).norm() < 1e-10);
                    let d = oracle::af_value(&x, -k, -f);
                    assert!((d - b).norm() < 1e-10);
                    assert!((a.norm() - b.norm()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn grid_fft_and_direct_agree_with_pointwise() {
        let x = gen_chirp(16).unwrap();
        let zone = ZoneOfOperation::from_bins(3, -2.0, 2.0, 9, 16).unwrap();
        let direct = af_grid_with(&x, &zone, AfMethod::Direct).unwrap();
        let fft = af_grid_with(&x, &zone, AfMethod::Fft).unwrap();
        for k in -3..=3 {
            for (l, &f) in zone.doppler().iter().enumerate() {
                let p = af_value(&x, k, f).unwrap();
                assert!((direct.get(k, l) - p).norm() < 1e-12);
                assert!((fft.get(k, l) - p).norm() < 1e-10);
            }
        }
        assert!((direct.get(0, 4).re - 16.0).abs() < 1e-12);
    }

    #[test]
    fn fft_path_rejects_unaligned_grid() {
        let x = gen_chirp(8).unwrap();
        let zone = ZoneOfOperation::uniform(1, vec![0.0, 1.0 / PI]).unwrap();
        assert!(af_grid_with(&x, &zone, AfMethod::Fft).is_err());
        assert!(af_grid(&x, &zone).is_ok());
    }

    #[test]
    fn af_magnitude_bounded_by_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let zone = ZoneOfOperation::from_bins(4, -3.0, 3.0, 13, 12).unwrap();
        for _ in 0..100 {
            let x = random_seq(12, &mut rng);
            let g = af_grid(&x, &zone).unwrap();
            assert!(g.values.iter().flatten().all(|v| v.norm() <= 12.0 + 1e-9));
        }
    }

    #[test]
    fn wpsl_zero_weights() {
        let x = gen_chirp(16).unwrap();
        let zone = ZoneOfOperation::new(2, vec![0.0, 0.1], vec![0.0; 5]).unwrap();
        assert_eq!(wpsl(&x, &zone).unwrap(), 0.0);
    }

    #[test]
    fn wpsl_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_seq(8, &mut rng);
        let weights = vec![0.5, 1.0, 2.0, 1.0, 0.25];
        let doppler: Vec<f64> = (0..7).map(|l| -0.15 + 0.05 * l as f64).collect();
        let zone = ZoneOfOperation::new(2, doppler.clone(), weights.clone()).unwrap();
        let mut best: f64 = 0.0;
        for k in -2i64..=2 {
            for &f in &doppler {
                if k == 0 && f.abs() < 1e-12 {
                    continue;
                }
                best = best.max(weights[(k + 2) as usize] * oracle::af_value(&x, k, f).norm());
            }
        }
        assert!((wpsl(&x, &zone).unwrap() - best).abs() < 1e-10);
    }

    #[test]
    fn wpsl_phase_invariant() {
        let x = gen_random_polyphase(32, 5).unwrap();
        let rot: Vec<Complex64> = x.iter().map(|v| v * Complex64::from_polar(1.0, 1.234)).collect();
        let zone = ZoneOfOperation::from_bins(3, -2.0, 2.0, 11, 32).unwrap();
        assert!((wpsl(&x, &zone).unwrap() - wpsl(&rot, &zone).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn esd_examples() {
        let ones = [Complex64::new(1.0, 0.0); 6];
        assert!((esd(&ones, 0.0) - 36.0).abs() < 1e-12);
        let mut imp = [Complex64::new(0.0, 0.0); 6];
        imp[2] = Complex64::new(1.0, 0.0);
        for f in [0.0, 0.13, 0.5, 0.77] {
            assert!((esd(&imp, f) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn esd_matches_dense_oracle_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = random_seq(16, &mut rng);
        for _ in 0..10 {
            let f: f64 = rng.random();
            assert!((esd(&x, f) - oracle::esd(&x, f)).abs() < 1e-10);
        }
        for m in [32usize, 48, 2048] {
            let g = esd_grid(&x, m);
            let mean: f64 = g.iter().sum::<f64>() / m as f64;
            assert!((mean - 16.0).abs() < 1e-6);
            for q in [0usize, 5, m - 1] {
                assert!((g[q] - esd(&x, q as f64 / m as f64)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn u_max_values() {
        assert!((u_max(128, 20.0) - 1.28).abs() < 1e-12);
        assert_eq!(u_max(128, 0.0), 128.0);
        assert!((u_max(128, 10.0) - 12.8).abs() < 1e-12);
    }

    #[test]
    fn report_for_chirp() {
        let x = gen_chirp(128).unwrap();
        let zone = ZoneOfOperation::from_bins(5, -2.0, 2.0, 41, 128).unwrap();
        let mask = SpectralMask::from_intervals(&[(0.1, 0.2)], 50, 20.0, 128).unwrap();
        let r = feasibility_report(&x, &zone, &mask, 1.0).unwrap();
        assert!((r.papr_value - 1.0).abs() < 1e-12);
        assert!(r.energy_error <= 1e-9);
        assert!((r.wpsl_db - wpsl_db(r.wpsl, 128)).abs() < 1e-15);
    }

    #[test]
    fn esd_at_cap_is_feasible() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(2.0, 0.0);
        let zone = ZoneOfOperation::uniform(1, vec![0.0]).unwrap();
        let mask = SpectralMask::new(vec![0.1, 0.4, 0.7], 0.0, 4).unwrap();
        let r = feasibility_report(&x, &zone, &mask, 4.0 - 1e-9).unwrap();
        assert!(r.stopband_violations.is_empty());
        assert_eq!(r.max_stopband_esd, Some(4.0));
    }

    #[test]
    fn filtering_reduces_stopband_violations() {
        let mask = SpectralMask::from_intervals(&[(0.1, 0.2)], 50, 20.0, 128).unwrap();
        let zone = ZoneOfOperation::from_bins(5, -2.0, 2.0, 41, 128).unwrap();
        let raw = gen_random_polyphase(128, 3).unwrap();
        let filt = gen_filtered_polyphase(128, 3, &mask, 63).unwrap();
        let a = feasibility_report(&raw, &zone, &mask, 1.0).unwrap();
        let b = feasibility_report(&filt, &zone, &mask, 3.0).unwrap();
        assert!(b.stopband_violations.len() < a.stopband_violations.len());
        assert!(b.max_violation() < a.max_violation());
    }

    #[test]
    fn filtered_stopband_is_15db_down() {
        let mask = SpectralMask::from_intervals(&[(0.1, 0.2)], 50, 20.0, 128).unwrap();
        let y = gen_filtered_polyphase(128, 1, &mask, 63).unwrap();
        let m = 2048;
        let g = esd_grid(&y, m);
        let (mut stop, mut ns, mut pass, mut np) = (0.0, 0, 0.0, 0);
        for (q, e) in g.iter().enumerate() {
            let f = q as f64 / m as f64;
            if (0.1..=0.2).contains(&f) {
                stop += e;
                ns += 1;
            } else {
                pass += e;
                np += 1;
            }
        }
        let ratio_db = 10.0 * ((stop / ns as f64) / (pass / np as f64)).log10();
        assert!(ratio_db <= -15.0, "stopband only {ratio_db:.2} dB down");
    }
}

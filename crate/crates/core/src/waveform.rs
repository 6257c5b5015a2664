//! Domain types (sequence, zone of operation, spectral mask, optimizer
//! configuration) and the baseline sequence generators.
//!
//! Sequences are written `x₁..x_N` in formulas but stored 0-indexed.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the energy constraint `x†x = N`.
pub const ENERGY_TOL: f64 = 1e-9;

/// Doppler values closer to zero than this are treated as the origin.
pub const ORIGIN_TOL: f64 = 1e-12;

/// A length-`N` complex sequence with energy `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence(Vec<Complex64>);

impl Sequence {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        check_finite(&values)?;
        let n = values.len();
        let e = energy(&values);
        if (e - n as f64).abs() > ENERGY_TOL * n as f64 {
            return Err(Error::invalid(format!(
                "sequence energy {e} differs from length {n}"
            )));
        }
        Ok(Self(values))
    }

    /// Rescales `values` to energy `N`.
    pub fn normalized(mut values: Vec<Complex64>) -> Result<Self> {
        check_finite(&values)?;
        let n = values.len();
        let e = energy(&values);
        if e <= 0.0 {
            return Err(Error::Degenerate("cannot normalize a zero sequence".into()));
        }
        let scale = (n as f64 / e).sqrt();
        values.iter_mut().for_each(|v| *v *= scale);
        Ok(Self(values))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn energy(&self) -> f64 {
        energy(&self.0)
    }

    /// Multiplies by `exp(-j arg(x_i))` for the first nonzero `x_i`, so
    /// that entry becomes real and non-negative.
    pub fn with_canonical_phase(mut self) -> Self {
        if let Some(first) = self.0.iter().find(|v| v.norm() > 0.0).copied() {
            let rot = Complex64::from_polar(1.0, -first.arg());
            self.0.iter_mut().for_each(|v| *v *= rot);
        }
        self
    }
}

impl Deref for Sequence {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("sequence must be non-empty"));
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("sequence entry".into()));
    }
    Ok(())
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `count` equally spaced points on `[lo, hi]`, symmetric in rounding so
/// that a symmetric interval hits zero exactly.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let d = (count - 1) as f64;
            (0..count)
                .map(|i| lo * ((count - 1 - i) as f64 / d) + hi * (i as f64 / d))
                .collect()
        }
    }
}

/// One `(k, f_l)` cell of the zone, with its delay weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneCell {
    pub delay: i64,
    pub doppler_index: usize,
    pub doppler: f64,
    pub weight: f64,
}

/// Delay-Doppler region Γ over which sidelobes are shaped.
///
/// Doppler values are in cycles per sample. The origin `(0, 0)` is always
/// excluded from Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneOfOperation {
    max_delay: usize,
    doppler: Vec<f64>,
    /// `weights[k + r]` is `w_k`.
    weights: Vec<f64>,
}

impl ZoneOfOperation {
    pub fn new(max_delay: usize, doppler: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if doppler.is_empty() {
            return Err(Error::invalid("zone needs at least one Doppler value"));
        }
        if doppler.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite("Doppler value".into()));
        }
        if doppler.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("Doppler grid must be strictly increasing"));
        }
        if doppler.len() > 2 {
            let step = doppler[1] - doppler[0];
            if doppler
                .windows(2)
                .any(|w| ((w[1] - w[0]) - step).abs() > 1e-12)
            {
                return Err(Error::invalid("Doppler grid must be uniformly spaced"));
            }
        }
        if weights.len() != 2 * max_delay + 1 {
            return Err(Error::invalid(format!(
                "expected {} delay weights, got {}",
                2 * max_delay + 1,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("delay weights must be finite and non-negative"));
        }
        let zone = Self {
            max_delay,
            doppler,
            weights,
        };
        if zone.cells().is_empty() {
            return Err(Error::invalid(
                "zone is empty once the origin (0, 0) is excluded",
            ));
        }
        Ok(zone)
    }

    /// Unit weights on every delay bin.
    pub fn uniform(max_delay: usize, doppler: Vec<f64>) -> Result<Self> {
        Self::new(max_delay, doppler, vec![1.0; 2 * max_delay + 1])
    }

    /// Doppler grid given in bins `ν`, converted with `f = ν / N`.
    pub fn from_bins(max_delay: usize, lo_bins: f64, hi_bins: f64, count: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sequence length must be positive"));
        }
        let doppler = linspace(lo_bins, hi_bins, count)
            .into_iter()
            .map(|nu| nu / n as f64)
            .collect();
        Self::uniform(max_delay, doppler)
    }

    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    pub fn doppler(&self) -> &[f64] {
        &self.doppler
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, delay: i64) -> f64 {
        self.weights[(delay + self.max_delay as i64) as usize]
    }

    pub fn delays(&self) -> impl Iterator<Item = i64> {
        let r = self.max_delay as i64;
        -r..=r
    }

    pub fn is_origin(&self, delay: i64, doppler_index: usize) -> bool {
        delay == 0 && self.doppler[doppler_index].abs() <= ORIGIN_TOL
    }

    /// Every cell of Γ, delay-major.
    pub fn cells(&self) -> Vec<ZoneCell> {
        let mut out = Vec::with_capacity((2 * self.max_delay + 1) * self.doppler.len());
        for k in self.delays() {
            for (l, &f) in self.doppler.iter().enumerate() {
                if !self.is_origin(k, l) {
                    out.push(ZoneCell {
                        delay: k,
                        doppler_index: l,
                        doppler: f,
                        weight: self.weight(k),
                    });
                }
            }
        }
        out
    }

    /// Checks that every delay is representable for length `n`.
    pub fn check_length(&self, n: usize) -> Result<()> {
        if self.max_delay >= n {
            return Err(Error::DelayOutOfRange {
                delay: self.max_delay as i64,
                len: n,
            });
        }
        Ok(())
    }
}

/// Stopband frequencies `f_s` and the ESD cap `U_max = N·10^(-A/10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMask {
    intervals: Vec<(f64, f64)>,
    bins: Vec<f64>,
    attenuation_db: f64,
    u_max: f64,
}

impl SpectralMask {
    pub fn new(bins: Vec<f64>, attenuation_db: f64, n: usize) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidMask("at least one stopband bin is required".into()));
        }
        let lo = bins.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = bins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::build(vec![(lo, hi)], bins, attenuation_db, n)
    }

    /// Spreads `n_f` bins across the intervals in proportion to their width
    /// (at least one per interval), equally spaced within each interval.
    pub fn from_intervals(intervals: &[(f64, f64)], n_f: usize, attenuation_db: f64, n: usize) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidMask("no stopband interval given".into()));
        }
        if n_f < intervals.len() {
            return Err(Error::InvalidMask(format!(
                "{n_f} bins cannot cover {} intervals",
                intervals.len()
            )));
        }
        for &(lo, hi) in intervals {
            check_interval(lo, hi)?;
        }
        let total: f64 = intervals.iter().map(|(lo, hi)| hi - lo).sum();
        let mut counts: Vec<usize> = intervals
            .iter()
            .map(|(lo, hi)| {
                if total > 0.0 {
                    (((hi - lo) / total) * n_f as f64).floor().max(1.0) as usize
                } else {
                    1
                }
            })
            .collect();
        // Hand the remainder to the widest intervals first.
        let mut assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..intervals.len()).collect();
        order.sort_by(|&a, &b| {
            let wa = intervals[a].1 - intervals[a].0;
            let wb = intervals[b].1 - intervals[b].0;
            wb.total_cmp(&wa)
        });
        let mut idx = 0;
        while assigned < n_f {
            counts[order[idx % order.len()]] += 1;
            assigned += 1;
            idx += 1;
        }
        while assigned > n_f {
            let i = order.iter().copied().rev().find(|&i| counts[i] > 1).expect("n_f >= intervals");
            counts[i] -= 1;
            assigned -= 1;
        }
        let bins = intervals
            .iter()
            .zip(&counts)
            .flat_map(|(&(lo, hi), &c)| linspace(lo, hi, c))
            .collect();
        Self::build(intervals.to_vec(), bins, attenuation_db, n)
    }

    /// A mask with no stopband bins.
    pub fn none(n: usize) -> Self {
        Self {
            intervals: Vec::new(),
            bins: Vec::new(),
            attenuation_db: 0.0,
            u_max: n as f64,
        }
    }

    fn build(intervals: Vec<(f64, f64)>, bins: Vec<f64>, attenuation_db: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sequence length must be positive"));
        }
        if !attenuation_db.is_finite() || attenuation_db < 0.0 {
            return Err(Error::InvalidMask(format!(
                "attenuation must be a non-negative number of dB, got {attenuation_db}"
            )));
        }
        for &f in &bins {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidMask(format!("stopband frequency {f} outside [0, 1)")));
            }
        }
        let mut sorted = bins.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidMask("stopband frequencies must be distinct".into()));
        }
        let u_max = crate::ambiguity::u_max(n, attenuation_db);
        Ok(Self {
            intervals,
            bins,
            attenuation_db,
            u_max,
        })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn attenuation_db(&self) -> f64 {
        self.attenuation_db
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi >= 1.0 || hi < lo {
        return Err(Error::InvalidMask(format!(
            "stopband [{lo}, {hi}] must lie within [0, 1)"
        )));
    }
    Ok(())
}

/// Optimizer settings shared by both design algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// Maximum PAPR γ, in `[1, N)`.
    pub papr_bound: f64,
    /// Order `p` of the ℓp sidelobe surrogate; even, at least 2.
    pub p: u32,
    /// Coupling-penalty weight η of the alternating SDR subproblems.
    pub eta: f64,
    /// Augmented-Lagrangian step ρ.
    pub rho: f64,
    /// Rank-one gap tolerance of the alternating SDR loop.
    pub eps_x: f64,
    /// Largest accepted `σ₁/σ₀` at rank-one extraction.
    pub eps_r: f64,
    /// Relative merit change that ends an inner (SQUAREM) loop.
    pub inner_tol: f64,
    /// Relative WPSL change that, with feasibility, ends the outer loop.
    pub outer_tol: f64,
    /// Stopband violation, relative to `U_max`, treated as satisfied.
    pub feas_tol: f64,
    /// Relative stopband slack allowed when picking the returned iterate.
    pub select_slack: f64,
    pub t_max: usize,
    pub inner_max: usize,
    pub outer_max: usize,
    pub seed: u64,
    /// Rescale sidelobe and stopband terms to unit size inside the
    /// augmented Lagrangian (see `alamm::Scaling`).
    pub normalize: bool,
    /// When false, wall-clock columns in traces are written as zero so
    /// repeated runs are byte-identical.
    pub record_timing: bool,
    pub backend_tol: f64,
    pub backend_max_iters: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            papr_bound: 1.0,
            p: 22,
            eta: 0.6,
            rho: 1.0,
            eps_x: 1e-3,
            eps_r: 1e-2,
            inner_tol: 1e-6,
            outer_tol: 1e-5,
            feas_tol: 1e-3,
            select_slack: 1e-2,
            t_max: 50,
            inner_max: 100,
            outer_max: 200,
            seed: 1,
            normalize: true,
            record_timing: true,
            backend_tol: 1e-6,
            backend_max_iters: 20_000,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.papr_bound >= 1.0 && self.papr_bound < n as f64) {
            return bad(format!("papr_bound {} outside [1, {n})", self.papr_bound));
        }
        if self.p < 2 || self.p % 2 != 0 {
            return bad(format!("p must be an even integer >= 2, got {}", self.p));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        for (name, v) in [
            ("eps_x", self.eps_x),
            ("eps_r", self.eps_r),
            ("backend_tol", self.backend_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("feas_tol", self.feas_tol),
            ("select_slack", self.select_slack),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("t_max", self.t_max),
            ("inner_max", self.inner_max),
            ("outer_max", self.outer_max),
            ("backend_max_iters", self.backend_max_iters),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Linear-FM chirp `x_n = exp(jπ(n-1)²/N)`, `n = 1..N`.
pub fn gen_chirp(n: usize) -> Result<Sequence> {
    if n < 2 {
        return Err(Error::invalid("chirp length must be at least 2"));
    }
    let values = (0..n)
        .map(|i| {
            // (i² mod 2N) keeps the phase argument small for long sequences.
            let q = ((i as u128 * i as u128) % (2 * n as u128)) as f64;
            Complex64::from_polar(1.0, PI * q / n as f64)
        })
        .collect();
    Sequence::new(values)
}

/// Unimodular sequence with i.i.d. uniform phases from a seeded ChaCha8
/// stream.
pub fn gen_random_polyphase(n: usize, seed: u64) -> Result<Sequence> {
    if n == 0 {
        return Err(Error::invalid("sequence length must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()))
        .collect();
    Sequence::new(values)
}

/// Band-stop FIR taps for the mask, centred at `(taps - 1) / 2`.
///
/// Each stopband interval is widened by half the Hamming transition width
/// on both sides and rejected with gain `10^(-A/20)`. `A = 0` yields the
/// unit impulse.
pub fn bandstop_taps(mask: &SpectralMask, taps: usize) -> Result<Vec<Complex64>> {
    if taps == 0 || taps % 2 == 0 {
        return Err(Error::invalid(format!("filter length must be odd, got {taps}")));
    }
    for &(lo, hi) in mask.intervals() {
        check_interval(lo, hi)?;
    }
    let centre = (taps - 1) / 2;
    let mut h = vec![Complex64::new(0.0, 0.0); taps];
    h[centre] = Complex64::new(1.0, 0.0);
    let reject = 1.0 - 10f64.powf(-mask.attenuation_db() / 20.0);
    if reject == 0.0 {
        return Ok(h);
    }
    let half_transition = 1.65 / taps as f64;
    let window: Vec<f64> = (0..taps)
        .map(|i| {
            if taps == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos()
            }
        })
        .collect();
    for &(lo, hi) in mask.intervals() {
        let (lo, hi) = (lo - half_transition, hi + half_transition);
        let width = (hi - lo).min(1.0);
        let centre_f = 0.5 * (lo + hi);
        let proto: Vec<f64> = (0..taps)
            .map(|i| {
                let t = i as f64 - centre as f64;
                width * sinc(width * t) * window[i]
            })
            .collect();
        // Unit gain at the band centre.
        let gain: f64 = proto.iter().sum();
        for (i, c) in proto.iter().enumerate() {
            let t = i as f64 - centre as f64;
            h[i] -= Complex64::from_polar(reject * c / gain, 2.0 * PI * centre_f * t);
        }
    }
    Ok(h)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Random polyphase sequence passed through [`bandstop_taps`] by circular
/// convolution, then rescaled to energy `N`.
pub fn gen_filtered_polyphase(n: usize, seed: u64, mask: &SpectralMask, taps: usize) -> Result<Sequence> {
    if taps >= n {
        return Err(Error::invalid(format!("filter length {taps} must be below N = {n}")));
    }
    let h = bandstop_taps(mask, taps)?;
    let x = gen_random_polyphase(n, seed)?;
    let centre = (taps - 1) / 2;
    let y: Vec<Complex64> = (0..n)
        .map(|i| {
            h.iter()
                .enumerate()
                .map(|(j, hj)| {
                    // y[i] = Σ_t h_t x[i - t], t = j - centre.
                    let idx = (i + n + centre - j) % n;
                    hj * x[idx]
                })
                .sum()
        })
        .collect();
    Sequence::normalized(y)
}

/// `max_n |x_n|² / (Σ|x_n|²/N)`.
pub fn papr(x: &[Complex64]) -> Result<f64> {
    let e = energy(x);
    if x.is_empty() || e <= 0.0 {
        return Err(Error::Degenerate("PAPR of a zero sequence is undefined".into()));
    }
    let peak = x.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    Ok(peak / (e / x.len() as f64))
}

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::majorizer_ab;
use super::*;
use crate::ambiguity::{af_value, esd, oracle, wpsl};
use crate::numerics::{eig_hermitian, lambda_max, HermitianMatrix};
use crate::waveform::{gen_random_polyphase, linspace, DesignConfig, Sequence, SpectralMask, ZoneOfOperation};

fn zone(r: usize, lo: f64, hi: f64, count: usize, n: usize) -> ZoneOfOperation {
    ZoneOfOperation::from_bins(r, lo, hi, count, n).unwrap()
}

fn random_lambda(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

/// A random sequence with PAPR above one, energy `N`.
fn random_sequence(n: usize, rng: &mut ChaCha8Rng) -> Sequence {
    let v = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    Sequence::normalized(v).unwrap()
}

fn weighted_zone(n: usize, rng: &mut ChaCha8Rng) -> ZoneOfOperation {
    let r = 2;
    let doppler = linspace(-1.5 / n as f64, 1.5 / n as f64, 4);
    let weights = (0..=2 * r).map(|_| 0.5 + rng.random::<f64>()).collect();
    ZoneOfOperation::new(r, doppler, weights).unwrap()
}

#[test]
fn p2_coefficients_collapse() {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_sequence(n, &mut rng);
    let z = zone(3, -1.0, 1.0, 5, n);
    let mask = SpectralMask::from_intervals(&[(0.1, 0.2)], 4, 10.0, n).unwrap();
    let lam = random_lambda(4, &mut rng);
    let c = compute_coefficients(&x, &z, &mask, &lam, 2).unwrap();
    for (a, b) in c.a.iter().zip(&c.b) {
        assert!((a - 1.0).abs() < 1e-12, "a = {a}");
        assert!(b.abs() < 1e-9, "b = {b}");
    }
}

#[test]
fn p3_direct_substitution() {
    let (a, b) = majorizer_ab(1.0, 2.0, 3);
    assert!((a - 4.0).abs() < 1e-14);
    assert!((b + 5.0).abs() < 1e-14);
}

#[test]
fn difference_quotient_matches_closed_form() {
    for p in [2u32, 4, 8, 22] {
        for (m, z) in [(0.3f64, 1.0f64), (0.0, 2.0), (0.9, 1.1), (1.7, 3.2)] {
            let pf = p as f64;
            let quotient = (z.powi(p as i32) - m.powi(p as i32) - pf * m.powi(p as i32 - 1) * (z - m)) / ((z - m) * (z - m));
            let (a, _) = majorizer_ab(m, z, p);
            assert!((a - quotient).abs() <= 1e-9 * quotient.abs().max(1.0), "p={p} m={m}");
        }
    }
}

#[test]
fn touching_limit_is_half_second_derivative() {
    for p in [3u32, 8, 22] {
        let z: f64 = 1.3;
        let pf = p as f64;
        let limit = pf * (pf - 1.0) * z.powi(p as i32 - 2) / 2.0;
        let (a_touch, _) = majorizer_ab(z, z, p);
        let (a_near, _) = majorizer_ab(z - 1e-13, z, p);
        assert!((a_touch - limit).abs() <= 1e-12 * limit);
        assert!((a_near - limit).abs() <= 1e-9 * limit);
        // Second-order expansion of t ↦ t^p around z.
        let h = 1e-4;
        let f = |t: f64| t.powi(p as i32);
        let second = (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h);
        assert!((second / 2.0 - limit).abs() <= 1e-5 * limit);
    }
}

#[test]
fn z_dominates_every_sidelobe() {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_sequence(n, &mut rng);
    let z = zone(2, -1.0, 1.0, 3, n);
    let c = compute_coefficients(&x, &z, &SpectralMask::none(n), &[], 22).unwrap();
    for (cell, v) in z.cells().iter().zip(&c.af) {
        let direct = af_value(&x, cell.delay, cell.doppler).unwrap();
        assert!((direct - v).norm() < 1e-10);
        assert!(c.z >= v.norm());
    }
    assert!(c.a.iter().all(|&a| a >= 0.0));
}

#[test]
fn overflow_is_reported() {
    let n = 64;
    let x = gen_random_polyphase(n, 1).unwrap();
    let z = zone(3, -1.0, 1.0, 3, n);
    let err = compute_coefficients(&x, &z, &SpectralMask::none(n), &[], 400).unwrap_err();
    assert!(matches!(err, crate::Error::NumericalOverflow(_)));
}

fn unit_coefficients(zone: &ZoneOfOperation, a: f64) -> MajorizerCoefficients {
    let cells = zone.cells().len();
    MajorizerCoefficients {
        a: vec![a; cells],
        b: vec![0.0; cells],
        z: 1.0,
        af: vec![Complex64::new(0.0, 0.0); cells],
        p: 2,
        scaling: Scaling::IDENTITY,
    }
}

#[test]
fn lambda_max_lambda_unit_weights() {
    let n = 128;
    let z = zone(5, -2.0, 2.0, 5, n);
    let c = unit_coefficients(&z, 1.0);
    for l in 0..5 {
        // k = 0 is absent only at the zero-Doppler index.
        let expect = if l == 2 { 127.0 } else { 128.0 };
        assert_eq!(lambda_max_lambda(&c, &z, n, l), expect);
    }
    let z = ZoneOfOperation::new(5, vec![0.01], vec![1.0; 11]).unwrap();
    assert_eq!(lambda_max_lambda(&unit_coefficients(&z, 1.0), &z, n, 0), 128.0);
}

#[test]
fn lambda_max_lambda_zero_weights() {
    let n = 32;
    let z = ZoneOfOperation::new(3, vec![-0.01, 0.0, 0.01], vec![0.0; 7]).unwrap();
    let c = unit_coefficients(&z, 2.5);
    for l in 0..3 {
        assert_eq!(lambda_max_lambda(&c, &z, n, l), 0.0);
    }
}

#[test]
fn lambda_max_lambda_matches_lifted_eigenvalue() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..5 {
        let z = weighted_zone(n, &mut rng);
        let cells = z.cells();
        let mut c = unit_coefficients(&z, 0.0);
        c.a = (0..cells.len()).map(|_| 3.0 * rng.random::<f64>()).collect();
        for l in 0..z.doppler().len() {
            let mut big = DMatrix::<Complex64>::zeros(n * n, n * n);
            for (cell, a) in cells.iter().zip(&c.a).filter(|(cell, _)| cell.doppler_index == l) {
                let v = oracle::vec_of(&oracle::u_matrix(n, cell.delay, cell.doppler));
                big += &v * v.adjoint() * Complex64::new(cell.weight * a, 0.0);
            }
            let dense = lambda_max(&HermitianMatrix::hermitian_part(&big)).unwrap();
            let closed = lambda_max_lambda(&c, &z, n, l);
            assert!((dense - closed).abs() < 1e-8, "trial {trial} l {l}: {dense} vs {closed}");
        }
    }
}

fn lifted_l(n: usize, bins: &[f64]) -> f64 {
    let mut big = DMatrix::<Complex64>::zeros(n * n, n * n);
    for &f in bins {
        let v = oracle::vec_of(&oracle::dtft_matrix(n, f));
        big += &v * v.adjoint();
    }
    lambda_max(&HermitianMatrix::hermitian_part(&big)).unwrap()
}

#[test]
fn lambda_max_l_values() {
    assert_eq!(lambda_max_l(128), 16384.0);
    assert_eq!(lambda_max_l(1), 1.0);
    let bins = [0.25, 0.5, 0.75];
    assert!((lifted_l(4, &bins) - 16.0).abs() < 1e-8);
    assert!((lambda_max_l_exact(&bins, 4).unwrap() - 16.0).abs() < 1e-8);
}

#[test]
fn exact_lambda_l_matches_lifted_for_dense_bins() {
    let n = 6;
    let bins = linspace(0.1, 0.2, 4);
    let dense = lifted_l(n, &bins);
    let exact = lambda_max_l_exact(&bins, n).unwrap();
    assert!((dense - exact).abs() < 1e-8 * dense);
    assert!(exact > lambda_max_l(n));
}

fn random_instance(n: usize, seed: u64) -> (Sequence, ZoneOfOperation, SpectralMask, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_sequence(n, &mut rng);
    let z = weighted_zone(n, &mut rng);
    let mask = SpectralMask::from_intervals(&[(0.1, 0.25)], 5, 6.0, n).unwrap();
    let lam = random_lambda(5, &mut rng);
    (x, z, mask, lam, 0.5 + rng.random::<f64>())
}

#[test]
fn empty_problem_phi_is_zero() {
    let n = 6;
    let x = gen_random_polyphase(n, 2).unwrap();
    let z = ZoneOfOperation::new(1, vec![0.0, 0.1], vec![0.0; 3]).unwrap();
    let mask = SpectralMask::none(n);
    let c = unit_coefficients(&z, 0.0);
    let phi = build_phi(&x, &c, &z, &mask, &[], 1.0).unwrap();
    assert!(phi.frobenius_norm() == 0.0);
    let c = compute_coefficients(&x, &z, &mask, &[], 4).unwrap();
    assert_eq!(compute_mu(&x, &c, &z, &mask, &[], 1.0).unwrap(), 0.0);
}

#[test]
fn mu_formula_collapse_at_p2() {
    let n = 10;
    let x = gen_random_polyphase(n, 5).unwrap();
    let z = zone(2, -1.0, 1.0, 3, n);
    let mask = SpectralMask::new(vec![0.3], 10.0, n).unwrap();
    let rho = 1.7;
    let c = compute_coefficients(&x, &z, &mask, &[0.0], 2).unwrap();
    let sum_abs: f64 = z
        .cells()
        .iter()
        .map(|cell| af_value(&x, cell.delay, cell.doppler).unwrap().norm())
        .sum();
    let expect = 2.0 * n as f64 * sum_abs + rho * n as f64 * esd(&x, 0.3);
    let mu = compute_mu(&x, &c, &z, &mask, &[0.0], rho).unwrap();
    assert!((mu - expect).abs() < 1e-9 * expect);
}

#[test]
fn phi_is_hermitian_and_bounded_by_mu() {
    let n = 16;
    for seed in 0..6 {
        let p = [2u32, 4, 8][seed as usize % 3];
        let (x, z, mask, lam, rho) = random_instance(n, 100 + seed);
        let model = Model::new(&z, &mask, n).unwrap();
        let eval = model.evaluate(&x);
        for scaling in [Scaling::IDENTITY, model.scaling_at(&eval, p)] {
            let c = model.coefficients(&eval, &lam, p, scaling).unwrap();
            let raw = model.build_phi_unsymmetrized(&x, &c, &eval, &lam, rho);
            let size = raw.iter().map(|v| v.norm()).fold(1.0, f64::max);
            assert!((&raw - raw.adjoint()).iter().all(|d| d.norm() <= 1e-10 * size));
            let phi = model.build_phi(&x, &c, &eval, &lam, rho);
            let mu = model.mu(&c, &eval, &lam, rho);
            let eig = eig_hermitian(&phi).unwrap();
            assert!(eig.values[0] <= mu + 1e-8 * mu.max(1.0), "seed {seed}");
            let shifted = HermitianMatrix::identity(n).into_inner() * Complex64::new(mu, 0.0) - phi.as_matrix();
            let low = eig_hermitian(&HermitianMatrix::hermitian_part(&shifted)).unwrap().values[n - 1];
            assert!(low >= -1e-8 * mu, "seed {seed}: {low}");
        }
    }
}

#[test]
fn fast_product_matches_dense_phi() {
    let n = 12;
    for seed in 0..4 {
        let p = [2u32, 6, 22, 8][seed as usize];
        let (x, z, mask, lam, rho) = random_instance(n, 200 + seed);
        let model = Model::new(&z, &mask, n).unwrap();
        let eval = model.evaluate(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_sequence(n, &mut rng);
        for scaling in [Scaling::IDENTITY, model.scaling_at(&eval, p)] {
            let c = model.coefficients(&eval, &lam, p, scaling).unwrap();
            let dense = model.build_phi(&x, &c, &eval, &lam, rho).mul_vec(&y);
            let fast = model.phi_times(&x, &c, &eval, &lam, rho, &y);
            let scale = dense.iter().map(|v| v.norm()).fold(1e-300, f64::max);
            for (a, b) in dense.iter().zip(&fast) {
                assert!((a - b).norm() <= 1e-9 * scale, "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn majorizer_gradient_touches_merit() {
    let n = 14;
    for seed in 0..4 {
        let p = [2u32, 4, 8, 22][seed as usize];
        let (x, z, mask, lam, rho) = random_instance(n, 300 + seed);
        let model = Model::new(&z, &mask, n).unwrap();
        let eval = model.evaluate(&x);
        let scaling = model.scaling_at(&eval, p);
        let c = model.coefficients(&eval, &lam, p, scaling).unwrap();
        let g = model.phi_times(&x, &c, &eval, &lam, rho, &x);

        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        for _ in 0..3 {
            // Tangent direction: Re(x†d) = 0.
            let raw: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let xd: Complex64 = x.iter().zip(&raw).map(|(a, b)| a.conj() * b).sum();
            let d: Vec<Complex64> = raw.iter().zip(x.iter()).map(|(r, xi)| r - xi * (xd.re / n as f64)).collect();
            let w = |t: f64| {
                let y: Vec<Complex64> = x.iter().zip(&d).map(|(a, b)| a + b * t).collect();
                model.merit(&model.evaluate(&y), &lam, rho, p, scaling)
            };
            let h = 1e-6;
            let fd = (w(h) - w(-h)) / (2.0 * h);
            let analytic: f64 = 2.0 * d.iter().zip(&g).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
            assert!(
                (fd - analytic).abs() <= 1e-5 * analytic.abs().max(fd.abs()).max(1e-8),
                "p={p}: fd {fd} vs {analytic}"
            );
        }
    }
}

#[test]
fn multiplier_updates() {
    let mut lam = vec![0.3];
    update_multipliers(&mut lam, &[1.28], 1.28, 1.0, Scaling::IDENTITY);
    assert_eq!(lam, vec![0.3]);
    let mut lam = vec![0.0];
    update_multipliers(&mut lam, &[1.5], 1.28, 2.0, Scaling::IDENTITY);
    assert!((lam[0] - 0.44).abs() < 1e-12);
    let mut lam = vec![0.1];
    update_multipliers(&mut lam, &[0.78], 1.28, 1.0, Scaling::IDENTITY);
    assert_eq!(lam, vec![0.0]);
}

fn params(p: u32) -> StepParams {
    StepParams {
        rho: 1.0,
        p,
        gamma: 1.0,
    }
}

#[test]
fn fixed_point_is_unchanged() {
    let n = 8;
    let x = gen_random_polyphase(n, 4).unwrap();
    let z = ZoneOfOperation::new(2, vec![-0.05, 0.0, 0.05], vec![0.0; 5]).unwrap();
    let model = Model::new(&z, &SpectralMask::none(n), n).unwrap();
    let state = ALState::new(&model, x.clone(), 8, true);
    let out = squarem_step(&model, &state, params(8)).unwrap();
    assert_eq!(out.x, x);
    assert_eq!(out.merit_after, out.merit_before);
}

#[test]
fn squarem_is_monotone() {
    let n = 16;
    let x = gen_random_polyphase(n, 11).unwrap();
    let z = zone(2, -1.0, 1.0, 5, n);
    let mask = SpectralMask::from_intervals(&[(0.1, 0.2)], 4, 10.0, n).unwrap();
    let model = Model::new(&z, &mask, n).unwrap();
    let mut state = ALState::new(&model, x, 8, true);
    state.lambda = vec![0.2; 4];
    for _ in 0..50 {
        let out = squarem_step(&model, &state, params(8)).unwrap();
        assert!(out.merit_after <= out.merit_before);
        if let StepKind::Accelerated { halvings } = out.kind {
            assert!(halvings <= MAX_HALVINGS);
        }
        state.eval = out.eval;
        state.x = out.x;
        assert!((state.x.energy() - n as f64).abs() < 1e-9 * n as f64);
        assert!(state.x.iter().all(|v| (v.norm() - 1.0).abs() < 1e-9));
    }
}

#[test]
fn zero_weights_return_initial_sequence() {
    let n = 10;
    let x = gen_random_polyphase(n, 9).unwrap();
    let z = ZoneOfOperation::new(2, vec![-0.1, 0.0, 0.1], vec![0.0; 5]).unwrap();
    let out = alamm_solve(&x, &z, &SpectralMask::none(n), &DesignConfig::default()).unwrap();
    assert_eq!(out.sequence, x);
    assert_eq!(out.status, AlammStatus::Converged);
}

#[test]
fn infeasible_start_is_rejected() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_sequence(n, &mut rng);
    let z = zone(1, -1.0, 1.0, 3, n);
    assert!(alamm_solve(&x, &z, &SpectralMask::none(n), &DesignConfig::default()).is_err());
}

#[test]
fn solver_lowers_wpsl_at_n32() {
    let n = 32;
    let x = gen_random_polyphase(n, 1).unwrap();
    let z = zone(3, -1.0, 1.0, 9, n);
    let config = DesignConfig {
        p: 8,
        outer_max: 20,
        record_timing: false,
        ..DesignConfig::default()
    };
    let out = alamm_solve(&x, &z, &SpectralMask::none(n), &config).unwrap();
    let before = wpsl(&x, &z).unwrap();
    let after = wpsl(&out.sequence, &z).unwrap();
    assert!(after <= before, "{after} > {before}");
    for w in out.trace.windows(2) {
        if w[1].outer == w[0].outer || w[1].iter > 0 {
            assert!(w[1].merit <= w[1].merit_before);
        }
    }
}

#[test]
fn papr_relaxation_keeps_bound() {
    let n = 24;
    let x = gen_random_polyphase(n, 6).unwrap();
    let z = zone(2, -1.0, 1.0, 5, n);
    let config = DesignConfig {
        p: 8,
        papr_bound: 2.0,
        outer_max: 5,
        ..DesignConfig::default()
    };
    let out = alamm_solve(&x, &z, &SpectralMask::none(n), &config).unwrap();
    assert!((out.sequence.energy() - n as f64).abs() < 1e-9 * n as f64);
    assert!(out.sequence.iter().all(|v| v.norm_sqr() <= 2.0 * (1.0 + 1e-9)));
    assert!(out.trace.iter().all(|r| r.papr <= 2.0 * (1.0 + 1e-9)));
}

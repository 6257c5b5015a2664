//! End-to-end runs through the public API.

use dopseq::alamm::{alamm_solve, AlammStatus};
use dopseq::ambiguity::{feasibility_report, wpsl};
use dopseq::amsdr::{am_solve, AmStatus};
use dopseq::io::{parse_sequence_csv, sequence_to_csv};
use dopseq::waveform::{gen_chirp, gen_random_polyphase, papr};
use dopseq::{DesignConfig, Sequence, SpectralMask, ZoneOfOperation};

fn quick_config(papr_bound: f64) -> DesignConfig {
    DesignConfig {
        papr_bound,
        p: 8,
        inner_max: 40,
        outer_max: 15,
        record_timing: false,
        ..DesignConfig::default()
    }
}

#[test]
fn alamm_improves_on_its_start_and_keeps_constraints() {
    let n = 48;
    let zone = ZoneOfOperation::from_bins(4, -1.0, 1.0, 5, n).unwrap();
    let mask = SpectralMask::from_intervals(&[(0.3, 0.4)], 16, 6.0, n).unwrap();
    for gamma in [1.0, 2.0] {
        let cfg = quick_config(gamma);
        let x0 = gen_random_polyphase(n, 9).unwrap();
        let out = alamm_solve(&x0, &zone, &mask, &cfg).unwrap();
        assert!(!matches!(out.status, AlammStatus::Aborted(_)), "{:?}", out.status);
        let x = &out.sequence;
        assert!(wpsl(x, &zone).unwrap() < wpsl(&x0, &zone).unwrap());
        let report = feasibility_report(x, &zone, &mask, gamma).unwrap();
        assert!(report.energy_error <= 1e-9 * n as f64);
        assert!(papr(x).unwrap() <= gamma * (1.0 + 1e-9));
        assert!(report.max_stopband_esd.unwrap() <= mask.u_max() * (1.0 + cfg.select_slack) + 1e-9);
    }
}

#[test]
fn am_and_alamm_agree_on_feasibility() {
    let n = 8;
    let zone = ZoneOfOperation::from_bins(2, -2.0, 2.0, 5, n).unwrap();
    let mask = SpectralMask::none(n);
    let cfg = DesignConfig {
        record_timing: false,
        ..DesignConfig::default()
    };
    let x0 = gen_random_polyphase(n, 2).unwrap();
    let am = am_solve(&x0, &zone, &mask, &cfg).unwrap();
    assert_eq!(am.status, AmStatus::Converged);
    let xa = am.sequence.unwrap();
    let xl = alamm_solve(&x0, &zone, &mask, &cfg).unwrap().sequence;
    for x in [&xa, &xl] {
        assert!((papr(x).unwrap() - 1.0).abs() < 1e-9);
        assert!(wpsl(x, &zone).unwrap() <= wpsl(&x0, &zone).unwrap());
    }
}

#[test]
fn designed_sequence_survives_csv() {
    let n = 16;
    let zone = ZoneOfOperation::from_bins(2, -1.0, 1.0, 3, n).unwrap();
    let x = alamm_solve(&gen_chirp(n).unwrap(), &zone, &SpectralMask::none(n), &quick_config(1.0))
        .unwrap()
        .sequence;
    let back = Sequence::new(parse_sequence_csv(&sequence_to_csv(&x)).unwrap()).unwrap();
    assert_eq!(&back[..], &x[..]);
}

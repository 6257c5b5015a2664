//! CSV formats for sequences, ambiguity grids, ESD curves and optimizer
//! traces. Floats are written with 17 significant digits (`{:.16e}`), so
//! a written sequence reads back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::alamm::TraceRecord;
use crate::ambiguity::AfGrid;
use crate::amsdr::AmTraceRecord;
use crate::error::{Error, Result};
use crate::waveform::Sequence;

pub const SEQUENCE_HEADER: &str = "n,re,im";
pub const AF_HEADER: &str = "k,doppler,re,im,abs_db";
pub const ESD_HEADER: &str = "f,esd,esd_db,u_max";
pub const ALAMM_TRACE_HEADER: &str = "iter,wpsl_db,merit,max_stopband_violation,papr,wall_ms";
pub const AM_TRACE_HEADER: &str = "iter,gap,phi,sigma_ratio,wall_ms";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sequence_to_csv(x: &[Complex64]) -> String {
    let mut s = String::with_capacity(48 * (x.len() + 1));
    s.push_str(SEQUENCE_HEADER);
    s.push('\n');
    for (i, v) in x.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, fmt_f64(v.re), fmt_f64(v.im));
    }
    s
}

/// Parses the `n,re,im` format. Rows must be numbered `1..N` in order.
pub fn parse_sequence_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SEQUENCE_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `{SEQUENCE_HEADER}`, found `{h}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty sequence file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let n: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad index `{}`", fields[0]),
        })?;
        if n != out.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected index {}, found {n}", out.len() + 1),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad number `{s}`"),
            })
        };
        out.push(Complex64::new(num(fields[1])?, num(fields[2])?));
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "sequence file has no rows".into(),
        });
    }
    Ok(out)
}

pub fn write_sequence(path: &Path, x: &Sequence) -> Result<()> {
    fs::write(path, sequence_to_csv(x))?;
    Ok(())
}

/// Reads a sequence file; `renormalize` rescales to energy `N` instead of
/// rejecting a file that violates the energy invariant.
pub fn read_sequence(path: &Path, renormalize: bool) -> Result<Sequence> {
    let values = parse_sequence_csv(&fs::read_to_string(path)?)?;
    if renormalize {
        Sequence::normalized(values)
    } else {
        Sequence::new(values)
    }
}

/// Doppler is written in bins (`ν = f·N`), magnitude in dB relative to
/// the mainlobe.
pub fn af_grid_to_csv(grid: &AfGrid, n: usize) -> String {
    let main = grid.mainlobe.norm();
    let mut s = String::new();
    s.push_str(AF_HEADER);
    s.push('\n');
    for k in grid.zone.delays() {
        for (l, &f) in grid.zone.doppler().iter().enumerate() {
            let v = grid.get(k, l);
            let db = 20.0 * (v.norm() / main).log10();
            let _ = writeln!(
                s,
                "{k},{},{},{},{}",
                fmt_f64(f * n as f64),
                fmt_f64(v.re),
                fmt_f64(v.im),
                fmt_f64(db)
            );
        }
    }
    s
}

/// `esd_db = 10 log10(esd / N)`.
pub fn esd_to_csv(points: &[(f64, f64)], n: usize, u_max: f64) -> String {
    let mut s = String::new();
    s.push_str(ESD_HEADER);
    s.push('\n');
    for &(f, e) in points {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(f),
            fmt_f64(e),
            fmt_f64(10.0 * (e / n as f64).log10()),
            fmt_f64(u_max)
        );
    }
    s
}

pub fn alamm_trace_to_csv(trace: &[TraceRecord]) -> String {
    let mut s = String::new();
    s.push_str(ALAMM_TRACE_HEADER);
    s.push('\n');
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.wpsl_db),
            fmt_f64(r.merit),
            fmt_f64(r.max_stopband_violation),
            fmt_f64(r.papr),
            fmt_f64(r.wall_ms)
        );
    }
    s
}

pub fn am_trace_to_csv(trace: &[AmTraceRecord]) -> String {
    let mut s = String::new();
    s.push_str(AM_TRACE_HEADER);
    s.push('\n');
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iter,
            fmt_f64(r.gap),
            fmt_f64(r.phi),
            fmt_f64(r.sigma_ratio),
            fmt_f64(r.wall_ms)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::gen_random_polyphase;
    use proptest::prelude::*;

    #[test]
    fn header_and_layout() {
        let x = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)];
        let s = sequence_to_csv(&x);
        assert_eq!(
            s,
            "n,re,im\n1,1.0000000000000000e0,0.0000000000000000e0\n\
             2,0.0000000000000000e0,-1.0000000000000000e0\n"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_sequence_csv("n,re,im\n1,1.0,0.0\n3,1.0,0.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_sequence_csv("n,re,im\n1,abc,0.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_sequence_csv("idx,re,im\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(parse_sequence_csv("n,re,im\n").is_err());
    }

    #[test]
    fn polyphase_round_trip_is_exact() {
        let x = gen_random_polyphase(128, 77).unwrap();
        let back = parse_sequence_csv(&sequence_to_csv(&x)).unwrap();
        assert_eq!(back, x.values());
    }

    proptest! {
        #[test]
        fn csv_round_trip_bit_exact(v in proptest::collection::vec((any::<f64>(), any::<f64>()), 1..40)) {
            let x: Vec<Complex64> = v
                .into_iter()
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| Complex64::new(a, b))
                .collect();
            prop_assume!(!x.is_empty());
            let back = parse_sequence_csv(&sequence_to_csv(&x)).unwrap();
            prop_assert_eq!(back.len(), x.len());
            for (a, b) in back.iter().zip(&x) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}

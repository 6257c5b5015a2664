//! `design`, `analyze` and `compare`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dopseq::alamm::{alamm_solve, project_papr, AlammStatus};
use dopseq::ambiguity::{af_grid, esd, esd_grid, feasibility_report, wpsl_db, FeasibilityReport};
use dopseq::amsdr::{am_solve, AmStatus};
use dopseq::io::{af_grid_to_csv, alamm_trace_to_csv, am_trace_to_csv, esd_to_csv, fmt_f64, read_sequence, write_sequence};
use dopseq::waveform::{gen_chirp, gen_filtered_polyphase, gen_random_polyphase, papr};
use dopseq::Sequence;
use serde::Serialize;

use crate::config::{Algorithm, Init, Problem, RunConfig};
use crate::error::{CliError, Result};

/// Points of the uniform frequency grid in ESD exports.
pub const ESD_GRID_POINTS: usize = 2048;

pub const COMPARE_HEADER: &str = "sequence,wpsl_db,papr,max_stopband_esd_db";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFiles {
    pub sequence: Option<PathBuf>,
    pub trace: PathBuf,
    pub summary: PathBuf,
}

/// What `design` reports in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub n: usize,
    pub seed: u64,
    /// `converged`, `iteration_limit`, `aborted: ...`, `rank_one_failure`
    /// or `baseline`.
    pub status: String,
    pub wpsl: Option<f64>,
    pub wpsl_db: Option<f64>,
    pub papr: Option<f64>,
    pub max_stopband_esd: Option<f64>,
    pub u_max: Option<f64>,
    pub iterations: usize,
    /// Zero when `design.record_timing` is off.
    pub wall_ms: f64,
    pub files: OutputFiles,
}

fn init_sequence(cfg: &RunConfig, problem: &Problem) -> Result<Sequence> {
    let n = cfg.n;
    let x = match cfg.init {
        Init::Polyphase => gen_random_polyphase(n, cfg.seed)?,
        Init::Chirp => gen_chirp(n)?,
        Init::FilteredPolyphase => gen_filtered_polyphase(n, cfg.seed, &problem.mask, cfg.filter_taps)?,
    };
    let gamma = problem.design.papr_bound;
    if papr(&x)? > gamma {
        return Ok(project_papr(&x, gamma, n)?);
    }
    Ok(x)
}

fn baseline_trace(x: &Sequence, problem: &Problem) -> Result<String> {
    let report = feasibility_report(x, &problem.zone, &problem.mask, problem.design.papr_bound)?;
    let record = dopseq::alamm::TraceRecord {
        iter: 0,
        wpsl_db: report.wpsl_db,
        merit: f64::NAN,
        max_stopband_violation: report.max_violation(),
        papr: report.papr_value,
        wall_ms: 0.0,
        outer: 0,
        merit_before: f64::NAN,
    };
    Ok(alamm_trace_to_csv(&[record]))
}

/// Runs the configured algorithm and writes `sequence.csv`, `trace.csv`
/// and `summary.json` under the output directory (`out_override` wins
/// over the config's `out`).
///
/// An AM rank-one failure still writes the trace and summary before
/// returning [`CliError::RankOne`]; an aborted ALaMM run writes all three
/// files and returns [`CliError::Numerical`].
pub fn cmd_design(cfg: &RunConfig, out_override: Option<&Path>) -> Result<RunSummary> {
    let problem = cfg.problem()?;
    let out = out_override.unwrap_or(&cfg.out).to_path_buf();
    fs::create_dir_all(&out)?;
    let files = OutputFiles {
        sequence: Some(out.join("sequence.csv")),
        trace: out.join("trace.csv"),
        summary: out.join("summary.json"),
    };
    let timing = problem.design.record_timing;
    let start = Instant::now();

    let (sequence, trace, status, iterations, failure) = match cfg.algorithm {
        Algorithm::Chirp | Algorithm::Polyphase | Algorithm::FilteredPolyphase => {
            let x = match cfg.algorithm {
                Algorithm::Chirp => gen_chirp(cfg.n)?,
                Algorithm::Polyphase => gen_random_polyphase(cfg.n, cfg.seed)?,
                _ => gen_filtered_polyphase(cfg.n, cfg.seed, &problem.mask, cfg.filter_taps)?,
            };
            let trace = baseline_trace(&x, &problem)?;
            (Some(x), trace, "baseline".to_string(), 0, None)
        }
        Algorithm::Alamm => {
            let x0 = init_sequence(cfg, &problem)?;
            let res = alamm_solve(&x0, &problem.zone, &problem.mask, &problem.design)?;
            let (status, failure) = match &res.status {
                AlammStatus::Converged => ("converged".to_string(), None),
                AlammStatus::IterationLimit => ("iteration_limit".to_string(), None),
                AlammStatus::Aborted(why) => (format!("aborted: {why}"), Some(CliError::Numerical(why.clone()))),
            };
            (Some(res.sequence), alamm_trace_to_csv(&res.trace), status, res.iterations, failure)
        }
        Algorithm::Am => {
            let x0 = init_sequence(cfg, &problem)?;
            let res = am_solve(&x0, &problem.zone, &problem.mask, &problem.design)?;
            let trace = am_trace_to_csv(&res.trace);
            match res.status {
                AmStatus::Converged => (res.sequence, trace, "converged".to_string(), res.sweeps, None),
                AmStatus::RankOneFailure { sigma_ratio } => (
                    None,
                    trace,
                    "rank_one_failure".to_string(),
                    res.sweeps,
                    Some(CliError::RankOne { sigma_ratio }),
                ),
            }
        }
    };
    let wall_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };

    fs::write(&files.trace, trace)?;
    let mut summary = RunSummary {
        algorithm: cfg.algorithm.name().to_string(),
        n: cfg.n,
        seed: cfg.seed,
        status,
        wpsl: None,
        wpsl_db: None,
        papr: None,
        max_stopband_esd: None,
        u_max: (!problem.mask.is_empty()).then(|| problem.mask.u_max()),
        iterations,
        wall_ms,
        files,
    };
    match &sequence {
        Some(x) => {
            write_sequence(summary.files.sequence.as_ref().expect("sequence path"), x)?;
            let report = feasibility_report(x, &problem.zone, &problem.mask, problem.design.papr_bound)?;
            summary.wpsl = Some(report.wpsl);
            summary.wpsl_db = Some(report.wpsl_db);
            summary.papr = Some(report.papr_value);
            summary.max_stopband_esd = report.max_stopband_esd;
        }
        None => summary.files.sequence = None,
    }
    write_json(&summary.files.summary, &summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// `feasibility.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    #[serde(flatten)]
    pub report: FeasibilityReport,
    pub papr_ok: bool,
    pub max_violation: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeOutput {
    pub af: PathBuf,
    pub esd: PathBuf,
    pub feasibility: PathBuf,
    pub summary: Feasibility,
}

/// Frequencies for ESD export: the uniform grid `q / M` merged with the
/// stopband bins, ascending and without duplicates.
pub fn esd_frequencies(mask_bins: &[f64], points: usize) -> Vec<f64> {
    let mut f: Vec<f64> = (0..points).map(|q| q as f64 / points as f64).collect();
    f.extend_from_slice(mask_bins);
    f.sort_by(f64::total_cmp);
    f.dedup();
    f
}

/// Writes `af.csv`, `esd.csv` and `feasibility.json` for one sequence.
pub fn cmd_analyze(seq: &Path, cfg: &RunConfig, out: &Path, renormalize: bool) -> Result<AnalyzeOutput> {
    let problem = cfg.problem()?;
    let x = read_sequence(seq, renormalize)?;
    let n = x.len();
    if n != cfg.n {
        return Err(CliError::Config(format!(
            "{} has {n} samples but the config sets N = {}",
            seq.display(),
            cfg.n
        )));
    }
    fs::create_dir_all(out)?;

    let grid = af_grid(&x, &problem.zone)?;
    let af_path = out.join("af.csv");
    fs::write(&af_path, af_grid_to_csv(&grid, n))?;

    let uniform = esd_grid(&x, ESD_GRID_POINTS);
    let points: Vec<(f64, f64)> = esd_frequencies(problem.mask.bins(), ESD_GRID_POINTS)
        .into_iter()
        .map(|f| {
            // Grid points reuse the FFT values; mask bins are evaluated directly.
            let q = f * ESD_GRID_POINTS as f64;
            if q.fract() == 0.0 {
                (f, uniform[q as usize])
            } else {
                (f, esd(&x, f))
            }
        })
        .collect();
    let esd_path = out.join("esd.csv");
    fs::write(&esd_path, esd_to_csv(&points, n, problem.mask.u_max()))?;

    let report = feasibility_report(&x, &problem.zone, &problem.mask, problem.design.papr_bound)?;
    let summary = Feasibility {
        papr_ok: report.papr_ok(),
        max_violation: report.max_violation(),
        feasible: report.papr_ok() && report.stopband_violations.is_empty(),
        report,
    };
    let feas_path = out.join("feasibility.json");
    write_json(&feas_path, &summary)?;
    Ok(AnalyzeOutput {
        af: af_path,
        esd: esd_path,
        feasibility: feas_path,
        summary,
    })
}

/// One CSV row per sequence; the stopband column is empty without a mask.
pub fn cmd_compare(seqs: &[PathBuf], cfg: &RunConfig) -> Result<String> {
    let problem = cfg.problem()?;
    let mut table = String::from(COMPARE_HEADER);
    table.push('\n');
    for path in seqs {
        let x = read_sequence(path, false)?;
        if x.len() != cfg.n {
            return Err(CliError::Config(format!(
                "{} has {} samples but the config sets N = {}",
                path.display(),
                x.len(),
                cfg.n
            )));
        }
        let r = feasibility_report(&x, &problem.zone, &problem.mask, problem.design.papr_bound)?;
        let stop = r
            .max_stopband_esd
            .map(|e| fmt_f64(10.0 * (e / cfg.n as f64).log10()))
            .unwrap_or_default();
        let _ = writeln!(
            table,
            "{},{},{},{}",
            path.display(),
            fmt_f64(wpsl_db(r.wpsl, cfg.n)),
            fmt_f64(r.papr_value),
            stop
        );
    }
    Ok(table)
}

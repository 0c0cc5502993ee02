//! Results of an experiment run and their CSV / JSON serialization.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig, Format, Mode};
use crate::bounds::BoundsReport;
use crate::error::{Error, Result};
use crate::fidelity::MetricKind;

/// One truncation level of one (ρ, σ) pair, flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub experiment: Experiment,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub shots: Option<u64>,
    #[serde(rename = "C")]
    pub cost: f64,
    pub tfb_low: f64,
    pub tfb_up: f64,
    pub delta1: Option<f64>,
    pub delta2: f64,
    pub ccfb_low: f64,
    pub ccfb_up: f64,
    pub ctib_low_angle: f64,
    pub ctib_low_bures: f64,
    pub ctib_low_sine: f64,
    pub ctib_up_angle: f64,
    pub ctib_up_bures: f64,
    pub ctib_up_sine: f64,
    pub certified_low: f64,
    pub certified_up: f64,
    pub ssfb_low: f64,
    pub ssfb_up: f64,
    pub fidelity_exact: Option<f64>,
    pub trial: usize,
    pub h: Option<f64>,
    pub gamma: f64,
}

pub const BOUNDS_HEADER: [&str; 27] = [
    "experiment",
    "seed",
    "n",
    "m",
    "mode",
    "shots",
    "C",
    "tfb_low",
    "tfb_up",
    "delta1",
    "delta2",
    "ccfb_low",
    "ccfb_up",
    "ctib_low_angle",
    "ctib_low_bures",
    "ctib_low_sine",
    "ctib_up_angle",
    "ctib_up_bures",
    "ctib_up_sine",
    "certified_low",
    "certified_up",
    "ssfb_low",
    "ssfb_up",
    "fidelity_exact",
    "trial",
    "h",
    "gamma",
];

/// Context shared by every row of one (ρ, σ) pair.
#[derive(Debug, Clone, Copy)]
pub struct RowContext {
    pub experiment: Experiment,
    pub seed: u64,
    pub n: usize,
    pub mode: Mode,
    pub shots: Option<u64>,
    pub ssfb: (f64, f64),
    pub trial: usize,
    pub h: Option<f64>,
}

impl BoundsRow {
    pub fn from_report(ctx: &RowContext, r: &BoundsReport) -> Self {
        let k = |kind: MetricKind| r.ctib_for(kind);
        Self {
            experiment: ctx.experiment,
            seed: ctx.seed,
            n: ctx.n,
            m: r.m,
            mode: ctx.mode,
            shots: ctx.shots,
            cost: r.cost,
            tfb_low: r.tfb_low,
            tfb_up: r.tfb_up,
            delta1: r.delta1,
            delta2: r.delta2,
            ccfb_low: r.ccfb_low,
            ccfb_up: r.ccfb_up,
            ctib_low_angle: k(MetricKind::BuresAngle).low,
            ctib_low_bures: k(MetricKind::BuresDistance).low,
            ctib_low_sine: k(MetricKind::Sine).low,
            ctib_up_angle: k(MetricKind::BuresAngle).up,
            ctib_up_bures: k(MetricKind::BuresDistance).up,
            ctib_up_sine: k(MetricKind::Sine).up,
            certified_low: r.certified_low,
            certified_up: r.certified_up,
            ssfb_low: ctx.ssfb.0,
            ssfb_up: ctx.ssfb.1,
            fidelity_exact: r.reference_fidelity,
            trial: ctx.trial,
            h: ctx.h,
            gamma: r.gamma,
        }
    }
}

/// Smallest level at which each bound family is tighter than the SSFB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstarTrial {
    pub n: usize,
    pub trial: usize,
    pub tfb: Option<usize>,
    pub ccfb: Option<usize>,
    pub ctib: Option<usize>,
    pub certified: Option<usize>,
}

/// Mean and standard deviation over the trials where `m*` exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstarStat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub undefined: usize,
}

impl MstarStat {
    pub fn from_values(values: impl Iterator<Item = Option<usize>>) -> Self {
        let mut found = Vec::new();
        let mut undefined = 0;
        for v in values {
            match v {
                Some(m) => found.push(m as f64),
                None => undefined += 1,
            }
        }
        if found.is_empty() {
            return Self {
                mean: None,
                std: None,
                undefined,
            };
        }
        let n = found.len() as f64;
        let mean = found.iter().sum::<f64>() / n;
        let var = found.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean: Some(mean),
            std: Some(var.sqrt()),
            undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstarSummary {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub tfb: MstarStat,
    pub ccfb: MstarStat,
    pub ctib: MstarStat,
    pub certified: MstarStat,
}

/// Location of the minimum of the lower and upper truncated curves at one
/// level of an Ising sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingWindow {
    pub m: usize,
    pub argmin_low: f64,
    pub argmin_up: f64,
    pub window: f64,
    pub min_low: f64,
    pub min_up: f64,
    pub max_up: f64,
}

/// Outcome of one invariant over all instances. Slack is the margin by which
/// the inequality holds; negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    pub version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<BoundsRow>,
    pub mstar_trials: Vec<MstarTrial>,
    pub mstar_summary: Vec<MstarSummary>,
    pub ising_windows: Vec<IsingWindow>,
    pub checks: Vec<CheckResult>,
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            rows: Vec::new(),
            mstar_trials: Vec::new(),
            mstar_summary: Vec::new(),
            ising_windows: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Emitted rows breaking the SSFB sandwich, or (exact mode only, where
    /// the bounds are certified) the certified interval.
    pub fn row_violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| {
                let Some(f) = r.fidelity_exact else {
                    return false;
                };
                let ssfb_bad = r.ssfb_low > f + 1e-9 || f > r.ssfb_up + 1e-9;
                let cert_bad = r.mode == Mode::Exact && (r.certified_low > f + 1e-8 || f + 1e-8 > r.certified_up + 2e-8);
                ssfb_bad || cert_bad
            })
            .count()
    }

    /// Failed property checks plus violating rows.
    pub fn failures(&self) -> usize {
        self.violations() + self.row_violations()
    }
}

/// Full precision (17 significant digits); infinities as `inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn bounds_fields(r: &BoundsRow) -> Vec<String> {
    let f = fmt_f64;
    vec![
        r.experiment.name().to_string(),
        r.seed.to_string(),
        r.n.to_string(),
        r.m.to_string(),
        r.mode.name().to_string(),
        r.shots.map(|s| s.to_string()).unwrap_or_default(),
        f(r.cost),
        f(r.tfb_low),
        f(r.tfb_up),
        r.delta1.map_or_else(|| "inf".to_string(), fmt_f64),
        f(r.delta2),
        f(r.ccfb_low),
        f(r.ccfb_up),
        f(r.ctib_low_angle),
        f(r.ctib_low_bures),
        f(r.ctib_low_sine),
        f(r.ctib_up_angle),
        f(r.ctib_up_bures),
        f(r.ctib_up_sine),
        f(r.certified_low),
        f(r.certified_up),
        f(r.ssfb_low),
        f(r.ssfb_up),
        opt_f64(r.fidelity_exact),
        r.trial.to_string(),
        opt_f64(r.h),
        f(r.gamma),
    ]
}

struct Table {
    suffix: Option<&'static str>,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn stat_fields(s: &MstarStat) -> [String; 3] {
    [opt_f64(s.mean), opt_f64(s.std), s.undefined.to_string()]
}

fn tables(record: &RunRecord) -> Vec<Table> {
    let bounds = Table {
        suffix: None,
        header: BOUNDS_HEADER.to_vec(),
        rows: record.rows.iter().map(bounds_fields).collect(),
    };
    match record.experiment {
        Experiment::BoundsVsM => vec![bounds],
        Experiment::MstarScaling => {
            let mut summary_header = vec!["n", "d", "trials"];
            for fam in ["tfb", "ccfb", "ctib", "certified"] {
                summary_header.extend(match fam {
                    "tfb" => ["tfb_mean", "tfb_std", "tfb_undefined"],
                    "ccfb" => ["ccfb_mean", "ccfb_std", "ccfb_undefined"],
                    "ctib" => ["ctib_mean", "ctib_std", "ctib_undefined"],
                    _ => ["certified_mean", "certified_std", "certified_undefined"],
                });
            }
            let summary_rows = record
                .mstar_summary
                .iter()
                .map(|s| {
                    let mut row = vec![s.n.to_string(), s.d.to_string(), s.trials.to_string()];
                    for st in [&s.tfb, &s.ccfb, &s.ctib, &s.certified] {
                        row.extend(stat_fields(st));
                    }
                    row
                })
                .collect();
            let trial_rows = record
                .mstar_trials
                .iter()
                .map(|t| {
                    vec![
                        t.n.to_string(),
                        t.trial.to_string(),
                        opt_usize(t.tfb),
                        opt_usize(t.ccfb),
                        opt_usize(t.ctib),
                        opt_usize(t.certified),
                    ]
                })
                .collect();
            vec![
                bounds,
                Table {
                    suffix: Some("summary"),
                    header: summary_header,
                    rows: summary_rows,
                },
                Table {
                    suffix: Some("trials"),
                    header: vec!["n", "trial", "mstar_tfb", "mstar_ccfb", "mstar_ctib", "mstar_certified"],
                    rows: trial_rows,
                },
            ]
        }
        Experiment::IsingSweep => {
            let rows = record
                .ising_windows
                .iter()
                .map(|w| {
                    vec![
                        w.m.to_string(),
                        fmt_f64(w.argmin_low),
                        fmt_f64(w.argmin_up),
                        fmt_f64(w.window),
                        fmt_f64(w.min_low),
                        fmt_f64(w.min_up),
                        fmt_f64(w.max_up),
                    ]
                })
                .collect();
            vec![
                bounds,
                Table {
                    suffix: Some("windows"),
                    header: vec!["m", "argmin_low", "argmin_up", "window", "min_low", "min_up", "max_up"],
                    rows,
                },
            ]
        }
        Experiment::PropertySuite => {
            let rows = record
                .checks
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        c.instances.to_string(),
                        c.violations.to_string(),
                        fmt_f64(c.worst_slack),
                        fmt_f64(c.tolerance),
                    ]
                })
                .collect();
            vec![Table {
                suffix: None,
                header: vec!["check", "instances", "violations", "worst_slack", "tolerance"],
                rows,
            }]
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes the record and returns the files produced. CSV output puts the main
/// table at `path` and any auxiliary tables next to it as `<stem>_<name>.csv`;
/// JSON output is a single file.
pub fn emit(record: &RunRecord, format: Format, path: &Path) -> Result<Vec<PathBuf>> {
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(record).map_err(|e| io_err(path, e))?;
            let mut f = File::create(path).map_err(|e| io_err(path, e))?;
            f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
            f.write_all(b"\n").map_err(|e| io_err(path, e))?;
            Ok(vec![path.to_path_buf()])
        }
        Format::Csv => {
            let mut written = Vec::new();
            for table in tables(record) {
                let target = match table.suffix {
                    None => path.to_path_buf(),
                    Some(s) => sibling(path, s),
                };
                let mut w = csv::Writer::from_path(&target).map_err(|e| io_err(&target, e))?;
                w.write_record(&table.header).map_err(|e| io_err(&target, e))?;
                for row in &table.rows {
                    w.write_record(row).map_err(|e| io_err(&target, e))?;
                }
                w.flush().map_err(|e| io_err(&target, e))?;
                written.push(target);
            }
            Ok(written)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use vqfe::bench::{self, Experiment, ExperimentConfig, Format, Mode};

#[derive(Parser)]
#[command(name = "vqfe", version, about = "Fidelity-bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bounds against truncation level for one configured state pair.
    BoundsVsM(Flags),
    /// Smallest level beating the sub/super-fidelity bounds, against qubit count.
    MstarScaling(Flags),
    /// Fidelity spectrum across the transverse-field Ising transition.
    IsingSweep(Flags),
    /// Every library invariant over a seeded ensemble.
    PropertySuite(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Flags {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn build_config(experiment: Experiment, flags: &Flags) -> vqfe::Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(experiment),
    };
    if cfg.experiment != experiment {
        return Err(vqfe::Error::InvalidArgument(format!(
            "config is for {}, not {}",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    cfg.seed = flags.seed;
    if let Some(m) = flags.mode {
        cfg.mode = match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Sampled => Mode::Sampled,
        };
    }
    if let Some(s) = flags.shots {
        cfg.shots = s;
    }
    if let Some(f) = flags.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(out) = &flags.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::BoundsVsM(f) => (Experiment::BoundsVsM, f),
        Command::MstarScaling(f) => (Experiment::MstarScaling, f),
        Command::IsingSweep(f) => (Experiment::IsingSweep, f),
        Command::PropertySuite(f) => (Experiment::PropertySuite, f),
    };
    let cfg = match build_config(experiment, flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let record = match bench::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(1);
        }
    };
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", experiment.name())));
    match bench::emit(&record, cfg.format, &path) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    }
    eprintln!("wall clock {:.3} s", start.elapsed().as_secs_f64());
    let failures = record.failures();
    if failures > 0 {
        eprintln!("{failures} invariant failures");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

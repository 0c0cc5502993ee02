//! The experiment runners. Each trial or grid point draws its randomness
//! from a seed derived from the root seed and its index, so results do not
//! depend on scheduling.

use rand::Rng;
use rayon::prelude::*;

use super::config::{
    DiagSpec, Ensemble, Experiment, ExperimentConfig, Mode, StateSpec, Tightness,
};
use super::record::{BoundsRow, IsingWindow, MstarStat, MstarSummary, MstarTrial, RowContext, RunRecord};
use super::suite;
use crate::bounds::{fidelity_spectrum, BoundsReport, FidelitySpectrum, Interval, SpectrumOptions};
use crate::error::Result;
use crate::fidelity::ssfb;
use crate::measure::Sampling;
use crate::seeds;
use crate::states::{
    random_density_purity, random_density_rank, tensor_product_state, thermal_state, DensityMatrix, IsingParams,
};
use crate::vqsd::{self, AnsatzSpec, DiagonalizationResult, OptimizeOptions};

// Sub-seed slots of one trial.
const SLOT_RHO: u64 = 0;
const SLOT_SIGMA: u64 = 1;
const SLOT_DIAG: u64 = 2;
const SLOT_MEASURE: u64 = 3;

pub fn run(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::BoundsVsM => run_bounds_vs_m(cfg),
        Experiment::MstarScaling => run_mstar_scaling(cfg),
        Experiment::IsingSweep => run_ising_sweep(cfg),
        Experiment::PropertySuite => suite::run_property_suite(cfg),
    }
}

pub fn sampling_of(cfg: &ExperimentConfig) -> Sampling {
    match cfg.mode {
        Mode::Exact => Sampling::Exact,
        Mode::Sampled => Sampling::Shots(cfg.shots),
    }
}

pub fn draw_state(spec: &StateSpec, n_qubits: usize, seed: u64) -> Result<DensityMatrix> {
    let d = 1usize << n_qubits;
    match spec {
        StateSpec::Rank { rank } => random_density_rank(d, *rank, seed),
        StateSpec::Purity { purity } => random_density_purity(d, *purity, seed),
        StateSpec::Tensor { factor_ranks } => {
            let factors = factor_ranks
                .iter()
                .enumerate()
                .map(|(k, &r)| random_density_rank(2, r, seeds::derive(seed, &[k as u64])))
                .collect::<Result<Vec<_>>>()?;
            tensor_product_state(&factors)
        }
    }
}

pub fn diagonalize(rho: &DensityMatrix, spec: &DiagSpec, seed: u64) -> Result<DiagonalizationResult> {
    match spec {
        DiagSpec::Exact => vqsd::exact_diagonalization(rho),
        DiagSpec::Perturbed { strength } => vqsd::perturbed_diagonalization(rho, *strength, seed),
        DiagSpec::Variational {
            layers,
            entangling,
            max_evals,
            restarts,
        } => {
            let n = rho.dim().trailing_zeros() as usize;
            let ansatz = AnsatzSpec {
                n_qubits: n,
                layers: *layers,
                entangling: *entangling,
            };
            let opts = OptimizeOptions {
                max_evals: *max_evals,
                restarts: *restarts,
                seed,
                ..OptimizeOptions::default()
            };
            vqsd::optimize(rho, &ansatz, &opts)
        }
    }
}

fn rows_for(ctx: &RowContext, spectrum: &FidelitySpectrum) -> Vec<BoundsRow> {
    spectrum.reports.iter().map(|r| BoundsRow::from_report(ctx, r)).collect()
}

pub fn run_bounds_vs_m(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let c = &cfg.bounds_vs_m;
    let d = 1usize << c.n_qubits;
    let m_max = c.m_max.unwrap_or(d);
    let sampling = sampling_of(cfg);
    let per_trial = (0..c.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<BoundsRow>> {
            let s = |slot| seeds::derive(cfg.seed, &[trial as u64, slot]);
            let rho = draw_state(&c.rho, c.n_qubits, s(SLOT_RHO))?;
            let sigma = draw_state(&c.sigma, c.n_qubits, s(SLOT_SIGMA))?;
            let diag = diagonalize(&rho, &c.diagonalization, s(SLOT_DIAG))?;
            let opts = SpectrumOptions {
                sampling,
                seed: s(SLOT_MEASURE),
                known_rank: c.known_rank.then(|| rho.rank()),
                ..SpectrumOptions::default()
            };
            let spectrum = fidelity_spectrum(&rho, &sigma, &diag, m_max, &opts)?;
            let ctx = RowContext {
                experiment: Experiment::BoundsVsM,
                seed: cfg.seed,
                n: c.n_qubits,
                mode: cfg.mode,
                shots: sampling.shots(),
                ssfb: ssfb(&rho, &sigma)?,
                trial,
                h: None,
            };
            Ok(rows_for(&ctx, &spectrum))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut record = RunRecord::new(cfg);
    record.rows = per_trial.into_iter().flatten().collect();
    Ok(record)
}

fn beats(iv: Interval, ss: Interval, tightness: Tightness) -> bool {
    match tightness {
        Tightness::Both => iv.strictly_inside(&ss),
        Tightness::Lower => iv.low > ss.low,
        Tightness::Upper => iv.up < ss.up,
    }
}

/// Least level whose interval is tighter than the SSFB interval.
pub fn m_star(
    reports: &[BoundsReport],
    ss: Interval,
    tightness: Tightness,
    pick: impl Fn(&BoundsReport) -> Interval,
) -> Option<usize> {
    reports.iter().find(|r| beats(pick(r), ss, tightness)).map(|r| r.m)
}

fn draw_mstar_pair(ensemble: Ensemble, n: usize, seed: u64) -> Result<(DensityMatrix, DensityMatrix)> {
    let d = 1usize << n;
    let s = |slot| seeds::derive(seed, &[slot]);
    let rho = match ensemble {
        Ensemble::LowRank => random_density_rank(d, n.min(d), s(SLOT_RHO))?,
        Ensemble::HighPurity => {
            let lo = 1.0 / n as f64;
            let p = seeds::rng(s(10)).random_range(lo.max(1.0 / d as f64)..1.0);
            random_density_purity(d, p, s(SLOT_RHO))?
        }
    };
    let mut rng = seeds::rng(s(11));
    let sigma = if rng.random_bool(0.5) {
        random_density_rank(d, rng.random_range(1..=d), s(SLOT_SIGMA))?
    } else {
        random_density_purity(d, rng.random_range(1.0 / d as f64..1.0), s(SLOT_SIGMA))?
    };
    Ok((rho, sigma))
}

pub fn run_mstar_scaling(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let c = &cfg.mstar_scaling;
    let sampling = sampling_of(cfg);
    let jobs: Vec<(usize, usize)> = (c.n_min..=c.n_max)
        .flat_map(|n| (0..c.trials).map(move |t| (n, t)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(n, trial)| -> Result<(MstarTrial, Vec<BoundsRow>)> {
            let seed = seeds::derive(cfg.seed, &[n as u64, trial as u64]);
            let (rho, sigma) = draw_mstar_pair(c.ensemble, n, seed)?;
            let diag = vqsd::perturbed_diagonalization(&rho, c.strength, seeds::derive(seed, &[SLOT_DIAG]))?;
            let opts = SpectrumOptions {
                sampling,
                seed: seeds::derive(seed, &[SLOT_MEASURE]),
                ..SpectrumOptions::default()
            };
            let spectrum = fidelity_spectrum(&rho, &sigma, &diag, rho.dim(), &opts)?;
            let (e, g) = ssfb(&rho, &sigma)?;
            let ss = Interval::new(e, g);
            let reps = &spectrum.reports;
            let t = c.tightness;
            let mt = MstarTrial {
                n,
                trial,
                tfb: m_star(reps, ss, t, |r| r.tfb()),
                ccfb: m_star(reps, ss, t, |r| r.ccfb()),
                ctib: m_star(reps, ss, t, |r| r.ctib_best()),
                certified: m_star(reps, ss, t, |r| r.certified_interval()),
            };
            let ctx = RowContext {
                experiment: Experiment::MstarScaling,
                seed: cfg.seed,
                n,
                mode: cfg.mode,
                shots: sampling.shots(),
                ssfb: (e, g),
                trial,
                h: None,
            };
            Ok((mt, rows_for(&ctx, &spectrum)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut record = RunRecord::new(cfg);
    for (mt, rows) in results {
        record.mstar_trials.push(mt);
        record.rows.extend(rows);
    }
    record.mstar_summary = (c.n_min..=c.n_max)
        .map(|n| {
            let of_n: Vec<&MstarTrial> = record.mstar_trials.iter().filter(|t| t.n == n).collect();
            let stat = |f: fn(&MstarTrial) -> Option<usize>| MstarStat::from_values(of_n.iter().map(|t| f(t)));
            MstarSummary {
                n,
                d: 1 << n,
                trials: of_n.len(),
                tfb: stat(|t| t.tfb),
                ccfb: stat(|t| t.ccfb),
                ctib: stat(|t| t.ctib),
                certified: stat(|t| t.certified),
            }
        })
        .collect();
    Ok(record)
}

/// First index of the minimum, so ties resolve the same way on every run.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    best
}

pub fn run_ising_sweep(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let c = &cfg.ising_sweep;
    let sampling = sampling_of(cfg);
    let grid = c.grid();
    let params = |h: f64| IsingParams {
        n_spins: c.n_spins,
        j: c.j,
        h,
        beta: c.beta,
        cyclic: c.cyclic,
        convention: c.convention,
    };
    let rows_per_h = grid
        .par_iter()
        .enumerate()
        .map(|(k, &h)| -> Result<Vec<BoundsRow>> {
            let rho = thermal_state(&params(h))?;
            let sigma = thermal_state(&params(h + c.dh))?;
            let seed = seeds::derive(cfg.seed, &[k as u64]);
            let diag = diagonalize(&rho, &c.diagonalization, seeds::derive(seed, &[SLOT_DIAG]))?;
            let opts = SpectrumOptions {
                sampling,
                seed: seeds::derive(seed, &[SLOT_MEASURE]),
                ..SpectrumOptions::default()
            };
            let spectrum = fidelity_spectrum(&rho, &sigma, &diag, c.m_max, &opts)?;
            let ctx = RowContext {
                experiment: Experiment::IsingSweep,
                seed: cfg.seed,
                n: c.n_spins,
                mode: cfg.mode,
                shots: sampling.shots(),
                ssfb: ssfb(&rho, &sigma)?,
                trial: k,
                h: Some(h),
            };
            Ok(rows_for(&ctx, &spectrum))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut record = RunRecord::new(cfg);
    record.ising_windows = (1..=c.m_max)
        .map(|m| {
            let low: Vec<f64> = rows_per_h.iter().map(|rows| rows[m - 1].tfb_low).collect();
            let up: Vec<f64> = rows_per_h.iter().map(|rows| rows[m - 1].tfb_up).collect();
            let (il, iu) = (argmin(&low), argmin(&up));
            IsingWindow {
                m,
                argmin_low: grid[il],
                argmin_up: grid[iu],
                window: (grid[iu] - grid[il]).abs(),
                min_low: low[il],
                min_up: up[iu],
                max_up: up.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    record.rows = rows_per_h.into_iter().flatten().collect();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::Experiment;

    #[test]
    fn bounds_vs_m_small_run() {
        let mut cfg = ExperimentConfig::new(Experiment::BoundsVsM);
        cfg.bounds_vs_m.n_qubits = 2;
        cfg.bounds_vs_m.rho = StateSpec::Rank { rank: 2 };
        cfg.bounds_vs_m.sigma = StateSpec::Rank { rank: 4 };
        cfg.bounds_vs_m.diagonalization = DiagSpec::Perturbed { strength: 0.02 };
        cfg.bounds_vs_m.trials = 3;
        let rec = run(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 12);
        for r in &rec.rows {
            let f = r.fidelity_exact.unwrap();
            assert!(r.ssfb_low <= f + 1e-9 && f <= r.ssfb_up + 1e-9);
            assert!(r.certified_low <= f + 1e-8 && f <= r.certified_up + 2e-8);
        }
        assert_eq!(run(&cfg).unwrap(), rec);
    }

    #[test]
    fn pure_rho_collapses_ssfb() {
        // With ρ pure both E and G reduce to Tr ρσ = F², so no bound can be
        // strictly tighter; the first truncated level is exact as well.
        let rho = random_density_rank(8, 1, 5).unwrap();
        let sigma = random_density_rank(8, 8, 6).unwrap();
        let diag = vqsd::exact_diagonalization(&rho).unwrap();
        let spectrum = fidelity_spectrum(&rho, &sigma, &diag, 8, &SpectrumOptions::exact()).unwrap();
        let (e, g) = ssfb(&rho, &sigma).unwrap();
        let f = spectrum.reports[0].reference_fidelity.unwrap();
        assert!((e - f).abs() <= 1e-9 && (g - f).abs() <= 1e-9);
        assert!((spectrum.reports[0].tfb_low - f).abs() <= 1e-12);
        assert!((spectrum.reports[0].tfb_up - f).abs() <= 1e-12);
        let ss = Interval::new(e, g);
        assert_eq!(m_star(&spectrum.reports, ss, Tightness::Both, |r| r.tfb()), None);
    }

    #[test]
    fn argmin_takes_first_minimum() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
        assert_eq!(argmin(&[0.0]), 0);
    }

    #[test]
    fn small_ising_sweep() {
        let mut cfg = ExperimentConfig::new(Experiment::IsingSweep);
        cfg.ising_sweep.n_spins = 4;
        cfg.ising_sweep.h_step = 0.25;
        cfg.ising_sweep.m_max = 3;
        let rec = run(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 5 * 3);
        assert_eq!(rec.ising_windows.len(), 3);
        assert!(rec.rows.iter().all(|r| r.h.is_some()));
    }
}

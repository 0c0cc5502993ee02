//! Seeded sweep over every numerical invariant of the library, reported as
//! per-check violation counts and worst slacks.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::record::{CheckResult, RunRecord};
use crate::bounds::{fidelity_spectrum, SpectrumOptions};
use crate::error::Result;
use crate::fidelity::{self, difference_parts, epsilon_rank, epsilon_rank_of_spectrum, MetricKind};
use crate::measure::{self, RepairStrategy, Sampling};
use crate::qmat::{self, CMat};
use crate::seeds;
use crate::states::{random_density_purity, random_density_rank, DensityMatrix};
use crate::vqsd;

/// Shots per swap test when checking the measured `T`; few enough that raw
/// tables are frequently indefinite.
const SUITE_SHOTS: u64 = 200;

/// Observations of one instance: `(check, slack, tolerance)`.
#[derive(Default)]
struct Observations(Vec<(&'static str, f64, f64)>);

impl Observations {
    /// Records `lhs ≤ rhs` with slack `rhs − lhs`.
    fn le(&mut self, name: &'static str, lhs: f64, rhs: f64, tol: f64) {
        let slack = rhs - lhs;
        self.0.push((name, if slack.is_nan() { f64::NEG_INFINITY } else { slack }, tol));
    }

    fn holds(&mut self, name: &'static str, ok: bool) {
        self.0.push((name, if ok { 0.0 } else { -1.0 }, 0.0));
    }
}

fn random_pair(seed: u64, d: usize) -> Result<(DensityMatrix, DensityMatrix)> {
    let mut rng = seeds::rng(seeds::derive(seed, &[0]));
    let rho = random_density_rank(d, rng.random_range(1..=d), seeds::derive(seed, &[1]))?;
    let sigma = if rng.random_bool(0.5) {
        random_density_rank(d, rng.random_range(1..=d), seeds::derive(seed, &[2]))?
    } else {
        random_density_purity(d, rng.random_range(1.0 / d as f64..1.0), seeds::derive(seed, &[2]))?
    };
    Ok((rho, sigma))
}

fn sqrt_psd(a: &CMat) -> Result<CMat> {
    let e = qmat::hermitian_eig(a)?;
    Ok(e.map(|x| x.max(0.0).sqrt()))
}

fn qmat_checks(obs: &mut Observations, seed: u64, d: usize) -> Result<()> {
    let mut rng = seeds::rng(seed);
    let h = qmat::random_hermitian(d, &mut rng);
    let e = qmat::hermitian_eig(&h)?;
    obs.le("eig_reconstruction", qmat::max_abs_diff(&e.reconstruct(), &h), 0.0, 1e-8);
    let v = &e.eigenvectors;
    obs.le("eig_orthonormal", qmat::max_abs_diff(&(v.adjoint() * v), &qmat::identity(d)), 0.0, 1e-9);
    obs.holds("eig_descending", e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));

    let m = qmat::ginibre(d, d, &mut rng);
    obs.le("trace_norm_vs_trace", qmat::trace(&m).norm(), qmat::trace_norm(&m)?, 1e-10);
    let p = qmat::psd_project(&h)?;
    obs.le("psd_project_idempotent", qmat::max_abs_diff(&qmat::psd_project(&p)?, &p), 0.0, 1e-10);
    let g = qmat::ginibre(d, d, &mut rng);
    let psd = &g * g.adjoint();
    let s = qmat::matrix_sqrt(&psd)?;
    obs.le("sqrt_square_back", qmat::max_abs_diff(&(&s * &s), &psd), 0.0, 1e-8);
    let u = qmat::haar_unitary_with(d, &mut rng);
    obs.le("haar_unitary", qmat::unitarity_residual(&u), 0.0, 1e-9);
    Ok(())
}

fn fidelity_checks(obs: &mut Observations, rho: &DensityMatrix, sigma: &DensityMatrix, seed: u64) -> Result<()> {
    let f = fidelity::fidelity(rho, sigma)?;
    let (e, g) = fidelity::ssfb(rho, sigma)?;
    obs.le("ssfb_lower", e, f, 1e-9);
    obs.le("ssfb_upper", f, g, 1e-9);
    obs.le("fidelity_symmetric", (f - fidelity::fidelity(sigma, rho)?).abs(), 0.0, 1e-9);
    let dt = qmat::trace_distance(rho.matrix(), sigma.matrix())?;
    obs.le("fuchs_van_de_graaf_lower", 1.0 - f, dt, 1e-9);
    obs.le("fuchs_van_de_graaf_upper", dt, (1.0 - f * f).max(0.0).sqrt(), 1e-9);

    // Perturbation bound for PSD arguments.
    let mut rng = seeds::rng(seeds::derive(seed, &[7]));
    let d = rho.dim();
    let a = rho.matrix().scale(rng.random_range(0.3..1.0));
    let kick = qmat::random_hermitian(d, &mut rng);
    let kick = kick.unscale(qmat::spectral_norm(&kick)?.max(f64::MIN_POSITIVE));
    let b = qmat::psd_project(&(&a + kick.scale(rng.random_range(0.0..0.2))))?;
    let (sa, sb) = (sqrt_psd(&a)?, sqrt_psd(&b)?);
    let fa = fidelity::root_fidelity(&sa, sigma.sqrt())?;
    let fb = fidelity::root_fidelity(&sb, sigma.sqrt())?;
    let diff = &sa - &sb;
    let rhs = qmat::trace_product(&diff, &diff).re.max(0.0).sqrt();
    obs.le("fidelity_perturbation", (fa - fb).abs(), rhs, 1e-9);

    let parts = difference_parts(rho, sigma)?;
    for eps in [0.0, 0.01, 0.1] {
        let (rr, rs) = (epsilon_rank(rho, eps), epsilon_rank(sigma, eps));
        obs.le(
            "epsilon_rank_plus",
            epsilon_rank_of_spectrum(&parts.plus_eigenvalues, eps) as f64,
            rr as f64,
            0.0,
        );
        obs.le(
            "epsilon_rank_minus",
            epsilon_rank_of_spectrum(&parts.minus_eigenvalues, eps) as f64,
            rs as f64,
            0.0,
        );
        if dt >= eps {
            let r_eps = (rr * rs) as f64 / (rr + rs) as f64;
            let hs = qmat::hs_distance(rho.matrix(), sigma.matrix())?;
            obs.le("trace_vs_hs_distance", (dt - eps).powi(2), r_eps * hs, 1e-9);
        }
    }
    for kind in MetricKind::ALL {
        let back = fidelity::metric_inverse(kind, fidelity::metric(kind, f)?)?;
        obs.le("metric_round_trip", (back - f).abs(), 0.0, 1e-9);
    }
    Ok(())
}

fn truncation_checks(obs: &mut Observations, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    let f = fidelity::fidelity(rho, sigma)?;
    let diag = vqsd::exact_diagonalization(rho)?;
    let spec = fidelity_spectrum(rho, sigma, &diag, rho.dim(), &SpectrumOptions::exact())?;
    for r in &spec.reports {
        obs.le("tfb_lower", r.tfb_low, f, 1e-8);
        obs.le("tfb_upper", f, r.tfb_up, 1e-8);
        obs.le("tfb_looseness", r.tfb_up - r.tfb_low, r.eps_m_prime.max(0.0).sqrt(), 1e-9);
        obs.le("certified_ordered", r.certified_low, r.certified_up, 1e-9);
    }
    for w in spec.reports.windows(2) {
        obs.le("tfb_lower_monotone", w[0].tfb_low, w[1].tfb_low, 1e-10);
        obs.le("tfb_upper_monotone", w[1].tfb_up, w[0].tfb_up, 1e-10);
    }
    let at_rank = &spec.reports[rho.rank() - 1];
    obs.le("tfb_exact_at_rank", (at_rank.tfb_low - f).abs(), 0.0, 1e-7);
    Ok(())
}

fn vqsd_checks(obs: &mut Observations, rho: &DensityMatrix, sigma: &DensityMatrix, seed: u64) -> Result<()> {
    let strength = seeds::rng(seeds::derive(seed, &[8])).random_range(0.0..0.1);
    let res = vqsd::perturbed_diagonalization(rho, strength, seeds::derive(seed, &[9]))?;
    let hs = qmat::hs_distance(rho.matrix(), res.rho_prime.matrix())?;
    obs.le("cost_equals_hs_distance", (res.cost - hs).abs(), 0.0, 1e-10);
    let r = rho.eigenvalues();
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..r.len() {
        a += r[k];
        b += res.spectrum[k];
        obs.le("majorization", b, a, 1e-9);
    }
    for eps in [0.01, 0.05, 0.1] {
        obs.le(
            "inferred_rank_bound",
            epsilon_rank_of_spectrum(r, eps) as f64,
            epsilon_rank_of_spectrum(&res.spectrum, eps) as f64,
            0.0,
        );
    }
    for m in 1..=r.len() {
        let eps_m: f64 = r[m..].iter().map(|x| x.max(0.0)).sum();
        obs.le("inferred_tail_bound", res.tail(m), eps_m + (m as f64 * res.cost).sqrt(), 1e-9);
    }
    let err: f64 = r.iter().zip(&res.spectrum).map(|(x, y)| (x - y).powi(2)).sum();
    obs.le("eigenvalue_error_bound", err, res.cost, 1e-9);

    let f = fidelity::fidelity(rho, sigma)?;
    let spec = fidelity_spectrum(rho, sigma, &res, rho.dim(), &SpectrumOptions::exact())?;
    for rep in &spec.reports {
        obs.le("certified_lower", rep.certified_low, f, 1e-8);
        obs.le("certified_upper", f, rep.certified_up, 1e-8);
        obs.le("tfb_looseness_prime", rep.tfb_up - rep.tfb_low, rep.eps_m_prime.max(0.0).sqrt(), 1e-9);
    }
    for w in spec.reports.windows(2) {
        let (a, b) = (w[0].certified_interval(), w[1].certified_interval());
        obs.le("certified_width_monotone", b.width(), a.width(), 1e-9);
    }
    Ok(())
}

fn measure_checks(
    obs: &mut Observations,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    seed: u64,
    repair: RepairStrategy,
) -> Result<()> {
    let spec = rho.spectrum();
    let d = rho.dim();
    let sampling = Sampling::Shots(SUITE_SHOTS);
    let table = measure::elements_sampled(sigma, &spec.eigenvectors, d, sampling, seed)?;
    let herm = qmat::max_abs_diff(&table.entries, &table.entries.adjoint());
    obs.le("table_hermitian", herm, 0.0, 0.0);
    let tol = 3.0 / (SUITE_SHOTS as f64).sqrt();
    for k in 0..d {
        let x = table.entries[(k, k)].re;
        obs.le("table_diagonal_range_low", -tol, x, 0.0);
        obs.le("table_diagonal_range_high", x, 1.0 + tol, 0.0);
    }
    let shorter = measure::elements_sampled(sigma, &spec.eigenvectors, d - 1, sampling, seed)?;
    let grown = measure::extend_elements(&shorter, sigma, &spec.eigenvectors)?;
    obs.holds("extension_replay", grown == table);
    obs.holds(
        "extension_keeps_entries",
        grown.entries.view((0, 0), (d - 1, d - 1)) == shorter.entries,
    );

    let t = measure::assemble_t_with(&table, &spec.eigenvalues, repair)?;
    let min = t.eigenvalues.last().copied().unwrap_or(0.0);
    obs.le("repaired_t_psd", -min, 0.0, 1e-10);
    if t.repair_applied {
        let bias = (&t.repaired - &t.raw).norm();
        obs.le("repair_bias", bias, t.min_raw_eigenvalue.abs() * (d as f64).sqrt(), 1e-12);
    } else {
        obs.le("repair_identity", qmat::max_abs_diff(&t.repaired, &t.raw), 0.0, 0.0);
    }

    let f = fidelity::fidelity(rho, sigma)?;
    let exact = measure::elements_exact(sigma, &spec.eigenvectors, rho.rank())?;
    let te = measure::assemble_t(&exact, &spec.eigenvalues)?;
    obs.le("t_trace_root_equals_fidelity", (qmat::sum_sqrt(&te.eigenvalues) - f).abs(), 0.0, 1e-8);
    obs.holds("exact_t_needs_no_repair", !te.repair_applied);
    Ok(())
}

fn instance(cfg: &ExperimentConfig, index: usize) -> Result<Observations> {
    let c = &cfg.property_suite;
    let d = c.dims[index % c.dims.len()];
    let seed = seeds::derive(cfg.seed, &[index as u64]);
    let mut obs = Observations::default();
    let (rho, sigma) = random_pair(seeds::derive(seed, &[0]), d)?;
    qmat_checks(&mut obs, seeds::derive(seed, &[1]), d)?;
    fidelity_checks(&mut obs, &rho, &sigma, seeds::derive(seed, &[2]))?;
    truncation_checks(&mut obs, &rho, &sigma)?;
    vqsd_checks(&mut obs, &rho, &sigma, seeds::derive(seed, &[3]))?;
    let repair = if c.fault_injection {
        RepairStrategy::None
    } else {
        RepairStrategy::FrobeniusClip
    };
    measure_checks(&mut obs, &rho, &sigma, seeds::derive(seed, &[4]), repair)?;
    Ok(obs)
}

pub fn run_property_suite(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let all = (0..cfg.property_suite.instances)
        .into_par_iter()
        .map(|k| instance(cfg, k))
        .collect::<Result<Vec<_>>>()?;
    let mut merged: BTreeMap<&'static str, CheckResult> = BTreeMap::new();
    for obs in &all {
        let mut seen: Vec<&'static str> = Vec::new();
        for &(name, slack, tol) in &obs.0 {
            let entry = merged.entry(name).or_insert_with(|| CheckResult {
                name: name.to_string(),
                instances: 0,
                violations: 0,
                worst_slack: f64::INFINITY,
                tolerance: tol,
            });
            if !seen.contains(&name) {
                entry.instances += 1;
                seen.push(name);
            }
            if slack < -tol {
                entry.violations += 1;
            }
            entry.worst_slack = entry.worst_slack.min(slack);
        }
    }
    let mut record = RunRecord::new(cfg);
    record.checks = merged.into_values().collect();
    Ok(record)
}

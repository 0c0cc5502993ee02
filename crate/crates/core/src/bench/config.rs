//! Experiment configuration, read from TOML.
//!
//! Every table and key is optional except `experiment`; unknown keys are
//! rejected. A minimal file:
//!
//! ```toml
//! experiment = "bounds_vs_m"
//! seed = 7
//!
//! [bounds_vs_m]
//! n_qubits = 3
//! rho = { kind = "tensor", factor_ranks = [2, 2, 1] }
//! sigma = { kind = "rank", rank = 8 }
//! diagonalization = { kind = "variational", layers = 1, entangling = false }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::MAX_DIM;
use crate::states::SpinConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BoundsVsM,
    MstarScaling,
    IsingSweep,
    PropertySuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BoundsVsM => "bounds_vs_m",
            Experiment::MstarScaling => "mstar_scaling",
            Experiment::IsingSweep => "ising_sweep",
            Experiment::PropertySuite => "property_suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Sampled,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// How a random state is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `GG†/Tr` with `G` a `d × rank` Ginibre matrix.
    Rank { rank: usize },
    /// Fixed purity in a Haar-random basis.
    Purity { purity: f64 },
    /// Product of single-qubit states with the given ranks (1 or 2).
    Tensor { factor_ranks: Vec<usize> },
}

impl StateSpec {
    fn validate(&self, n_qubits: usize, what: &str) -> Result<()> {
        let d = 1usize << n_qubits;
        let bad = |msg: String| Err(Error::InvalidArgument(format!("{what}: {msg}")));
        match self {
            StateSpec::Rank { rank } if *rank == 0 || *rank > d => bad(format!("rank {rank} outside 1..={d}")),
            StateSpec::Purity { purity } if !(*purity >= 1.0 / d as f64 && *purity <= 1.0) => {
                bad(format!("purity {purity} outside [1/{d}, 1]"))
            }
            StateSpec::Tensor { factor_ranks } if factor_ranks.len() != n_qubits => {
                bad(format!("{} factor ranks for {n_qubits} qubits", factor_ranks.len()))
            }
            StateSpec::Tensor { factor_ranks } if factor_ranks.iter().any(|&r| r == 0 || r > 2) => {
                bad("factor ranks must be 1 or 2".into())
            }
            _ => Ok(()),
        }
    }
}

/// How ρ is diagonalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagSpec {
    Exact,
    /// Exact eigenbasis rotated by `exp(i s H)` for a random unit-norm `H`.
    Perturbed { strength: f64 },
    Variational {
        #[serde(default = "one")]
        layers: usize,
        #[serde(default)]
        entangling: bool,
        #[serde(default = "default_max_evals")]
        max_evals: usize,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
}

fn one() -> usize {
    1
}
fn default_max_evals() -> usize {
    20_000
}
fn default_restarts() -> usize {
    3
}

impl DiagSpec {
    fn validate(&self) -> Result<()> {
        match self {
            DiagSpec::Perturbed { strength } if !(*strength >= 0.0 && strength.is_finite()) => Err(
                Error::InvalidArgument(format!("perturbation strength {strength} must be finite and ≥ 0")),
            ),
            DiagSpec::Variational { layers, max_evals, restarts, .. }
                if *layers == 0 || *max_evals == 0 || *restarts == 0 =>
            {
                Err(Error::InvalidArgument(
                    "variational layers, max_evals and restarts must be positive".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsVsMConfig {
    pub n_qubits: usize,
    pub rho: StateSpec,
    pub sigma: StateSpec,
    pub diagonalization: DiagSpec,
    /// Defaults to the full dimension.
    pub m_max: Option<usize>,
    /// Pass rank(ρ) to the certified bounds as a promise.
    pub known_rank: bool,
    pub trials: usize,
}

impl Default for BoundsVsMConfig {
    fn default() -> Self {
        Self {
            n_qubits: 3,
            rho: StateSpec::Tensor {
                factor_ranks: vec![2, 2, 1],
            },
            sigma: StateSpec::Rank { rank: 8 },
            diagonalization: DiagSpec::Variational {
                layers: 1,
                entangling: false,
                max_evals: default_max_evals(),
                restarts: default_restarts(),
            },
            m_max: None,
            known_rank: false,
            trials: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// rank(ρ) = n.
    LowRank,
    /// Purity of ρ uniform on `[1/n, 1)`.
    HighPurity,
}

/// Which sides must beat the SSFB interval for a level to count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tightness {
    #[default]
    Both,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MstarConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub trials: usize,
    pub ensemble: Ensemble,
    pub strength: f64,
    pub tightness: Tightness,
}

impl Default for MstarConfig {
    fn default() -> Self {
        Self {
            n_min: 2,
            n_max: 5,
            trials: 100,
            ensemble: Ensemble::LowRank,
            strength: 0.01,
            tightness: Tightness::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsingSweepConfig {
    pub n_spins: usize,
    pub j: f64,
    pub beta: f64,
    pub dh: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_step: f64,
    pub m_max: usize,
    pub cyclic: bool,
    pub convention: SpinConvention,
    pub diagonalization: DiagSpec,
    /// Refuse grids with more points than this.
    pub max_points: usize,
}

impl Default for IsingSweepConfig {
    fn default() -> Self {
        Self {
            n_spins: 8,
            j: 1.0,
            beta: 10.0,
            dh: 0.01,
            h_min: 0.5,
            h_max: 1.5,
            h_step: 0.02,
            m_max: 5,
            cyclic: true,
            convention: SpinConvention::Pauli,
            diagonalization: DiagSpec::Exact,
            max_points: 1001,
        }
    }
}

impl IsingSweepConfig {
    /// `h_min + k·h_step` up to `h_max`, computed by index to avoid drift.
    pub fn grid(&self) -> Vec<f64> {
        let count = ((self.h_max - self.h_min) / self.h_step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.h_min + k as f64 * self.h_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub instances: usize,
    /// Measure `T` with few shots and skip the PSD repair, which must be caught.
    pub fault_injection: bool,
    pub dims: Vec<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            instances: 500,
            fault_injection: false,
            dims: vec![2, 4, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub bounds_vs_m: BoundsVsMConfig,
    #[serde(default)]
    pub mstar_scaling: MstarConfig,
    #[serde(default)]
    pub ising_sweep: IsingSweepConfig,
    #[serde(default)]
    pub property_suite: SuiteConfig,
}

fn default_shots() -> u64 {
    10_000
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            mode: Mode::Exact,
            shots: default_shots(),
            output: None,
            format: Format::Csv,
            bounds_vs_m: BoundsVsMConfig::default(),
            mstar_scaling: MstarConfig::default(),
            ising_sweep: IsingSweepConfig::default(),
            property_suite: SuiteConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.mode == Mode::Sampled && self.shots == 0 {
            return invalid("sampled mode needs shots ≥ 1".into());
        }
        match self.experiment {
            Experiment::BoundsVsM => {
                let c = &self.bounds_vs_m;
                if c.n_qubits == 0 || (1usize << c.n_qubits.min(30)) > MAX_DIM {
                    return invalid(format!("n_qubits {} outside 1..=12", c.n_qubits));
                }
                let d = 1usize << c.n_qubits;
                c.rho.validate(c.n_qubits, "rho")?;
                c.sigma.validate(c.n_qubits, "sigma")?;
                c.diagonalization.validate()?;
                if let Some(m) = c.m_max {
                    if m == 0 || m > d {
                        return invalid(format!("m_max {m} outside 1..={d}"));
                    }
                }
                if c.trials == 0 {
                    return invalid("trials must be ≥ 1".into());
                }
            }
            Experiment::MstarScaling => {
                let c = &self.mstar_scaling;
                if c.n_min == 0 || c.n_min > c.n_max || (1usize << c.n_max.min(30)) > MAX_DIM {
                    return invalid(format!("qubit range {}..={} is invalid", c.n_min, c.n_max));
                }
                if c.ensemble == Ensemble::LowRank && c.n_min < 1 {
                    return invalid("low-rank ensemble needs n ≥ 1".into());
                }
                if c.trials == 0 {
                    return invalid("trials must be ≥ 1".into());
                }
                if !(c.strength >= 0.0 && c.strength.is_finite()) {
                    return invalid(format!("strength {} must be finite and ≥ 0", c.strength));
                }
            }
            Experiment::IsingSweep => {
                let c = &self.ising_sweep;
                if c.n_spins < 2 || (1usize << c.n_spins.min(30)) > MAX_DIM {
                    return invalid(format!("n_spins {} outside 2..=12", c.n_spins));
                }
                let finite = [c.j, c.beta, c.dh, c.h_min, c.h_max, c.h_step];
                if finite.iter().any(|x| !x.is_finite()) {
                    return invalid("Ising parameters must be finite".into());
                }
                if !(c.beta > 0.0 && c.h_step > 0.0 && c.dh != 0.0 && c.h_max >= c.h_min) {
                    return invalid("need beta > 0, h_step > 0, dh ≠ 0 and h_max ≥ h_min".into());
                }
                if c.m_max == 0 || c.m_max > 1 << c.n_spins {
                    return invalid(format!("m_max {} outside 1..={}", c.m_max, 1usize << c.n_spins));
                }
                let points = c.grid().len();
                if points > c.max_points {
                    return invalid(format!("grid has {points} points, limit is {}", c.max_points));
                }
                c.diagonalization.validate()?;
            }
            Experiment::PropertySuite => {
                let c = &self.property_suite;
                if c.instances == 0 {
                    return invalid("instances must be ≥ 1".into());
                }
                if c.dims.is_empty() || c.dims.iter().any(|&d| d < 2 || !d.is_power_of_two() || d > 64) {
                    return invalid("suite dims must be powers of two in 2..=64".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_example_parses() {
        let text = r#"
experiment = "bounds_vs_m"
seed = 7

[bounds_vs_m]
n_qubits = 3
rho = { kind = "tensor", factor_ranks = [2, 2, 1] }
sigma = { kind = "rank", rank = 8 }
diagonalization = { kind = "variational", layers = 1, entangling = false }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.bounds_vs_m, BoundsVsMConfig::default());
    }

    #[test]
    fn unknown_and_invalid_fields_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"ising_sweep\"\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1").is_err());
        let bad_rank = "experiment = \"bounds_vs_m\"\n[bounds_vs_m]\nrho = { kind = \"rank\", rank = 9 }";
        assert!(ExperimentConfig::from_toml(bad_rank).is_err());
        let bad_grid = "experiment = \"ising_sweep\"\n[ising_sweep]\nh_step = 0.0";
        assert!(ExperimentConfig::from_toml(bad_grid).is_err());
        let too_fine = "experiment = \"ising_sweep\"\n[ising_sweep]\nh_step = 1e-6";
        assert!(ExperimentConfig::from_toml(too_fine).is_err());
        let nested = "experiment = \"ising_sweep\"\n[ising_sweep]\ntypo = 3";
        assert!(ExperimentConfig::from_toml(nested).is_err());
        let sampled = "experiment = \"property_suite\"\nmode = \"sampled\"\nshots = 0";
        assert!(ExperimentConfig::from_toml(sampled).is_err());
    }

    #[test]
    fn toml_round_trip() {
        for e in [
            Experiment::BoundsVsM,
            Experiment::MstarScaling,
            Experiment::IsingSweep,
            Experiment::PropertySuite,
        ] {
            let cfg = ExperimentConfig::new(e);
            let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn ising_grid() {
        let g = IsingSweepConfig::default().grid();
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.5);
        assert!((g[50] - 1.5).abs() < 1e-12);
    }
}

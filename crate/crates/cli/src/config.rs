//! Versioned JSON experiment configuration.

use std::path::Path;

use qdmd_core::bloch::{
    vectorize_dissipator, vectorize_hamiltonian, BasisConvention, HermitianBasis,
};
use qdmd_core::dmd::ControlPairing;
use qdmd_core::linalg::{CMat, Vector};
use qdmd_core::nalgebra::DVector;
use qdmd_core::num_complex::Complex64;
use qdmd_core::simulator::{BilinearSystem, ControlSignal, DEFAULT_SUBSTEPS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub system: SystemSpec,
    #[serde(default)]
    pub controls: Vec<ControlSignal>,
    pub sampling: SamplingSpec,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// `H(t) = Σ_j h_j σ_j + Σ_k u_k(t) Σ_j h^k_j σ_j` in a named basis, with an
/// optional diagonal dissipator over the orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default = "default_basis")]
    pub basis: BasisConvention,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub drift: Vec<f64>,
    #[serde(default)]
    pub controls: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation_rates: Option<Vec<f64>>,
}

fn default_basis() -> BasisConvention {
    BasisConvention::StandardPauli
}

fn default_dimension() -> usize {
    2
}

/// Output grid: either `dt` and `t_end`, or `period`, `samples_per_period`
/// and `periods`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Dmd {
        #[serde(default)]
        rank: Option<usize>,
    },
    Dmdc {
        #[serde(default)]
        rank: Option<usize>,
    },
    Bidmd {
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default)]
        rank_hat: Option<usize>,
        #[serde(default)]
        pairing: ControlPairing,
    },
    Floquet {
        #[serde(default)]
        rank: Option<usize>,
        samples_per_period: usize,
        /// Taken from the trajectory header when absent.
        #[serde(default)]
        period: Option<f64>,
    },
    Aht {
        harmonics: usize,
        omega: f64,
        degree: usize,
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default)]
        rank_hat: Option<usize>,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Dmd { .. } => "dmd",
            AlgorithmSpec::Dmdc { .. } => "dmdc",
            AlgorithmSpec::Bidmd { .. } => "bidmd",
            AlgorithmSpec::Floquet { .. } => "floquet",
            AlgorithmSpec::Aht { .. } => "aht",
        }
    }

    /// Apply `--rank` / `--rank-hat` overrides.
    pub fn with_ranks(mut self, r: Option<usize>, rh: Option<usize>) -> CliResult<Self> {
        match &mut self {
            AlgorithmSpec::Dmd { rank }
            | AlgorithmSpec::Dmdc { rank }
            | AlgorithmSpec::Floquet { rank, .. } => {
                if rh.is_some() {
                    return Err(CliError::config(format!(
                        "--rank-hat does not apply to {}",
                        self.name()
                    )));
                }
                if r.is_some() {
                    *rank = r;
                }
            }
            AlgorithmSpec::Bidmd { rank, rank_hat, .. }
            | AlgorithmSpec::Aht { rank, rank_hat, .. } => {
                if r.is_some() {
                    *rank = r;
                }
                if rh.is_some() {
                    *rank_hat = rh;
                }
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// Resolved output grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub substeps: usize,
    pub period: Option<f64>,
}

impl SamplingSpec {
    pub fn resolve(&self) -> CliResult<Grid> {
        let bad = |m: &str| CliError::config(format!("sampling: {m}"));
        let from_period =
            self.period.is_some() || self.samples_per_period.is_some() || self.periods.is_some();
        let (dt, t_end, period) = if from_period {
            if self.dt.is_some() || self.t_end.is_some() {
                return Err(bad(
                    "give either dt/t_end or period/samples_per_period/periods, not both",
                ));
            }
            let (Some(p), Some(s), Some(n)) = (self.period, self.samples_per_period, self.periods)
            else {
                return Err(bad(
                    "period, samples_per_period and periods must be given together",
                ));
            };
            if !(p > 0.0 && p.is_finite()) || s == 0 {
                return Err(bad("period and samples_per_period must be positive"));
            }
            (p / s as f64, self.t0 + n as f64 * p, Some(p))
        } else {
            let (Some(dt), Some(t_end)) = (self.dt, self.t_end) else {
                return Err(bad("dt and t_end are required"));
            };
            (dt, t_end, None)
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(bad("dt must be positive"));
        }
        if !(t_end >= self.t0) {
            return Err(bad("t_end must not precede t0"));
        }
        if self.substeps == 0 {
            return Err(bad("substeps must be positive"));
        }
        Ok(Grid {
            t0: self.t0,
            t_end,
            dt,
            substeps: self.substeps,
            period,
        })
    }
}

impl ExperimentConfig {
    /// Parse and validate; errors carry the file name and, for syntax and
    /// schema problems, the line and column.
    pub fn from_json(text: &str, origin: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|e| e.context(origin))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::config(format!(
                "version: unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let sys = &self.system;
        if sys.dimension < 2 {
            return Err(CliError::config("system.dimension: must be at least 2"));
        }
        let d = sys.dimension * sys.dimension - 1;
        if sys.drift.len() != d {
            return Err(CliError::config(format!(
                "system.drift: {} coefficients for a basis of {d} elements",
                sys.drift.len()
            )));
        }
        for (k, c) in sys.controls.iter().enumerate() {
            if c.len() != d {
                return Err(CliError::config(format!(
                    "system.controls[{k}]: {} coefficients for a basis of {d} elements",
                    c.len()
                )));
            }
        }
        if let Some(rates) = &sys.dissipation_rates {
            if rates.len() != d {
                return Err(CliError::config(format!(
                    "system.dissipation_rates: {} rates for a basis of {d} elements",
                    rates.len()
                )));
            }
        }
        if self.controls.len() != sys.controls.len() {
            return Err(CliError::config(format!(
                "controls: {} signals for {} control Hamiltonians",
                self.controls.len(),
                sys.controls.len()
            )));
        }
        if self.initial_state.len() != d {
            return Err(CliError::config(format!(
                "initial_state: length {} for a basis of {d} elements",
                self.initial_state.len()
            )));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(CliError::config("noise.sigma: must be non-negative"));
        }
        self.sampling.resolve()?;
        self.build_system()?;
        Ok(())
    }

    pub fn basis(&self) -> CliResult<HermitianBasis> {
        HermitianBasis::new(self.system.dimension, self.system.basis)
            .map_err(|e| CliError::config(format!("system.basis: {e}")))
    }

    pub fn build_system(&self) -> CliResult<BilinearSystem> {
        let basis = self.basis()?;
        let op = |coeffs: &[f64], field: &str| -> CliResult<CMat> {
            basis
                .combine(coeffs)
                .map_err(|e| CliError::config(format!("{field}: {e}")))
        };
        let mut drift = vectorize_hamiltonian(&op(&self.system.drift, "system.drift")?, &basis)
            .map_err(|e| CliError::config(format!("system.drift: {e}")))?;
        if let Some(rates) = &self.system.dissipation_rates {
            let ortho = HermitianBasis::new(self.system.dimension, BasisConvention::Orthonormal)
                .map_err(|e| CliError::config(format!("system.dissipation_rates: {e}")))?;
            let c = CMat::from_diagonal(&nalgebra_vector(rates));
            let diss = vectorize_dissipator(&c, ortho.matrices(), &basis)
                .map_err(|e| CliError::config(format!("system.dissipation_rates: {e}")))?;
            drift = drift.sum(&diss)?;
        }
        let mut controls = Vec::with_capacity(self.system.controls.len());
        for (k, c) in self.system.controls.iter().enumerate() {
            let field = format!("system.controls[{k}]");
            controls.push(
                vectorize_hamiltonian(&op(c, &field)?, &basis)
                    .map_err(|e| CliError::config(format!("{field}: {e}")))?,
            );
        }
        Ok(BilinearSystem::new(drift, controls)?)
    }

    pub fn x0(&self) -> Vector {
        Vector::from_vec(self.initial_state.clone())
    }
}

fn nalgebra_vector(v: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(v.len(), v.iter().map(|r| Complex64::new(*r, 0.0)))
}

#[cfg(test)]
/// The single-drive qubit `πσ3 + u(t)σ1` with a pure tone.
pub fn driven_qubit_config(
    frequency: f64,
    amplitude: f64,
    sampling: SamplingSpec,
    noise: NoiseSpec,
) -> ExperimentConfig {
    ExperimentConfig {
        version: CONFIG_VERSION,
        system: SystemSpec {
            basis: BasisConvention::StandardPauli,
            dimension: 2,
            drift: vec![0.0, 0.0, std::f64::consts::PI],
            controls: vec![vec![1.0, 0.0, 0.0]],
            dissipation_rates: None,
        },
        controls: vec![ControlSignal::pure_tone(frequency, amplitude)],
        sampling,
        initial_state: vec![0.0, 0.0, 1.0],
        noise,
        algorithm: None,
        output: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ExperimentConfig {
        let mut c = driven_qubit_config(
            1.1,
            1.0,
            SamplingSpec {
                t0: 0.0,
                dt: None,
                t_end: None,
                period: Some(1.0),
                samples_per_period: Some(16),
                periods: Some(5),
                substeps: 64,
            },
            NoiseSpec {
                sigma: 0.01,
                seed: 3,
            },
        );
        c.algorithm = Some(AlgorithmSpec::Bidmd {
            rank: None,
            rank_hat: Some(3),
            pairing: ControlPairing::Trapezoid,
        });
        c
    }

    #[test]
    fn round_trip() {
        let c = example();
        let back = ExperimentConfig::from_json(&c.to_json(), "mem").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_field_reports_position() {
        let text = c_text().replace("\"drift\"", "\"drfit\"");
        let err = ExperimentConfig::from_json(&text, "cfg.json").unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message.starts_with("cfg.json:"), "{}", err.message);
        assert!(err.message.contains("drfit"));
    }

    fn c_text() -> String {
        example().to_json()
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut c = example();
        c.system.drift.push(0.0);
        let err = c.validate().unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message.contains("system.drift"));
    }

    #[test]
    fn grid_from_period() {
        let g = example().sampling.resolve().unwrap();
        assert_eq!(g.dt, 1.0 / 16.0);
        assert_eq!(g.t_end, 5.0);
        assert_eq!(g.period, Some(1.0));
    }

    #[test]
    fn rank_overrides() {
        let a = example()
            .algorithm
            .unwrap()
            .with_ranks(Some(4), Some(2))
            .unwrap();
        assert_eq!(
            a,
            AlgorithmSpec::Bidmd {
                rank: Some(4),
                rank_hat: Some(2),
                pairing: ControlPairing::Trapezoid
            }
        );
        assert!(AlgorithmSpec::Dmd { rank: None }
            .with_ranks(None, Some(1))
            .is_err());
    }

    #[test]
    fn negative_rate_rejected() {
        let mut c = example();
        c.system.dissipation_rates = Some(vec![0.1, -0.5, 0.0]);
        assert_eq!(c.validate().unwrap_err().code(), 2);
    }
}

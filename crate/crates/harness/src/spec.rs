use std::path::PathBuf;

use onebit_core::altopt::{AltOptConfig, Backend};
use onebit_core::mimo::DEFAULT_ES_CAP_BITS;
use onebit_core::solvers::{SolverConfig, TemperatureSchedule, DEFAULT_EXACT_CAP};
use onebit_core::spectral::{AnnealSchedule, DEFAULT_QUBIT_CAP};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SnrSweep,
    SolutionHistogram,
    CompandingStudy,
    GapStudy,
    TtsCurve,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SnrSweep => "snr-sweep",
            ExperimentKind::SolutionHistogram => "solution-histogram",
            ExperimentKind::CompandingStudy => "companding-study",
            ExperimentKind::GapStudy => "gap-study",
            ExperimentKind::TtsCurve => "tts-curve",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Exact,
    Annealed,
}

/// Alternating-design settings; unset fields fall back to K = L = 8, δ = 0.01.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltOptSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_anneals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps_per_anneal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_schedule: Option<TemperatureSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

/// Default coefficient noise on the max-norm-one scale.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.02;
pub const DEFAULT_MU: f64 = 255.0;

/// One experiment. Unset fields take per-kind defaults; `seed` is mandatory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rx: Option<usize>,
    /// Symmetric sizes `N_T = N_R` for the TTS curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
    /// Channels, QUBO instances or Ising instances, depending on the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_size: Option<usize>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub altopt: AltOptSpec,
    #[serde(default, skip_serializing_if = "is_default")]
    pub solver: SolverSpec,
    /// μ of the companded arm (or of the alternating design in a sweep).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Problem dimension for QUBO and Ising studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AnnealSchedule>,
    /// Distinct-solution target for the noise calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distinct: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal_time_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub es_cap_bits: Option<usize>,
    /// Copied into provenance verbatim; never read from the clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

fn is_default<T: Default + PartialEq>(x: &T) -> bool {
    *x == T::default()
}

fn field(path: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Spec {
        field: path.to_string(),
        reason: reason.into(),
    }
}

fn positive(path: &str, v: Option<usize>) -> Result<()> {
    if v == Some(0) {
        return Err(field(path, "must be at least 1"));
    }
    Ok(())
}

fn positive_real(path: &str, v: Option<f64>) -> Result<()> {
    if let Some(x) = v {
        if !(x > 0.0 && x.is_finite()) {
            return Err(field(path, "must be positive and finite"));
        }
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            output_dir: None,
            n_tx: None,
            n_rx: None,
            sizes: None,
            powers_db: None,
            noise_var: None,
            ensemble_size: None,
            altopt: AltOptSpec::default(),
            solver: SolverSpec::default(),
            mu: None,
            qubits: None,
            grid_points: None,
            schedule: None,
            min_distinct: None,
            anneal_time_us: None,
            es_cap_bits: None,
            timestamp: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let reason = e.into_inner().to_string();
            // Missing fields are reported against their parent; name them.
            let missing = reason
                .strip_prefix("missing field `")
                .and_then(|r| r.split('`').next())
                .map(|name| match path.as_str() {
                    "." => name.to_string(),
                    parent => format!("{parent}.{name}"),
                });
            field(&missing.unwrap_or(path), reason)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization is infallible")
    }

    pub fn n_tx(&self) -> usize {
        let default = match self.kind {
            ExperimentKind::SolutionHistogram => 4,
            _ => 2,
        };
        self.n_tx.unwrap_or(default)
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx.unwrap_or_else(|| self.n_tx())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| vec![3, 4, 5, 6])
    }

    pub fn powers_db(&self) -> Vec<f64> {
        self.powers_db
            .clone()
            .unwrap_or_else(|| vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0])
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var.unwrap_or(1.0)
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size.unwrap_or(match self.kind {
            ExperimentKind::SnrSweep => 1000,
            ExperimentKind::SolutionHistogram => 1,
            ExperimentKind::CompandingStudy => 50,
            ExperimentKind::GapStudy => 100,
            ExperimentKind::TtsCurve => 20,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(DEFAULT_MU)
    }

    pub fn qubits(&self) -> usize {
        self.qubits.unwrap_or(match self.kind {
            ExperimentKind::GapStudy => 5,
            _ => 24,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(64)
    }

    pub fn schedule(&self) -> AnnealSchedule {
        self.schedule.clone().unwrap_or_default()
    }

    pub fn min_distinct(&self) -> usize {
        self.min_distinct.unwrap_or(100)
    }

    pub fn anneal_time_us(&self) -> f64 {
        self.anneal_time_us.unwrap_or(1.0)
    }

    pub fn es_cap_bits(&self) -> usize {
        self.es_cap_bits.unwrap_or(DEFAULT_ES_CAP_BITS)
    }

    /// Annealer settings with the seed left at zero; callers key it.
    pub fn solver_config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            num_anneals: self.solver.num_anneals.unwrap_or(d.num_anneals),
            sweeps_per_anneal: self.solver.sweeps_per_anneal.unwrap_or(d.sweeps_per_anneal),
            temperature_schedule: self.solver.temperature_schedule.unwrap_or(d.temperature_schedule),
            noise_sigma: self.solver.noise_sigma.unwrap_or(DEFAULT_NOISE_SIGMA),
            seed: 0,
        }
    }

    pub fn altopt_config(&self) -> AltOptConfig {
        let solver = match self.altopt.backend.unwrap_or(BackendKind::Exact) {
            BackendKind::Exact => Backend::Exact,
            BackendKind::Annealed => Backend::Annealed(self.solver_config()),
        };
        AltOptConfig {
            restarts: self.altopt.restarts.unwrap_or(8),
            max_iters: self.altopt.max_iters.unwrap_or(8),
            rel_tol: self.altopt.rel_tol.unwrap_or(0.01),
            solver,
            companding: self.mu,
            seed: self.seed,
        }
    }

    /// Checks every field the kind reads, including caps, before any work.
    pub fn validate(&self) -> Result<()> {
        positive("n_tx", self.n_tx)?;
        positive("n_rx", self.n_rx)?;
        positive("ensemble_size", self.ensemble_size)?;
        positive("altopt.restarts", self.altopt.restarts)?;
        positive("altopt.max_iters", self.altopt.max_iters)?;
        positive_real("altopt.rel_tol", self.altopt.rel_tol)?;
        positive("solver.num_anneals", self.solver.num_anneals)?;
        positive("solver.sweeps_per_anneal", self.solver.sweeps_per_anneal)?;
        if let Some(s) = self.solver.noise_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(field("solver.noise_sigma", "must be finite and >= 0"));
            }
        }
        self.solver_config()
            .validate()
            .map_err(|e| field("solver.temperature_schedule", e.to_string()))?;
        positive_real("noise_var", self.noise_var)?;
        positive_real("mu", self.mu)?;
        positive_real("anneal_time_us", self.anneal_time_us)?;
        positive("qubits", self.qubits)?;
        positive("min_distinct", self.min_distinct)?;
        if let Some(p) = &self.powers_db {
            if p.is_empty() {
                return Err(field("powers_db", "must not be empty"));
            }
            if let Some(i) = p.iter().position(|x| !x.is_finite()) {
                return Err(field(&format!("powers_db[{i}]"), "must be finite"));
            }
        }
        if let Some(g) = self.grid_points {
            if g < 2 {
                return Err(field("grid_points", "must be at least 2"));
            }
        }

        match self.kind {
            ExperimentKind::SnrSweep => {
                // Sizes beyond the ES cap only drop the ES column.
                let dim = 2 * self.n_tx().max(self.n_rx());
                if self.altopt.backend != Some(BackendKind::Annealed) && dim > DEFAULT_EXACT_CAP {
                    return Err(field(
                        "n_tx",
                        format!("exact subproblems of dimension {dim} exceed the cap {DEFAULT_EXACT_CAP}"),
                    ));
                }
            }
            ExperimentKind::SolutionHistogram => {
                let dim = 2 * self.n_tx();
                if dim > DEFAULT_EXACT_CAP {
                    return Err(field(
                        "n_tx",
                        format!("ground-state check of dimension {dim} exceeds the cap {DEFAULT_EXACT_CAP}"),
                    ));
                }
            }
            ExperimentKind::CompandingStudy => {
                if self.qubits() > DEFAULT_EXACT_CAP {
                    return Err(field(
                        "qubits",
                        format!("exceeds the exact-solver cap {DEFAULT_EXACT_CAP}"),
                    ));
                }
            }
            ExperimentKind::GapStudy => {
                if self.qubits() > DEFAULT_QUBIT_CAP {
                    return Err(field("qubits", format!("exceeds the qubit cap {DEFAULT_QUBIT_CAP}")));
                }
            }
            ExperimentKind::TtsCurve => {
                let sizes = self.sizes();
                if sizes.is_empty() {
                    return Err(field("sizes", "must not be empty"));
                }
                for (i, &n) in sizes.iter().enumerate() {
                    if n == 0 || 2 * n > DEFAULT_EXACT_CAP {
                        return Err(field(
                            &format!("sizes[{i}]"),
                            format!("must lie in 1..={}", DEFAULT_EXACT_CAP / 2),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::SolutionHistogram;
use crate::error::{Error, Result};
use crate::qubo::{inject_ice_noise, QuboProblem};
use crate::rng::{derive_seed, keyed_rng, tag};

/// Temperature ladder for one anneal, one temperature per sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemperatureSchedule {
    /// Geometric from `2·‖Q‖_max` down to `0.01·‖Q‖_max`.
    Auto,
    Geometric {
        start: f64,
        end: f64,
    },
}

impl TemperatureSchedule {
    fn endpoints(&self, q: &QuboProblem) -> (f64, f64) {
        match *self {
            TemperatureSchedule::Auto => {
                let m = q.max_abs();
                let m = if m > 0.0 { m } else { 1.0 };
                (2.0 * m, 0.01 * m)
            }
            TemperatureSchedule::Geometric { start, end } => (start, end),
        }
    }

    fn validate(&self) -> Result<()> {
        if let TemperatureSchedule::Geometric { start, end } = *self {
            if !(start > end && end > 0.0 && start.is_finite()) {
                return Err(Error::invalid(
                    "temperature_schedule",
                    format!("need start > end > 0, got start={start}, end={end}"),
                ));
            }
        }
        Ok(())
    }
}

/// Configuration of an anneal ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub num_anneals: usize,
    pub sweeps_per_anneal: usize,
    pub temperature_schedule: TemperatureSchedule,
    /// Standard deviation of the per-anneal coefficient noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            num_anneals: 1000,
            sweeps_per_anneal: 200,
            temperature_schedule: TemperatureSchedule::Auto,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_anneals == 0 {
            return Err(Error::invalid("num_anneals", "must be at least 1"));
        }
        if self.sweeps_per_anneal == 0 {
            return Err(Error::invalid("sweeps_per_anneal", "must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        self.temperature_schedule.validate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Runs `num_anneals` independent single-flip Metropolis chains.
///
/// With `noise_sigma > 0` every anneal optimizes its own perturbed copy
/// `Q + E`; the histogram reports energies of the noiseless `Q`.
pub fn solve_annealed(q: &QuboProblem, cfg: &SolverConfig) -> Result<SolutionHistogram> {
    cfg.validate()?;
    let (t_start, t_end) = cfg.temperature_schedule.endpoints(q);
    let temperatures: Vec<f64> = (0..cfg.sweeps_per_anneal)
        .map(|k| {
            if cfg.sweeps_per_anneal == 1 {
                t_end
            } else {
                let x = k as f64 / (cfg.sweeps_per_anneal - 1) as f64;
                t_start * (t_end / t_start).powf(x)
            }
        })
        .collect();

    let samples: Vec<Vec<u8>> = (0..cfg.num_anneals)
        .into_par_iter()
        .map(|a| -> Result<Vec<u8>> {
            let noisy;
            let target = if cfg.noise_sigma > 0.0 {
                noisy = inject_ice_noise(q, cfg.noise_sigma, derive_seed(cfg.seed, &[tag::ICE_NOISE, a as u64]))?;
                &noisy
            } else {
                q
            };
            let mut rng = keyed_rng(cfg.seed, &[tag::ANNEAL, a as u64]);
            Ok(anneal_once(target, &temperatures, &mut rng))
        })
        .collect::<Result<_>>()?;

    SolutionHistogram::from_samples(samples, |b| q.energy(b))
}

fn anneal_once<R: Rng + ?Sized>(q: &QuboProblem, temperatures: &[f64], rng: &mut R) -> Vec<u8> {
    let n = q.dim();
    let m = q.matrix();
    let flat: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|ij| m[ij])
        .collect();
    let mut bits: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    // field[i] = Σ_{j≠i} Q_ij b_j
    let mut field: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && bits[j] == 1)
                .map(|j| flat[i * n + j])
                .sum()
        })
        .collect();

    for &t in temperatures {
        for i in 0..n {
            let sign = if bits[i] == 0 { 1.0 } else { -1.0 };
            let delta = sign * (flat[i * n + i] + 2.0 * field[i]);
            if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
                bits[i] ^= 1;
                let row = &flat[i * n..(i + 1) * n];
                for (j, f) in field.iter_mut().enumerate() {
                    if j != i {
                        *f += sign * row[j];
                    }
                }
            }
        }
    }
    bits
}

//! Experiment pipelines and their result types.

use onebit_core::altopt::snr_sweep;
use onebit_core::mimo::{
    generate_rayleigh_channel, snr, ChannelEnsemble, CodingPair, CodingVector, ComplexChannel, SnrContext,
};
use onebit_core::qubo::{binary_to_spin, compand, gaussian_qubo, real_embed_precoder, spin_form_to_qubo, QuboProblem};
use onebit_core::rng::{derive_seed, keyed_rng, tag};
use onebit_core::solvers::{bitstring, solve_annealed, solve_exact, SolutionHistogram, SolverConfig};
use onebit_core::spectral::{companding_gap_study, tts, GapStudy, GapStudyConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spec::{ExperimentKind, ExperimentSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub power_db: f64,
    pub snr_es: Option<f64>,
    pub snr_alg1: f64,
    pub snr_rq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub channel: usize,
    pub gain_es: Option<f64>,
    pub gain_alg1: f64,
    pub gain_rq: f64,
    pub ascent_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Mean linear SNR per power level.
    pub rows: Vec<SweepRow>,
    pub channels: Vec<ChannelRow>,
}

/// One distinct solution, ranked by the energy of the uncompanded QUBO.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub rank: usize,
    pub bitstring: String,
    pub energy: f64,
    pub snr: f64,
    pub count: u64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramArm {
    pub rows: Vec<HistogramRow>,
    pub distinct: usize,
    /// Probability of the most frequent solution.
    pub top_probability: f64,
    /// Probability of the uncompanded ground state.
    pub ground_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramResult {
    pub channel: ComplexChannel,
    pub g: CodingVector,
    pub qubo: QuboProblem,
    pub ground_bits: String,
    pub ground_energy: f64,
    pub noise_sigma: f64,
    pub plain: HistogramArm,
    pub companded: HistogramArm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompandingRow {
    pub instance: usize,
    pub sigma: f64,
    /// Whether the plain run reached the distinct-solution target.
    pub calibrated: bool,
    pub distinct_plain: usize,
    pub distinct_companded: usize,
    /// Occurrence of the uncompanded ground state in each run.
    pub p_plain: f64,
    pub p_companded: f64,
    /// Occurrence of the companded problem's own ground state.
    pub p_companded_own: f64,
    /// The companded QUBO has the same ground state.
    pub ground_preserved: bool,
    /// At least five times fewer distinct solutions.
    pub fewer_distinct: bool,
    /// At least three times the ground-state occurrence, and nonzero.
    pub higher_ground: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompandingResult {
    pub rows: Vec<CompandingRow>,
    pub fraction_fewer_distinct: f64,
    pub fraction_higher_ground: f64,
    pub fraction_both: f64,
    pub fraction_ground_preserved: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsRow {
    pub size: usize,
    pub qubo_dim: usize,
    pub channels: usize,
    pub mean_success: f64,
    /// TTS at the mean success probability; `None` when nothing succeeded.
    pub tts_us: Option<f64>,
    pub unsolved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsResult {
    pub anneal_time_us: f64,
    pub rows: Vec<TtsRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentResult {
    SnrSweep(SweepResult),
    SolutionHistogram(HistogramResult),
    CompandingStudy(CompandingResult),
    GapStudy(GapStudy),
    TtsCurve(TtsResult),
}

impl ExperimentResult {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentResult::SnrSweep(_) => ExperimentKind::SnrSweep,
            ExperimentResult::SolutionHistogram(_) => ExperimentKind::SolutionHistogram,
            ExperimentResult::CompandingStudy(_) => ExperimentKind::CompandingStudy,
            ExperimentResult::GapStudy(_) => ExperimentKind::GapStudy,
            ExperimentResult::TtsCurve(_) => ExperimentKind::TtsCurve,
        }
    }
}

pub(crate) fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    Ok(match spec.kind {
        ExperimentKind::SnrSweep => ExperimentResult::SnrSweep(run_sweep(spec)?),
        ExperimentKind::SolutionHistogram => ExperimentResult::SolutionHistogram(run_histogram(spec)?),
        ExperimentKind::CompandingStudy => ExperimentResult::CompandingStudy(run_companding(spec)?),
        ExperimentKind::GapStudy => ExperimentResult::GapStudy(run_gap(spec)?),
        ExperimentKind::TtsCurve => ExperimentResult::TtsCurve(run_tts(spec)?),
    })
}

fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    let ensemble = ChannelEnsemble {
        n_tx: spec.n_tx(),
        n_rx: spec.n_rx(),
        size: spec.ensemble_size(),
        seed: spec.seed,
    };
    let table = snr_sweep(
        &ensemble,
        &spec.powers_db(),
        spec.noise_var(),
        &spec.altopt_config(),
        spec.es_cap_bits(),
    )?;
    Ok(SweepResult {
        rows: table
            .rows
            .iter()
            .map(|r| SweepRow {
                power_db: r.power_db,
                snr_es: r.snr_es,
                snr_alg1: r.snr_alg,
                snr_rq: r.snr_rq,
            })
            .collect(),
        channels: table
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| ChannelRow {
                channel: i,
                gain_es: c.gain_es,
                gain_alg1: c.gain_alg,
                gain_rq: c.gain_rq,
                ascent_violations: c.ascent_violations,
            })
            .collect(),
    })
}

/// Tolerance for matching an energy to the ground energy.
fn energy_tol(q: &QuboProblem) -> f64 {
    1e-9 * (1.0 + q.matrix().iter().map(|x| x.abs()).sum::<f64>())
}

/// Occurrence of a specific bitstring.
fn occurrence(hist: &SolutionHistogram, bits: &[u8]) -> f64 {
    hist.entries()
        .iter()
        .filter(|e| e.bits == bits)
        .map(|e| e.count)
        .sum::<u64>() as f64
        / hist.total_anneals() as f64
}

/// Occurrence of any bitstring at the ground energy of `q`.
fn ground_occurrence(hist: &SolutionHistogram, q: &QuboProblem, ground: f64) -> f64 {
    let tol = energy_tol(q);
    hist.entries()
        .iter()
        .filter(|e| q.energy(&e.bits) <= ground + tol)
        .map(|e| e.count)
        .sum::<u64>() as f64
        / hist.total_anneals() as f64
}

fn histogram_arm(
    hist: &SolutionHistogram,
    q: &QuboProblem,
    ground: f64,
    score: impl Fn(&[u8]) -> Result<f64>,
) -> Result<HistogramArm> {
    let total = hist.total_anneals() as f64;
    let mut rows: Vec<(f64, &[u8], u64)> = hist
        .entries()
        .iter()
        .map(|e| (q.energy(&e.bits), e.bits.as_slice(), e.count))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, (energy, bits, count))| {
            Ok(HistogramRow {
                rank: i + 1,
                bitstring: bitstring(bits),
                energy,
                snr: score(bits)?,
                count,
                probability: count as f64 / total,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let top = hist.entries().iter().map(|e| e.count).max().unwrap_or(0) as f64 / total;
    Ok(HistogramArm {
        distinct: rows.len(),
        rows,
        top_probability: top,
        ground_probability: ground_occurrence(hist, q, ground),
    })
}

fn run_histogram(spec: &ExperimentSpec) -> Result<HistogramResult> {
    let (n_tx, n_rx) = (spec.n_tx(), spec.n_rx());
    let channel = generate_rayleigh_channel(n_tx, n_rx, derive_seed(spec.seed, &[tag::CHANNEL, 0]))?;
    let g = CodingVector::random(n_rx, &mut keyed_rng(spec.seed, &[tag::RESTART, 0]))?;
    let q = spin_form_to_qubo(&real_embed_precoder(&channel, &g)?);
    let c = compand(&q, spec.mu())?;
    let ground = solve_exact(&q)?;
    let cfg = spec.solver_config().with_seed(derive_seed(spec.seed, &[tag::ANNEAL]));
    let ctx = SnrContext::new(1.0, spec.noise_var())?;
    let score = |bits: &[u8]| -> Result<f64> {
        let f = CodingVector::from_spins(&binary_to_spin(bits)?)?;
        Ok(snr(&channel, &CodingPair::new(f, g.clone()), &ctx)?)
    };
    let plain = histogram_arm(&solve_annealed(&q, &cfg)?, &q, ground.energy, score)?;
    let companded = histogram_arm(&solve_annealed(&c, &cfg)?, &q, ground.energy, score)?;
    Ok(HistogramResult {
        ground_bits: bitstring(&ground.bits),
        ground_energy: ground.energy,
        noise_sigma: cfg.noise_sigma,
        channel,
        g,
        qubo: q,
        plain,
        companded,
    })
}

/// Noise growth factor and step limit of the calibration.
const SIGMA_GROWTH: f64 = 1.25;
const SIGMA_STEPS: usize = 48;

fn companding_instance(spec: &ExperimentSpec, i: usize) -> Result<CompandingRow> {
    let q = gaussian_qubo(spec.qubits(), derive_seed(spec.seed, &[tag::QUBO, i as u64]))?;
    let c = compand(&q, spec.mu())?;
    let ground = solve_exact(&q)?;
    let ground_c = solve_exact(&c)?;
    let base = spec
        .solver_config()
        .with_seed(derive_seed(spec.seed, &[tag::ANNEAL, i as u64]));
    let target = spec.min_distinct();

    let mut sigma = base.noise_sigma.max(1e-3);
    let mut calibrated = false;
    let mut plain = solve_annealed(
        &q,
        &SolverConfig {
            noise_sigma: sigma,
            ..base
        },
    )?;
    for _ in 0..SIGMA_STEPS {
        if plain.distinct() >= target {
            calibrated = true;
            break;
        }
        sigma *= SIGMA_GROWTH;
        plain = solve_annealed(
            &q,
            &SolverConfig {
                noise_sigma: sigma,
                ..base
            },
        )?;
    }
    calibrated |= plain.distinct() >= target;
    let comp = solve_annealed(
        &c,
        &SolverConfig {
            noise_sigma: sigma,
            ..base
        },
    )?;

    let p_plain = occurrence(&plain, &ground.bits);
    let p_companded = occurrence(&comp, &ground.bits);
    Ok(CompandingRow {
        instance: i,
        sigma,
        calibrated,
        distinct_plain: plain.distinct(),
        distinct_companded: comp.distinct(),
        p_plain,
        p_companded,
        p_companded_own: occurrence(&comp, &ground_c.bits),
        ground_preserved: ground_c.bits == ground.bits,
        fewer_distinct: plain.distinct() >= 5 * comp.distinct(),
        higher_ground: p_companded > 0.0 && p_companded >= 3.0 * p_plain,
    })
}

fn run_companding(spec: &ExperimentSpec) -> Result<CompandingResult> {
    let rows: Vec<CompandingRow> = (0..spec.ensemble_size())
        .into_par_iter()
        .map(|i| companding_instance(spec, i))
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let frac = |f: fn(&CompandingRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
    Ok(CompandingResult {
        fraction_fewer_distinct: frac(|r| r.fewer_distinct),
        fraction_higher_ground: frac(|r| r.higher_ground),
        fraction_both: frac(|r| r.fewer_distinct && r.higher_ground),
        fraction_ground_preserved: frac(|r| r.ground_preserved),
        rows,
    })
}

fn run_gap(spec: &ExperimentSpec) -> Result<GapStudy> {
    Ok(companding_gap_study(&GapStudyConfig {
        n: spec.qubits(),
        num_instances: spec.ensemble_size(),
        schedule: spec.schedule(),
        mu: spec.mu(),
        seed: spec.seed,
        grid_points: spec.grid_points(),
    })?)
}

/// Success probability of one precoder subproblem for a random channel.
fn tts_trial(spec: &ExperimentSpec, size: usize, c: usize) -> Result<f64> {
    let path = [size as u64, c as u64];
    let channel = generate_rayleigh_channel(size, size, derive_seed(spec.seed, &[tag::CHANNEL, path[0], path[1]]))?;
    let g = CodingVector::random(size, &mut keyed_rng(spec.seed, &[tag::RESTART, path[0], path[1]]))?;
    let q = spin_form_to_qubo(&real_embed_precoder(&channel, &g)?);
    let target = match spec.mu {
        Some(mu) => compand(&q, mu)?,
        None => q.clone(),
    };
    let ground = solve_exact(&q)?;
    let cfg = spec
        .solver_config()
        .with_seed(derive_seed(spec.seed, &[tag::ANNEAL, path[0], path[1]]));
    let hist = solve_annealed(&target, &cfg)?;
    Ok(ground_occurrence(&hist, &q, ground.energy))
}

fn run_tts(spec: &ExperimentSpec) -> Result<TtsResult> {
    let t = spec.anneal_time_us();
    let rows = spec
        .sizes()
        .into_iter()
        .map(|size| -> Result<TtsRow> {
            let ps: Vec<f64> = (0..spec.ensemble_size())
                .into_par_iter()
                .map(|c| tts_trial(spec, size, c))
                .collect::<Result<_>>()?;
            let mean = ps.iter().sum::<f64>() / ps.len() as f64;
            let value = tts(t, mean)?;
            Ok(TtsRow {
                size,
                qubo_dim: 2 * size,
                channels: ps.len(),
                mean_success: mean,
                tts_us: value.is_finite().then_some(value),
                unsolved: ps.iter().filter(|&&p| p == 0.0).count(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TtsResult {
        anneal_time_us: t,
        rows,
    })
}

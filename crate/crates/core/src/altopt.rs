//! Alternating optimization of the pre-coder and post-coder.
//!
//! Each restart draws a random post-coder and then alternates two QUBO
//! solves: the pre-coder for the current post-coder, then the post-coder for
//! the new pre-coder, until the relative SNR change drops below the tolerance
//! or the iteration cap is reached. The best restart wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mimo::{
    exhaustive_search_capped, gain, snr, ChannelEnsemble, CodingPair, CodingVector, ComplexChannel, SnrContext,
};
use crate::qubo::{
    binary_to_spin, compand, real_embed_postcoder, real_embed_precoder, spin_form_to_qubo, QuboProblem,
    SpinQuadraticForm,
};
use crate::rng::{derive_seed, keyed_rng, tag};
use crate::solvers::{rq_baseline, solve_annealed, solve_exact, SolverConfig};

/// Which QUBO backend solves the subproblems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Annealed(SolverConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltOptConfig {
    /// Independent random restarts.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iters: usize,
    /// Relative SNR change that counts as converged.
    pub rel_tol: f64,
    pub solver: Backend,
    /// μ for companding the calibrated subproblem QUBOs; `None` disables it.
    pub companding: Option<f64>,
    pub seed: u64,
}

impl Default for AltOptConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 8,
            rel_tol: 0.01,
            solver: Backend::Exact,
            companding: None,
            seed: 0,
        }
    }
}

impl AltOptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("restarts", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::invalid("rel_tol", "must be positive"));
        }
        if let Some(mu) = self.companding {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::invalid("companding", "mu must be positive and finite"));
            }
        }
        if let Backend::Annealed(cfg) = &self.solver {
            cfg.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: CodingVector,
    pub g: CodingVector,
    pub snr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub initial: CodingPair,
    pub initial_snr: f64,
    pub iterations: Vec<IterationRecord>,
}

impl RestartTrace {
    /// Best recorded iterate; with the exact backend this is the last one.
    pub fn best(&self) -> &IterationRecord {
        self.iterations.iter().fold(
            &self.iterations[0],
            |best, it| if it.snr > best.snr { it } else { best },
        )
    }

    /// Iterations whose SNR fell below the previous value by more than a
    /// relative `1e-12`.
    pub fn ascent_violations(&self) -> usize {
        let mut prev = self.initial_snr;
        let mut count = 0;
        for it in &self.iterations {
            if it.snr < prev * (1.0 - 1e-12) {
                count += 1;
            }
            prev = it.snr;
        }
        count
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltOptTrace {
    pub restarts: Vec<RestartTrace>,
    pub best: CodingPair,
    pub best_snr: f64,
    pub winner: usize,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    restart: usize,
    k: usize,
    f: &'a CodingVector,
    g: &'a CodingVector,
    snr: f64,
}

impl AltOptTrace {
    /// One JSON object per iteration, newline separated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (restart, r) in self.restarts.iter().enumerate() {
            for it in &r.iterations {
                let line = TraceLine {
                    restart,
                    k: it.k,
                    f: &it.f,
                    g: &it.g,
                    snr: it.snr,
                };
                out.push_str(&serde_json::to_string(&line).expect("trace serialization is infallible"));
                out.push('\n');
            }
        }
        out
    }

    pub fn ascent_violations(&self) -> usize {
        self.restarts.iter().map(RestartTrace::ascent_violations).sum()
    }
}

/// Which side of the link a subproblem designs.
#[derive(Clone, Copy)]
enum Side {
    Pre = 0,
    Post = 1,
}

struct SubproblemSolver<'a> {
    cfg: &'a AltOptConfig,
    restart: usize,
}

impl SubproblemSolver<'_> {
    /// Maximizes the spin form, keeping `previous` when the calibrated QUBO
    /// is identically zero (every vector optimal).
    fn solve(&self, form: &SpinQuadraticForm, previous: &CodingVector, k: usize, side: Side) -> Result<CodingVector> {
        let qubo = spin_form_to_qubo(form);
        if qubo.max_abs() == 0.0 {
            return Ok(previous.clone());
        }
        let target = match self.cfg.companding {
            Some(mu) => compand(&qubo, mu)?,
            None => qubo.clone(),
        };
        let bits = match &self.cfg.solver {
            Backend::Exact => solve_exact(&target)?.bits,
            Backend::Annealed(solver) => {
                let seed = derive_seed(
                    self.cfg.seed,
                    &[tag::SUBPROBLEM, self.restart as u64, k as u64, side as u64],
                );
                let hist = solve_annealed(&target, &solver.with_seed(seed))?;
                best_on(&qubo, hist.entries().iter().map(|e| e.bits.as_slice()))
            }
        };
        CodingVector::from_spins(&binary_to_spin(&bits)?)
    }
}

/// The returned bitstring minimizing the uncompanded energy; ties go to the
/// earliest candidate.
fn best_on<'b>(q: &QuboProblem, candidates: impl Iterator<Item = &'b [u8]>) -> Vec<u8> {
    let mut best: Option<(f64, &[u8])> = None;
    for bits in candidates {
        let e = q.energy(bits);
        if best.is_none_or(|(be, _)| e < be) {
            best = Some((e, bits));
        }
    }
    best.expect("histograms are non-empty").1.to_vec()
}

fn run_restart(channel: &ComplexChannel, ctx: &SnrContext, cfg: &AltOptConfig, restart: usize) -> Result<RestartTrace> {
    let mut rng = keyed_rng(cfg.seed, &[tag::RESTART, restart as u64]);
    let g0 = CodingVector::random(channel.n_rx(), &mut rng)?;
    let f0 = CodingVector::random(channel.n_tx(), &mut rng)?;
    let initial = CodingPair::new(f0, g0);
    let initial_snr = snr(channel, &initial, ctx)?;
    let solver = SubproblemSolver { cfg, restart };

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let (mut f, mut g) = (initial.f.clone(), initial.g.clone());
    let mut rho_old = initial_snr;
    let mut k = 0;
    loop {
        k += 1;
        if let Some(last) = iterations.last() {
            rho_old = last.snr;
        }
        f = solver.solve(&real_embed_precoder(channel, &g)?, &f, k, Side::Pre)?;
        g = solver.solve(&real_embed_postcoder(channel, &f)?, &g, k, Side::Post)?;
        let rho_new = snr(channel, &CodingPair::new(f.clone(), g.clone()), ctx)?;
        iterations.push(IterationRecord {
            k,
            f: f.clone(),
            g: g.clone(),
            snr: rho_new,
        });
        // A zero previous SNR never counts as converged.
        let converged = rho_old != 0.0 && (rho_new - rho_old).abs() / rho_old.abs() < cfg.rel_tol;
        if converged || k >= cfg.max_iters {
            break;
        }
    }
    Ok(RestartTrace {
        initial,
        initial_snr,
        iterations,
    })
}

/// Designs a coding pair by alternating QUBO solves with random restarts.
pub fn design_pair(
    channel: &ComplexChannel,
    ctx: &SnrContext,
    cfg: &AltOptConfig,
) -> Result<(CodingPair, AltOptTrace)> {
    cfg.validate()?;
    let restarts: Vec<RestartTrace> = (0..cfg.restarts)
        .into_par_iter()
        .map(|l| run_restart(channel, ctx, cfg, l))
        .collect::<Result<_>>()?;
    let mut winner = 0;
    for (l, r) in restarts.iter().enumerate() {
        if r.best().snr > restarts[winner].best().snr {
            winner = l;
        }
    }
    let top = restarts[winner].best();
    let best = CodingPair::new(top.f.clone(), top.g.clone());
    let best_snr = top.snr;
    Ok((
        best.clone(),
        AltOptTrace {
            restarts,
            best,
            best_snr,
            winner,
        },
    ))
}

/// Per-channel raw gains `|gᴴHf|²` of every method in a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelOutcome {
    pub gain_es: Option<f64>,
    pub gain_alg: f64,
    pub gain_rq: f64,
    pub ascent_violations: usize,
}

impl ChannelOutcome {
    /// Whether the alternating design attains the exhaustive optimum.
    pub fn attains_es(&self, rel_tol: f64) -> Option<bool> {
        self.gain_es.map(|es| self.gain_alg >= es * (1.0 - rel_tol))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub power_db: f64,
    pub snr_es: Option<f64>,
    pub snr_alg: f64,
    pub snr_rq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub channels: Vec<ChannelOutcome>,
}

/// Mean linear SNR per method and power level over a channel ensemble.
///
/// Every method's design is independent of `P`, so gains are computed once
/// per channel and scaled per power level. The exhaustive column is `None`
/// when `2·(n_tx + n_rx)` exceeds `es_cap_bits`.
pub fn snr_sweep(
    ensemble: &ChannelEnsemble,
    powers_db: &[f64],
    noise_var: f64,
    cfg: &AltOptConfig,
    es_cap_bits: usize,
) -> Result<SweepTable> {
    if ensemble.size == 0 {
        return Err(Error::invalid("ensemble.size", "must be at least 1"));
    }
    if powers_db.is_empty() {
        return Err(Error::invalid("powers_db", "must not be empty"));
    }
    let unit = SnrContext::new(1.0, noise_var)?;
    let contexts: Vec<SnrContext> = powers_db
        .iter()
        .map(|&db| SnrContext::from_db(db, noise_var))
        .collect::<Result<_>>()?;
    let run_es = 2 * (ensemble.n_tx + ensemble.n_rx) <= es_cap_bits;

    let channels: Vec<ChannelOutcome> = (0..ensemble.size)
        .into_par_iter()
        .map(|i| -> Result<ChannelOutcome> {
            let h = ensemble.member(i)?;
            let member_cfg = AltOptConfig {
                seed: derive_seed(cfg.seed, &[tag::CHANNEL, i as u64]),
                ..*cfg
            };
            let (pair, trace) = design_pair(&h, &unit, &member_cfg)?;
            let gain_es = if run_es {
                Some(gain(&h, &exhaustive_search_capped(&h, &unit, true, es_cap_bits)?.0)?)
            } else {
                None
            };
            Ok(ChannelOutcome {
                gain_es,
                gain_alg: gain(&h, &pair)?,
                gain_rq: gain(&h, &rq_baseline(&h))?,
                ascent_violations: trace.ascent_violations(),
            })
        })
        .collect::<Result<_>>()?;

    let count = channels.len() as f64;
    let mean = |f: &dyn Fn(&ChannelOutcome) -> f64| channels.iter().map(f).sum::<f64>() / count;
    let es_mean = run_es.then(|| mean(&|c| c.gain_es.unwrap_or(0.0)));
    let alg_mean = mean(&|c| c.gain_alg);
    let rq_mean = mean(&|c| c.gain_rq);
    let (n_tx, n_rx) = (ensemble.n_tx, ensemble.n_rx);
    let rows = powers_db
        .iter()
        .zip(&contexts)
        .map(|(&power_db, ctx)| SweepRow {
            power_db,
            snr_es: es_mean.map(|g| ctx.snr_from_gain(g, n_tx, n_rx)),
            snr_alg: ctx.snr_from_gain(alg_mean, n_tx, n_rx),
            snr_rq: ctx.snr_from_gain(rq_mean, n_tx, n_rx),
        })
        .collect();
    Ok(SweepTable { rows, channels })
}

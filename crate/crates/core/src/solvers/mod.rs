//! QUBO backends.
//!
//! - [`solve_exact`]: exhaustive Gray-code enumeration, the ground-truth oracle.
//! - [`solve_annealed`]: an ensemble of independent simulated-annealing runs,
//!   optionally on a freshly perturbed matrix each run, aggregated into a
//!   [`SolutionHistogram`].
//! - [`rq_baseline`]: quantized dominant singular vectors of the channel.

mod anneal;
mod baseline;
mod exact;
mod histogram;

pub use anneal::{solve_annealed, SolverConfig, TemperatureSchedule};
pub use baseline::rq_baseline;
pub use exact::{solve_exact, solve_exact_capped, ExactSolution, DEFAULT_EXACT_CAP};
pub use histogram::{success_probability, HistogramEntry, SolutionHistogram};

/// Renders a 0/1 vector as a string, first variable first.
pub fn bitstring(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`bitstring`].
pub fn parse_bitstring(s: &str) -> crate::Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(crate::Error::Parse(format!("invalid bit {other:?} in {s:?}"))),
        })
        .collect()
}

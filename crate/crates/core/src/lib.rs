//! One-bit MIMO coding vector design via alternating QUBO subproblems.
//!
//! * [`mimo`]: channels, coding vectors, SNR, symmetry, exhaustive search.
//! * [`qubo`]: real embeddings, QUBO calibration, companding, coefficient noise.
//! * [`solvers`]: exact and annealing QUBO backends, histograms, baseline.
//! * [`altopt`]: the alternating design loop and SNR sweeps.
//! * [`spectral`]: annealing Hamiltonians, gap profiles, time-to-solution.

pub mod altopt;
pub mod error;
pub mod mimo;
pub mod qubo;
pub mod rng;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};

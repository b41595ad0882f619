//! Experiment orchestration for the one-bit coding library: declarative
//! experiment specs, deterministic pipelines, JSON/CSV result bundles and
//! plot-ready column files.

pub mod bundle;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod spec;

pub use bundle::{run_experiment, write_outputs, ResultBundle};
pub use error::{HarnessError, Result};
pub use plot::emit_plot_data;
pub use spec::{ExperimentKind, ExperimentSpec};

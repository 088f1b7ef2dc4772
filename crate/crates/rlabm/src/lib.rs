//! Experiment harness around `rlabm-core`: JSON experiment specs, the
//! experiment drivers, CSV/JSON/binary artifacts and the `rlabm` CLI.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod spec;

pub use error::{HarnessError, HarnessResult};
pub use metrics::{MetricRow, MetricsTable};
pub use spec::{Experiment, ExperimentSpec};

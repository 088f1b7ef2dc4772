//! Experiment drivers. Each one is a pure function of its spec and seed;
//! trials run in parallel but are collected in trial order.

pub mod flu;
pub mod mg;

use rayon::prelude::*;
use rlabm_core::nn::MlpParams;
use rlabm_core::sim::EpisodeTrace;
use rlabm_core::RngStream;
use serde_json::{Map, Value};

use crate::error::HarnessResult;
use crate::io::TraceKind;
use crate::metrics::MetricsTable;
use crate::spec::{Experiment, ExperimentSpec};

/// Everything a run produces before it is written out.
#[derive(Debug)]
pub struct RunOutput {
    pub metrics: MetricsTable,
    /// A representative evaluation episode.
    pub trace: Option<(EpisodeTrace, TraceKind)>,
    /// Trained actors, one per learner of the first trial.
    pub policies: Vec<MlpParams>,
    pub trial_seeds: Vec<u64>,
    /// Headline numbers copied into the manifest.
    pub summary: Map<String, Value>,
}

pub fn run(spec: &ExperimentSpec, run_id: &str) -> HarnessResult<RunOutput> {
    let seed = spec.seed;
    match &spec.experiment {
        Experiment::MgSingleFixed(s) => mg::single_fixed(s, seed, run_id),
        Experiment::MgResampled(s) => mg::resampled(s, seed, run_id),
        Experiment::MgMulti(s) => mg::multi(s, seed, run_id),
        Experiment::FluSingle(s) => flu::single(s, seed, run_id),
        Experiment::FluDegree(s) => flu::degree(s, seed, run_id),
    }
}

/// `n` seeds drawn from the stream `label` of `seed`.
pub fn derive_seeds(seed: u64, label: &str, n: usize) -> Vec<u64> {
    let mut s = RngStream::new(seed, label);
    (0..n).map(|_| s.next_seed()).collect()
}

/// Runs `f` over `0..n` on the rayon pool, keeping index order.
pub(crate) fn par_trials<T, F>(n: usize, f: F) -> HarnessResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> HarnessResult<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

pub(crate) fn put(summary: &mut Map<String, Value>, key: &str, value: impl Into<Value>) {
    summary.insert(key.to_string(), value.into());
}

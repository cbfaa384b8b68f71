//! Parallel dataset construction.
//!
//! Each instance is labeled independently from seeds derived from its id, so
//! results are collected in input order and match the sequential
//! [`rulegate_core::labeler::build_dataset`] for any thread count.

use std::time::Instant;

use rayon::prelude::*;
use rulegate_core::labeler::{label_instance, CostLedger, LabelConfig, LabeledSample};
use rulegate_core::Instance;

use crate::error::{Error, Result};

/// Labels `instances` on the current rayon pool and measures wall time.
pub fn build_dataset(instances: &[Instance], cfg: &LabelConfig) -> Result<(Vec<LabeledSample>, CostLedger)> {
    if instances.is_empty() {
        return Err(Error::Config("no instances to label".into()));
    }
    cfg.validate()?;
    let start = Instant::now();
    let parts =
        instances.par_iter().map(|inst| label_instance(inst, cfg)).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut dataset = Vec::with_capacity(parts.iter().map(|(s, _)| s.len()).sum());
    let mut ledger = CostLedger::default();
    for (samples, l) in parts {
        dataset.extend(samples);
        ledger += l;
    }
    ledger.wall_seconds = start.elapsed().as_secs_f64();
    Ok((dataset, ledger))
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

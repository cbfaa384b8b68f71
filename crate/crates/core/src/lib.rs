//! Learning-assisted dispatching-rule selection for the job-shop scheduling
//! problem.
//!
//! The crate builds schedules with a serial generator driven by seven
//! classical dispatching rules, labels decision states by rolling candidate
//! rules out to completion, fits a distance-weighted KNN regressor that
//! reports both a predicted regret and the spread of its neighbors, and turns
//! those predictions into dispatch policies (argmin, lower-confidence-bound,
//! and an uncertainty gate around a default rule).
//!
//! It is `no_std` and needs only `alloc`; file formats, threading and the CLI
//! live in the `rulegate` crate.
#![no_std]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod features;
pub mod instance;
pub mod knn;
pub mod labeler;
pub mod policy;
pub mod rng;
pub mod rules;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector, Normalizer, NUM_FEATURES};
pub use instance::{generate_instance, generate_set, Instance, Split, Time};
pub use knn::{Prediction, SelectorModel};
pub use labeler::{Breadth, CostLedger, Depth, LabelConfig, LabelKind, LabeledSample};
pub use policy::{Policy, PolicyRun, PolicySpec};
pub use rng::SplitMix64;
pub use rules::{best_fixed_rule, RuleId, NUM_RULES};
pub use schedule::{Dispatch, Makespan, ScheduleState, Violation};

#[cfg(test)]
extern crate std;

//! State features for (decision state, candidate rule) pairs, and the
//! z-normalization fitted on training vectors.
//!
//! Layout of the 42 positions (time-like values are divided by the instance
//! lower bound `LB`; the "ready set" is the next operation of each unfinished
//! job):
//!
//! | positions | content |
//! |-----------|---------|
//! | 0–2   | `J`, `M`, `J / M` |
//! | 3–7   | all processing times: mean, std, min, max, coefficient of variation (raw units) |
//! | 8–11  | machine total load: mean, std, max (each / LB), max / mean |
//! | 12–15 | fraction of operations scheduled, fraction of work scheduled, partial makespan / LB, remaining decisions / (J·M) |
//! | 16–20 | ready-set size / J; ready processing times mean, std, min, max (each / mean of all processing times) |
//! | 21–26 | per-job remaining work mean, std, min, max (each / LB), total / LB, coefficient of variation |
//! | 27–29 | per-job remaining operation count mean, std, max (each / M) |
//! | 30–32 | machine ready times mean, std, max − min (each / LB) |
//! | 33–34 | ready times of unfinished jobs mean, std (each / LB) |
//! | 35–41 | one-hot of the candidate rule code |

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rules::{RuleId, NUM_RULES};
use crate::schedule::ScheduleState;
use crate::stats::{coeff_of_variation, max, mean, min, pop_std, CONSTANT_STD};

pub const NUM_STATE_FEATURES: usize = 35;
pub const NUM_FEATURES: usize = NUM_STATE_FEATURES + NUM_RULES;
/// First position of the rule one-hot block.
pub const ONE_HOT_OFFSET: usize = NUM_STATE_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn from_parts(state: &[f64; NUM_STATE_FEATURES], rule: RuleId) -> Self {
        let mut v = [0.0; NUM_FEATURES];
        v[..NUM_STATE_FEATURES].copy_from_slice(state);
        v[ONE_HOT_OFFSET + rule.code()] = 1.0;
        FeatureVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn state_part(&self) -> &[f64] {
        &self.0[..NUM_STATE_FEATURES]
    }

    pub fn one_hot(&self) -> &[f64] {
        &self.0[ONE_HOT_OFFSET..]
    }

    /// The rule encoded by the one-hot block, if it is a valid one-hot.
    pub fn rule(&self) -> Option<RuleId> {
        let hot = self.one_hot();
        let mut found = None;
        for (code, &x) in hot.iter().enumerate() {
            if x == 1.0 {
                if found.is_some() {
                    return None;
                }
                found = RuleId::from_code(code);
            } else if x != 0.0 {
                return None;
            }
        }
        found
    }
}

/// The 35 state and instance features of a decision state.
pub fn state_features(state: &ScheduleState<'_>) -> Result<[f64; NUM_STATE_FEATURES]> {
    if state.is_complete() {
        return Err(Error::TerminalState);
    }
    let inst = state.instance();
    let jobs = inst.num_jobs();
    let machines = inst.num_machines();
    let ops = inst.num_ops() as f64;
    let lb = inst.lower_bound() as f64;
    let mut f = [0.0; NUM_STATE_FEATURES];

    f[0] = jobs as f64;
    f[1] = machines as f64;
    f[2] = jobs as f64 / machines as f64;

    let all_p: Vec<f64> = inst.proc_times().iter().flatten().map(|&p| p as f64).collect();
    let p_mean = mean(&all_p);
    f[3] = p_mean;
    f[4] = pop_std(&all_p);
    f[5] = min(&all_p);
    f[6] = max(&all_p);
    f[7] = coeff_of_variation(&all_p);

    let loads: Vec<f64> = (0..machines).map(|m| inst.machine_load(m) as f64).collect();
    let load_mean = mean(&loads);
    f[8] = load_mean / lb;
    f[9] = pop_std(&loads) / lb;
    f[10] = max(&loads) / lb;
    f[11] = max(&loads) / load_mean;

    let total_work = inst.total_work() as f64;
    let remaining_total: f64 = state.remaining_work().iter().map(|&w| w as f64).sum();
    f[12] = state.decisions_made() as f64 / ops;
    f[13] = (total_work - remaining_total) / total_work;
    f[14] = state.makespan().0 as f64 / lb;
    f[15] = state.remaining_decisions() as f64 / ops;

    let ready_p: Vec<f64> = state.ready_jobs().map(|j| state.next_proc_time(j) as f64).collect();
    f[16] = ready_p.len() as f64 / jobs as f64;
    f[17] = mean(&ready_p) / p_mean;
    f[18] = pop_std(&ready_p) / p_mean;
    f[19] = min(&ready_p) / p_mean;
    f[20] = max(&ready_p) / p_mean;

    let work: Vec<f64> = state.remaining_work().iter().map(|&w| w as f64).collect();
    f[21] = mean(&work) / lb;
    f[22] = pop_std(&work) / lb;
    f[23] = min(&work) / lb;
    f[24] = max(&work) / lb;
    f[25] = remaining_total / lb;
    f[26] = coeff_of_variation(&work);

    let ops_left: Vec<f64> = state.next_op().iter().map(|&k| (machines - k) as f64).collect();
    f[27] = mean(&ops_left) / machines as f64;
    f[28] = pop_std(&ops_left) / machines as f64;
    f[29] = max(&ops_left) / machines as f64;

    let machine_ready: Vec<f64> = state.machine_ready().iter().map(|&t| t as f64).collect();
    f[30] = mean(&machine_ready) / lb;
    f[31] = pop_std(&machine_ready) / lb;
    f[32] = (max(&machine_ready) - min(&machine_ready)) / lb;

    let job_ready: Vec<f64> = state.ready_jobs().map(|j| state.job_ready()[j] as f64).collect();
    f[33] = mean(&job_ready) / lb;
    f[34] = pop_std(&job_ready) / lb;

    Ok(f)
}

/// Full 42-dimensional vector for a candidate `rule` at `state`.
pub fn extract_features(state: &ScheduleState<'_>, rule: RuleId) -> Result<FeatureVector> {
    Ok(FeatureVector::from_parts(&state_features(state)?, rule))
}

/// Per-dimension z-normalization fitted on training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
    /// Dimensions with `std < epsilon` are constant and normalize to 0.
    pub epsilon: f64,
}

impl Normalizer {
    /// Population mean and std per dimension.
    pub fn fit<'v>(samples: impl IntoIterator<Item = &'v FeatureVector>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; NUM_FEATURES];
        let samples: Vec<&FeatureVector> = samples.into_iter().collect();
        for v in &samples {
            n += 1;
            for (s, x) in sum.iter_mut().zip(v.0.iter()) {
                *s += x;
            }
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let mut mean = [0.0; NUM_FEATURES];
        for (m, s) in mean.iter_mut().zip(sum) {
            *m = s / n as f64;
        }
        let mut var = [0.0; NUM_FEATURES];
        for v in &samples {
            for d in 0..NUM_FEATURES {
                let dx = v.0[d] - mean[d];
                var[d] += dx * dx;
            }
        }
        let mut std = [0.0; NUM_FEATURES];
        for (s, v) in std.iter_mut().zip(var) {
            *s = libm::sqrt(v / n as f64);
        }
        Ok(Normalizer { mean, std, epsilon: CONSTANT_STD })
    }

    pub fn is_constant(&self, dim: usize) -> bool {
        self.std[dim] < self.epsilon
    }

    pub fn normalize_dim(&self, dim: usize, x: f64) -> f64 {
        if self.is_constant(dim) {
            0.0
        } else {
            (x - self.mean[dim]) / self.std[dim]
        }
    }

    pub fn normalize(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; NUM_FEATURES];
        for (d, o) in out.iter_mut().enumerate() {
            *o = self.normalize_dim(d, v.0[d]);
        }
        FeatureVector(out)
    }

    /// Inverse of [`Normalizer::normalize`] on non-constant dimensions;
    /// constant dimensions map back to their mean.
    pub fn denormalize(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; NUM_FEATURES];
        for (d, o) in out.iter_mut().enumerate() {
            *o = if self.is_constant(d) { self.mean[d] } else { v.0[d] * self.std[d] + self.mean[d] };
        }
        FeatureVector(out)
    }
}

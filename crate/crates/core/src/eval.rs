//! Relative percentage deviation against the per-instance best fixed rule,
//! and the per-method aggregates reported for a test set.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::SplitMix64;
use crate::rules::{run_fixed_rule, RuleId};
use crate::schedule::Makespan;
use crate::stats::{mean, median};

/// `100 * (makespan - reference) / reference`.
pub fn rpd(makespan: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(100.0 * (makespan - reference) / reference)
}

/// Best makespan over the deterministic rules in `rules`, chosen in
/// hindsight for this instance. RANDOM is not a valid fixed reference.
pub fn oracle_fixed(instance: &Instance, rules: &[RuleId], seed: u64) -> Result<Makespan> {
    if let Some(&r) = rules.iter().find(|r| !r.is_deterministic()) {
        return Err(Error::NonDeterministicRule(r));
    }
    let mut rng = SplitMix64::new(seed);
    rules
        .iter()
        .map(|&r| Makespan(run_fixed_rule(instance, r, &mut rng)))
        .min()
        .ok_or_else(|| Error::Config("oracle needs at least one rule".into()))
}

/// Aggregates for one method over a test set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodSummary {
    pub name: String,
    pub mean_rpd: f64,
    pub median_rpd: f64,
    pub wins: usize,
    /// Per-instance makespan (a mean for multi-seed methods).
    pub makespans: Vec<f64>,
    pub rpds: Vec<f64>,
}

/// Per-instance RPDs, mean/median, and win counts.
///
/// `competing[m]` marks the methods whose makespans define the per-instance
/// best; every method (competing or not) whose makespan equals that best
/// wins the instance, so ties credit all tied methods.
pub fn summarize(
    names: &[String],
    makespans: &[Vec<f64>],
    competing: &[bool],
    reference: &[f64],
) -> Result<Vec<MethodSummary>> {
    if names.len() != makespans.len() || names.len() != competing.len() {
        return Err(Error::Config("method names, results and flags differ in length".into()));
    }
    let n = reference.len();
    if makespans.iter().any(|m| m.len() != n) {
        return Err(Error::Config("every method needs one makespan per instance".into()));
    }
    let best: Vec<f64> = (0..n)
        .map(|i| makespans.iter().zip(competing).filter(|(_, &c)| c).map(|(m, _)| m[i]).fold(f64::INFINITY, f64::min))
        .collect();
    names
        .iter()
        .zip(makespans)
        .map(|(name, ms)| {
            let rpds = ms.iter().zip(reference).map(|(&m, &r)| rpd(m, r)).collect::<Result<Vec<f64>>>()?;
            let wins = ms.iter().zip(&best).filter(|(m, b)| m == b).count();
            Ok(MethodSummary {
                name: name.clone(),
                mean_rpd: mean(&rpds),
                median_rpd: median(&rpds),
                wins,
                makespans: ms.clone(),
                rpds,
            })
        })
        .collect()
}

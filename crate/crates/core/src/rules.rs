//! The seven low-level dispatching rules.

use alloc::string::ToString;

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};
use crate::rng::SplitMix64;
use crate::schedule::ScheduleState;

/// A dispatching rule. The discriminant is the stable code used by the
/// one-hot encoding and every file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "&'static str", try_from = "alloc::string::String"))]
#[repr(u8)]
pub enum RuleId {
    /// Shortest next-operation processing time.
    Spt = 0,
    /// Longest next-operation processing time.
    Lpt = 1,
    /// Most work remaining.
    Mwkr = 2,
    /// Least work remaining.
    Lwkr = 3,
    /// Most operations remaining.
    Mopnr = 4,
    /// Earliest-ready operation first.
    Fifo = 5,
    /// Uniform over the ready set.
    Random = 6,
}

pub const NUM_RULES: usize = 7;

impl RuleId {
    pub const ALL: [RuleId; NUM_RULES] =
        [RuleId::Spt, RuleId::Lpt, RuleId::Mwkr, RuleId::Lwkr, RuleId::Mopnr, RuleId::Fifo, RuleId::Random];

    /// Every rule except [`RuleId::Random`].
    pub const DETERMINISTIC: [RuleId; 6] =
        [RuleId::Spt, RuleId::Lpt, RuleId::Mwkr, RuleId::Lwkr, RuleId::Mopnr, RuleId::Fifo];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<RuleId> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleId::Spt => "SPT",
            RuleId::Lpt => "LPT",
            RuleId::Mwkr => "MWKR",
            RuleId::Lwkr => "LWKR",
            RuleId::Mopnr => "MOPNR",
            RuleId::Fifo => "FIFO",
            RuleId::Random => "RANDOM",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self != RuleId::Random
    }

    /// Picks the job whose next operation this rule dispatches.
    ///
    /// Deterministic rules break ties by the lowest job index. Only
    /// [`RuleId::Random`] consumes randomness.
    pub fn select_job(self, state: &ScheduleState<'_>, rng: &mut SplitMix64) -> Result<usize> {
        let m = state.instance().num_machines();
        let pick = match self {
            RuleId::Spt => argmin_by_key(state, |j| state.next_proc_time(j)),
            RuleId::Lpt => argmin_by_key(state, |j| core::cmp::Reverse(state.next_proc_time(j))),
            RuleId::Mwkr => argmin_by_key(state, |j| core::cmp::Reverse(state.remaining_work()[j])),
            RuleId::Lwkr => argmin_by_key(state, |j| state.remaining_work()[j]),
            RuleId::Mopnr => argmin_by_key(state, |j| core::cmp::Reverse(m - state.next_op()[j])),
            RuleId::Fifo => argmin_by_key(state, |j| (state.job_ready()[j], state.arrival_order()[j])),
            RuleId::Random => {
                let ready = state.ready_jobs().count();
                if ready == 0 {
                    None
                } else {
                    state.ready_jobs().nth(rng.index(ready))
                }
            }
        };
        pick.ok_or(Error::TerminalState)
    }
}

// `min_by_key` keeps the first minimum, which gives lowest-index tie-breaking.
fn argmin_by_key<K: Ord>(state: &ScheduleState<'_>, key: impl Fn(usize) -> K) -> Option<usize> {
    state.ready_jobs().min_by_key(|&j| key(j))
}

impl core::fmt::Display for RuleId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for RuleId {
    type Err = Error;

    /// Case-insensitive rule name.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        RuleId::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownRule(s.to_string()))
    }
}

impl From<RuleId> for &'static str {
    fn from(r: RuleId) -> Self {
        r.name()
    }
}

impl TryFrom<alloc::string::String> for RuleId {
    type Error = Error;

    fn try_from(s: alloc::string::String) -> Result<Self> {
        s.parse()
    }
}

/// Makespan of running `rule` alone from the empty schedule.
pub fn run_fixed_rule(instance: &Instance, rule: RuleId, rng: &mut SplitMix64) -> Time {
    let mut state = ScheduleState::new(instance);
    state.complete_with_rule(rule, rng).0 .0
}

/// The deterministic rule in `rules` with the lowest mean makespan over
/// `instances`, ties to the lowest code. [`RuleId::Random`] is skipped.
pub fn best_fixed_rule(instances: &[Instance], rules: &[RuleId], seed: u64) -> Result<RuleId> {
    if instances.is_empty() {
        return Err(Error::Config("no instances to pick a default rule from".to_string()));
    }
    let mut candidates: alloc::vec::Vec<RuleId> = rules.iter().copied().filter(|r| r.is_deterministic()).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let mut rng = SplitMix64::new(seed);
    // Same instance count for every rule, so comparing sums compares means.
    candidates
        .into_iter()
        .map(|rule| {
            let total: Time = instances.iter().map(|inst| run_fixed_rule(inst, rule, &mut rng)).sum();
            (total, rule)
        })
        .min()
        .map(|(_, rule)| rule)
        .ok_or_else(|| Error::Config("no deterministic rule to pick a default from".to_string()))
}

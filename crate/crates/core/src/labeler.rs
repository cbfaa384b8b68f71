//! Rollout labels for supervised rule selection.
//!
//! Decision states are sampled from exploration trajectories in which every
//! decision uses a uniformly random rule. At each sampled state a subset of
//! candidate rules is rolled out: the candidate drives the first `depth`
//! decisions, then the default rule finishes the schedule. The terminal
//! makespans become either per-state regrets or lower-bound-normalized
//! targets.
//!
//! Randomness is keyed per unit of work (instance, sampled state, candidate)
//! so labeling can be split across threads without changing any output.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{state_features, FeatureVector};
use crate::instance::{Instance, Time};
use crate::rng::{derive_seed, fnv1a, SplitMix64};
use crate::rules::{RuleId, NUM_RULES};
use crate::schedule::{Makespan, ScheduleState};

const TAG_SAMPLING: u64 = 0;
const TAG_STATE: u64 = 1;
const TAG_SUBSET: u64 = 2;
const TAG_ROLLOUT: u64 = 3;

/// How many decisions the candidate rule drives before the default rule takes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Depth {
    Steps(usize),
    Full,
}

impl Depth {
    fn limit(self) -> usize {
        match self {
            Depth::Steps(k) => k,
            Depth::Full => usize::MAX,
        }
    }
}

impl core::fmt::Display for Depth {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Depth::Steps(k) => write!(f, "{k}"),
            Depth::Full => f.write_str("full"),
        }
    }
}

impl core::str::FromStr for Depth {
    type Err = Error;

    /// `"full"` (or `"inf"`) or a positive integer.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") || s.eq_ignore_ascii_case("inf") {
            return Ok(Depth::Full);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Depth::Steps(k)),
            _ => Err(Error::Config(format!("depth must be a positive integer or \"full\", got {s:?}"))),
        }
    }
}

/// Number of candidate rules evaluated per state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Breadth {
    Count(usize),
    Full,
}

impl Breadth {
    pub fn count(self) -> usize {
        match self {
            Breadth::Count(b) => b,
            Breadth::Full => NUM_RULES,
        }
    }
}

impl core::fmt::Display for Breadth {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Breadth::Count(b) => write!(f, "{b}"),
            Breadth::Full => f.write_str("full"),
        }
    }
}

impl core::str::FromStr for Breadth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Breadth::Full);
        }
        match s.parse::<usize>() {
            Ok(b) if (1..=NUM_RULES).contains(&b) => Ok(Breadth::Count(b)),
            _ => Err(Error::Config(format!("breadth must be in 1..={NUM_RULES} or \"full\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LabelKind {
    /// `(m(s,h) - min m) / min m` over the evaluated candidates.
    Regret,
    /// `m(s,h) / LB`.
    Normalized,
}

impl LabelKind {
    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Regret => "regret",
            LabelKind::Normalized => "normalized",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            LabelKind::Regret => 0,
            LabelKind::Normalized => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LabelKind::Regret),
            1 => Some(LabelKind::Normalized),
            _ => None,
        }
    }
}

impl core::fmt::Display for LabelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regret" => Ok(LabelKind::Regret),
            "normalized" | "norm" => Ok(LabelKind::Normalized),
            other => Err(Error::Config(format!("unknown label kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelConfig {
    pub states_per_instance: usize,
    pub trajectories_per_instance: usize,
    pub depth: Depth,
    pub breadth: Breadth,
    pub label_kind: LabelKind,
    /// Rule that finishes every finite-depth rollout.
    pub default_rule: RuleId,
    /// Force the default rule into every reduced candidate subset.
    pub subset_includes_default: bool,
    pub seed: u64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            states_per_instance: 25,
            trajectories_per_instance: 3,
            depth: Depth::Full,
            breadth: Breadth::Full,
            label_kind: LabelKind::Regret,
            default_rule: RuleId::Fifo,
            subset_includes_default: true,
            seed: 0,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.states_per_instance == 0 {
            return Err(Error::Config("states_per_instance must be at least 1".into()));
        }
        if self.trajectories_per_instance == 0 {
            return Err(Error::Config("trajectories_per_instance must be at least 1".into()));
        }
        if self.depth == Depth::Steps(0) {
            return Err(Error::Config("finite depth must be at least 1".into()));
        }
        let b = self.breadth.count();
        if b == 0 || b > NUM_RULES {
            return Err(Error::Config(format!("breadth {b} outside 1..={NUM_RULES}")));
        }
        Ok(())
    }

    /// Sampled states per trajectory: an even split, earlier trajectories
    /// taking the remainder.
    pub fn trajectory_loads(&self) -> Vec<usize> {
        let t = self.trajectories_per_instance;
        let base = self.states_per_instance / t;
        let extra = self.states_per_instance % t;
        (0..t).map(|i| base + usize::from(i < extra)).collect()
    }
}

/// Label-generation cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostLedger {
    /// (state, candidate) rollouts performed.
    pub rollouts: u64,
    /// Candidate-guided dispatch decisions simulated.
    pub steps: u64,
    /// Decisions simulated by the default rule after the candidate hands over.
    pub completion_steps: u64,
    /// Wall-clock labeling time; filled in by callers that can measure it.
    pub wall_seconds: f64,
}

impl core::ops::AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.rollouts += rhs.rollouts;
        self.steps += rhs.steps;
        self.completion_steps += rhs.completion_steps;
        self.wall_seconds += rhs.wall_seconds;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    /// Features of the sampled state with the candidate's one-hot.
    pub features: FeatureVector,
    pub target: f64,
    pub instance_id: String,
    /// Position of the state among the instance's sampled states.
    pub state_index: usize,
    /// Decisions already made at the sampled state.
    pub decision: usize,
    pub rule: RuleId,
    /// Raw rollout makespan `m(s, h)`.
    pub makespan: Time,
    pub lower_bound: Time,
}

/// A sampled decision state with its position in the sampling plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledState<'a> {
    pub state: ScheduleState<'a>,
    pub trajectory: usize,
    pub index: usize,
}

/// Runs the exploration trajectories and returns the states at the sampled
/// decision indices, ordered by trajectory then decision index.
///
/// Each trajectory draws its own decision indices uniformly without
/// replacement from `0..J*M`.
pub fn sample_states<'a>(
    instance: &'a Instance,
    cfg: &LabelConfig,
    rng: &mut SplitMix64,
) -> Result<Vec<SampledState<'a>>> {
    cfg.validate()?;
    let ops = instance.num_ops();
    if cfg.states_per_instance > ops * cfg.trajectories_per_instance {
        return Err(Error::Config(format!(
            "{} states requested but {} trajectories of {} decisions hold at most {}",
            cfg.states_per_instance,
            cfg.trajectories_per_instance,
            ops,
            ops * cfg.trajectories_per_instance
        )));
    }
    let mut out = Vec::with_capacity(cfg.states_per_instance);
    for (trajectory, load) in cfg.trajectory_loads().into_iter().enumerate() {
        if load == 0 {
            continue;
        }
        let mut picks = rng.sample_distinct(ops, load);
        picks.sort_unstable();
        let mut state = ScheduleState::new(instance);
        for decision in picks {
            while state.decisions_made() < decision {
                let rule = RuleId::ALL[rng.index(NUM_RULES)];
                let job = rule.select_job(&state, rng)?;
                state.dispatch(job)?;
            }
            let index = out.len();
            out.push(SampledState { state: state.clone(), trajectory, index });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutOutcome {
    pub makespan: Makespan,
    /// Decisions driven by the candidate rule.
    pub guided_steps: usize,
    /// Decisions driven by the default rule afterwards.
    pub completion_steps: usize,
}

/// Applies `rule` for `min(depth, remaining)` decisions, then `default_rule`
/// to completion.
pub fn rollout(
    state: &ScheduleState<'_>,
    rule: RuleId,
    depth: Depth,
    default_rule: RuleId,
    rng: &mut SplitMix64,
) -> Result<RolloutOutcome> {
    if state.is_complete() {
        return Err(Error::TerminalState);
    }
    let mut sim = state.clone();
    let guided_steps = sim.advance_with_rule(rule, depth.limit(), rng);
    let (makespan, completion_steps) = sim.complete_with_rule(default_rule, rng);
    Ok(RolloutOutcome { makespan, guided_steps, completion_steps })
}

/// Candidate rules evaluated at a state, in code order.
pub fn candidate_subset(cfg: &LabelConfig, rng: &mut SplitMix64) -> Vec<RuleId> {
    let b = cfg.breadth.count();
    let mut rules: Vec<RuleId> = if b >= NUM_RULES {
        RuleId::ALL.to_vec()
    } else if cfg.subset_includes_default {
        let others: Vec<RuleId> = RuleId::ALL.into_iter().filter(|&r| r != cfg.default_rule).collect();
        let mut picked: Vec<RuleId> = rng.sample_distinct(others.len(), b - 1).into_iter().map(|i| others[i]).collect();
        picked.push(cfg.default_rule);
        picked
    } else {
        rng.sample_distinct(NUM_RULES, b).into_iter().map(|i| RuleId::ALL[i]).collect()
    };
    rules.sort_unstable();
    rules
}

/// Seed for all randomness spent labeling one sampled state.
pub fn state_seed(cfg_seed: u64, instance_id: &str, state_index: usize) -> u64 {
    derive_seed(cfg_seed, &[TAG_STATE, fnv1a(instance_id.as_bytes()), state_index as u64])
}

/// Rolls out the candidate subset at one sampled state.
pub fn label_state(
    sampled: &SampledState<'_>,
    cfg: &LabelConfig,
    seed: u64,
) -> Result<(Vec<LabeledSample>, CostLedger)> {
    cfg.validate()?;
    let state = &sampled.state;
    let base = state_features(state)?;
    let instance = state.instance();
    let lb = instance.lower_bound();
    let candidates = candidate_subset(cfg, &mut SplitMix64::child(seed, &[TAG_SUBSET]));

    let mut ledger = CostLedger::default();
    let mut outcomes = Vec::with_capacity(candidates.len());
    for &rule in &candidates {
        let mut rng = SplitMix64::child(seed, &[TAG_ROLLOUT, rule.code() as u64]);
        let out = rollout(state, rule, cfg.depth, cfg.default_rule, &mut rng)?;
        ledger.rollouts += 1;
        ledger.steps += out.guided_steps as u64;
        ledger.completion_steps += out.completion_steps as u64;
        outcomes.push((rule, out.makespan.0));
    }
    let best = outcomes.iter().map(|&(_, m)| m).min().expect("breadth is at least 1");
    let samples = outcomes
        .into_iter()
        .map(|(rule, makespan)| LabeledSample {
            features: FeatureVector::from_parts(&base, rule),
            target: target_value(cfg.label_kind, makespan, best, lb),
            instance_id: String::from(instance.id()),
            state_index: sampled.index,
            decision: state.decisions_made(),
            rule,
            makespan,
            lower_bound: lb,
        })
        .collect();
    Ok((samples, ledger))
}

pub fn target_value(kind: LabelKind, makespan: Time, best: Time, lower_bound: Time) -> f64 {
    match kind {
        LabelKind::Regret => (makespan - best) as f64 / best as f64,
        LabelKind::Normalized => makespan as f64 / lower_bound as f64,
    }
}

/// Samples and labels every state of one instance.
pub fn label_instance(instance: &Instance, cfg: &LabelConfig) -> Result<(Vec<LabeledSample>, CostLedger)> {
    let mut rng = SplitMix64::child(cfg.seed, &[TAG_SAMPLING, fnv1a(instance.id().as_bytes())]);
    let states = sample_states(instance, cfg, &mut rng)?;
    let mut samples = Vec::with_capacity(states.len() * cfg.breadth.count());
    let mut ledger = CostLedger::default();
    for sampled in &states {
        let seed = state_seed(cfg.seed, instance.id(), sampled.index);
        let (s, l) = label_state(sampled, cfg, seed)?;
        samples.extend(s);
        ledger += l;
    }
    Ok((samples, ledger))
}

/// Labels every instance in order. The ledger's wall time is left at zero.
pub fn build_dataset(instances: &[Instance], cfg: &LabelConfig) -> Result<(Vec<LabeledSample>, CostLedger)> {
    if instances.is_empty() {
        return Err(Error::Config("no instances to label".into()));
    }
    cfg.validate()?;
    let mut dataset = Vec::new();
    let mut ledger = CostLedger::default();
    for inst in instances {
        let (s, l) = label_instance(inst, cfg)?;
        dataset.extend(s);
        ledger += l;
    }
    Ok((dataset, ledger))
}

/// Recomputes every target for `kind` from the stored rollout makespans.
///
/// Regret needs the best makespan per sampled state, which is recovered by
/// grouping on `(instance_id, state_index)`.
pub fn retarget(samples: &mut [LabeledSample], kind: LabelKind) {
    let mut best: BTreeMap<(&str, usize), Time> = BTreeMap::new();
    for s in samples.iter() {
        best.entry((s.instance_id.as_str(), s.state_index))
            .and_modify(|b| *b = (*b).min(s.makespan))
            .or_insert(s.makespan);
    }
    let best: Vec<Time> = samples.iter().map(|s| best[&(s.instance_id.as_str(), s.state_index)]).collect();
    for (s, b) in samples.iter_mut().zip(best) {
        s.target = target_value(kind, s.makespan, b, s.lower_bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_by_two;
    use crate::instance::generate_instance;

    #[test]
    fn loads_split_evenly() {
        let cfg = LabelConfig::default();
        assert_eq!(cfg.trajectory_loads(), [9, 8, 8]);
    }

    #[test]
    fn six_by_six_default_sampling() {
        let inst = generate_instance(6, 6, 3).unwrap();
        let cfg = LabelConfig::default();
        let mut rng = SplitMix64::new(1);
        let states = sample_states(&inst, &cfg, &mut rng).unwrap();
        assert_eq!(states.len(), 25);
        let per_traj: Vec<usize> = (0..3).map(|t| states.iter().filter(|s| s.trajectory == t).count()).collect();
        assert_eq!(per_traj, [9, 8, 8]);
        for s in &states {
            assert!(s.state.decisions_made() <= 35);
            assert!(s.state.is_feasible());
        }
        let mut rng = SplitMix64::new(1);
        assert_eq!(sample_states(&inst, &cfg, &mut rng).unwrap(), states);
    }

    #[test]
    fn too_many_states_is_config_error() {
        let inst = two_by_two();
        let cfg = LabelConfig { states_per_instance: 13, ..LabelConfig::default() };
        let mut rng = SplitMix64::new(1);
        assert!(matches!(sample_states(&inst, &cfg, &mut rng), Err(Error::Config(_))));
        let cfg = LabelConfig { states_per_instance: 12, ..LabelConfig::default() };
        assert_eq!(sample_states(&inst, &cfg, &mut rng).unwrap().len(), 12);
    }

    #[test]
    fn spt_one_step_then_fifo_on_two_by_two() {
        // SPT puts J1 on M1 [0,2]; FIFO then takes J0 (ready 0) on M0 [0,3],
        // J1 (ready 2) on M0 [3,7] and J0 on M1 [3,5].
        let inst = two_by_two();
        let state = ScheduleState::new(&inst);
        let mut rng = SplitMix64::new(0);
        let out = rollout(&state, RuleId::Spt, Depth::Steps(1), RuleId::Fifo, &mut rng).unwrap();
        assert_eq!(out.makespan, Makespan(7));
        assert_eq!((out.guided_steps, out.completion_steps), (1, 3));
    }

    #[test]
    fn full_depth_matches_complete_with_rule() {
        let inst = generate_instance(5, 4, 8).unwrap();
        let state = ScheduleState::new(&inst);
        for rule in RuleId::DETERMINISTIC {
            let mut rng = SplitMix64::new(0);
            let out = rollout(&state, rule, Depth::Full, RuleId::Fifo, &mut rng).unwrap();
            let mut direct = state.clone();
            let (m, steps) = direct.complete_with_rule(rule, &mut SplitMix64::new(0));
            assert_eq!(out.makespan, m);
            assert_eq!(out.guided_steps, steps);
            assert_eq!(out.completion_steps, 0);
            let deep = rollout(&state, rule, Depth::Steps(20), RuleId::Fifo, &mut rng).unwrap();
            assert_eq!(deep.makespan, m);
        }
    }

    #[test]
    fn rollout_rejects_terminal_state() {
        let inst = two_by_two();
        let state = ScheduleState::replay(&inst, [0, 0, 1, 1]).unwrap();
        let mut rng = SplitMix64::new(0);
        assert_eq!(rollout(&state, RuleId::Spt, Depth::Full, RuleId::Fifo, &mut rng), Err(Error::TerminalState));
    }

    #[test]
    fn regret_arithmetic() {
        assert_eq!(target_value(LabelKind::Regret, 100, 100, 90), 0.0);
        assert!((target_value(LabelKind::Regret, 110, 100, 90) - 0.10).abs() < 1e-15);
        assert!((target_value(LabelKind::Regret, 120, 100, 90) - 0.20).abs() < 1e-15);
        assert_eq!(target_value(LabelKind::Normalized, 120, 100, 100), 1.2);
    }

    #[test]
    fn subsets_contain_default() {
        let cfg = LabelConfig { breadth: Breadth::Count(3), default_rule: RuleId::Mopnr, ..LabelConfig::default() };
        for seed in 0..50 {
            let s = candidate_subset(&cfg, &mut SplitMix64::new(seed));
            assert_eq!(s.len(), 3);
            assert!(s.contains(&RuleId::Mopnr));
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
        let cfg = LabelConfig { breadth: Breadth::Count(1), subset_includes_default: false, ..cfg };
        let s = candidate_subset(&cfg, &mut SplitMix64::new(4));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn labeled_state_has_zero_regret_minimum() {
        let inst = generate_instance(6, 6, 2).unwrap();
        let cfg = LabelConfig::default();
        let (samples, ledger) = label_instance(&inst, &cfg).unwrap();
        assert_eq!(samples.len(), 25 * 7);
        assert_eq!(ledger.rollouts, 25 * 7);
        for chunk in samples.chunks(7) {
            let min = chunk.iter().map(|s| s.target).fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
            assert!(chunk.iter().all(|s| s.target >= 0.0));
            assert!(chunk.iter().all(|s| s.state_index == chunk[0].state_index));
        }
    }

    #[test]
    fn retarget_round_trips() {
        let inst = generate_instance(6, 6, 2).unwrap();
        let cfg = LabelConfig::default();
        let (regret, _) = label_instance(&inst, &cfg).unwrap();
        let norm_cfg = LabelConfig { label_kind: LabelKind::Normalized, ..cfg };
        let (norm, _) = label_instance(&inst, &norm_cfg).unwrap();
        let mut converted = regret.clone();
        retarget(&mut converted, LabelKind::Normalized);
        assert_eq!(converted, norm);
        retarget(&mut converted, LabelKind::Regret);
        assert_eq!(converted, regret);
    }

    #[test]
    fn empty_instance_list_is_rejected() {
        assert!(matches!(build_dataset(&[], &LabelConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn parse_depth_and_breadth() {
        assert_eq!("full".parse::<Depth>(), Ok(Depth::Full));
        assert_eq!("3".parse::<Depth>(), Ok(Depth::Steps(3)));
        assert!("0".parse::<Depth>().is_err());
        assert_eq!("5".parse::<Breadth>(), Ok(Breadth::Count(5)));
        assert!("8".parse::<Breadth>().is_err());
        assert_eq!("FULL".parse::<Breadth>(), Ok(Breadth::Full));
    }
}

//! Selection policies: which rule dispatches at each decision point.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::knn::{Prediction, SelectorModel};
use crate::rng::SplitMix64;
use crate::rules::{RuleId, NUM_RULES};
use crate::schedule::{Makespan, ScheduleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy<'m> {
    /// Always the same rule.
    Fixed(RuleId),
    /// A uniformly random rule at each decision (which may itself be RANDOM).
    RandomHh,
    /// Lowest predicted target.
    Argmin(&'m SelectorModel),
    /// Lowest `r_hat - lambda * sigma_hat`.
    Lcb(&'m SelectorModel, f64),
    /// The model's default rule unless the predicted best beats it by more
    /// than `lambda * sigma_hat(best)`.
    Gated(&'m SelectorModel, f64),
}

/// Parsed form of a policy spec string, before a model is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Fixed(RuleId),
    RandomHh,
    Argmin,
    Lcb(f64),
    Gated(f64),
}

impl PolicySpec {
    pub fn needs_model(self) -> bool {
        matches!(self, PolicySpec::Argmin | PolicySpec::Lcb(_) | PolicySpec::Gated(_))
    }

    /// Binds a model; learned specs fail without one.
    pub fn bind(self, model: Option<&SelectorModel>) -> Result<Policy<'_>> {
        let need = || Error::Config(format!("policy {self} needs a fitted model"));
        Ok(match self {
            PolicySpec::Fixed(r) => Policy::Fixed(r),
            PolicySpec::RandomHh => Policy::RandomHh,
            PolicySpec::Argmin => Policy::Argmin(model.ok_or_else(need)?),
            PolicySpec::Lcb(l) => Policy::Lcb(model.ok_or_else(need)?, l),
            PolicySpec::Gated(l) => Policy::Gated(model.ok_or_else(need)?, l),
        })
    }
}

impl core::fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PolicySpec::Fixed(r) => write!(f, "fixed:{r}"),
            PolicySpec::RandomHh => f.write_str("random-hh"),
            PolicySpec::Argmin => f.write_str("argmin"),
            PolicySpec::Lcb(l) => write!(f, "lcb:{l:?}"),
            PolicySpec::Gated(l) => write!(f, "gated:{l:?}"),
        }
    }
}

impl core::str::FromStr for PolicySpec {
    type Err = Error;

    /// `fixed:FIFO`, `random-hh`, `argmin`, `lcb:1.0`, `gated:1.0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a.trim())),
            None => (s, None),
        };
        let lambda = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Config(format!("policy {s:?} needs a lambda")))?;
            match a.parse::<f64>() {
                Ok(l) if l >= 0.0 => Ok(l),
                _ => Err(Error::Config(format!("lambda must be a non-negative number, got {a:?}"))),
            }
        };
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("fixed", Some(rule)) => Ok(PolicySpec::Fixed(rule.parse()?)),
            ("random-hh", None) | ("random_hh", None) => Ok(PolicySpec::RandomHh),
            ("argmin", None) => Ok(PolicySpec::Argmin),
            ("lcb", a) => Ok(PolicySpec::Lcb(lambda(a)?)),
            ("gated", a) => Ok(PolicySpec::Gated(lambda(a)?)),
            _ => Err(Error::Config(format!("unrecognized policy spec {s:?}"))),
        }
    }
}

/// Lowest-code argmin of a score over all rules.
fn argmin_rule(score: impl Fn(usize) -> f64) -> RuleId {
    let mut best = 0;
    let mut best_score = score(0);
    for code in 1..NUM_RULES {
        let s = score(code);
        if s < best_score {
            best = code;
            best_score = s;
        }
    }
    RuleId::ALL[best]
}

/// `argmin_h r_hat(h)`, ties to the lowest code.
pub fn argmin_choice(preds: &[Prediction; NUM_RULES]) -> RuleId {
    argmin_rule(|h| preds[h].r_hat)
}

/// `argmin_h r_hat(h) - lambda * sigma_hat(h)`, ties to the lowest code.
pub fn lcb_choice(preds: &[Prediction; NUM_RULES], lambda: f64) -> RuleId {
    argmin_rule(|h| preds[h].r_hat - lambda * preds[h].sigma_hat)
}

/// Switches from `default_rule` to the argmin only on a strict margin.
pub fn gated_choice(preds: &[Prediction; NUM_RULES], lambda: f64, default_rule: RuleId) -> RuleId {
    gated_choice_floored(preds, lambda, default_rule, 0.0)
}

/// [`gated_choice`] with the spread floored at `sigma_floor`, so that a
/// neighborhood of identical targets still leaves a margin of
/// `lambda * sigma_floor` to beat.
pub fn gated_choice_floored(
    preds: &[Prediction; NUM_RULES],
    lambda: f64,
    default_rule: RuleId,
    sigma_floor: f64,
) -> RuleId {
    let best = argmin_choice(preds);
    let gain = preds[default_rule.code()].r_hat - preds[best.code()].r_hat;
    if gain > lambda * preds[best.code()].sigma_hat.max(sigma_floor) {
        best
    } else {
        default_rule
    }
}

impl<'m> Policy<'m> {
    pub fn model(&self) -> Option<&'m SelectorModel> {
        match *self {
            Policy::Argmin(m) | Policy::Lcb(m, _) | Policy::Gated(m, _) => Some(m),
            Policy::Fixed(_) | Policy::RandomHh => None,
        }
    }

    pub fn spec(&self) -> PolicySpec {
        match *self {
            Policy::Fixed(r) => PolicySpec::Fixed(r),
            Policy::RandomHh => PolicySpec::RandomHh,
            Policy::Argmin(_) => PolicySpec::Argmin,
            Policy::Lcb(_, l) => PolicySpec::Lcb(l),
            Policy::Gated(_, l) => PolicySpec::Gated(l),
        }
    }

    pub fn choose_rule(&self, state: &ScheduleState<'_>, rng: &mut SplitMix64) -> Result<RuleId> {
        if state.is_complete() {
            return Err(Error::TerminalState);
        }
        Ok(match *self {
            Policy::Fixed(r) => r,
            Policy::RandomHh => RuleId::ALL[rng.index(NUM_RULES)],
            Policy::Argmin(m) => argmin_choice(&m.predict_all(state)?),
            Policy::Lcb(m, lambda) => lcb_choice(&m.predict_all(state)?, lambda),
            Policy::Gated(m, lambda) => {
                gated_choice_floored(&m.predict_all(state)?, lambda, m.default_rule(), m.epsilon())
            }
        })
    }

    /// Builds a complete schedule from the empty state, choosing a rule and
    /// then a job at each of the `J * M` decisions.
    pub fn run<'a>(&self, instance: &'a Instance, seed: u64) -> Result<PolicyRun<'a>> {
        let mut rng = SplitMix64::new(seed);
        let mut state = ScheduleState::new(instance);
        let mut choices = Vec::with_capacity(instance.num_ops());
        while !state.is_complete() {
            let rule = self.choose_rule(&state, &mut rng)?;
            let job = rule.select_job(&state, &mut rng)?;
            state.dispatch(job)?;
            choices.push(rule);
        }
        Ok(PolicyRun { makespan: state.makespan(), state, choices })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun<'a> {
    pub makespan: Makespan,
    pub state: ScheduleState<'a>,
    /// Rule chosen at each decision.
    pub choices: Vec<RuleId>,
}

impl PolicyRun<'_> {
    /// Fraction of decisions that did not use `default_rule`.
    pub fn switch_rate(&self, default_rule: RuleId) -> f64 {
        if self.choices.is_empty() {
            return 0.0;
        }
        self.choices.iter().filter(|&&r| r != default_rule).count() as f64 / self.choices.len() as f64
    }
}

/// Display name used in reports, e.g. `regret-gated-l1.0`.
pub fn method_name(kind: Option<crate::labeler::LabelKind>, spec: PolicySpec) -> String {
    let prefix = kind.map(|k| format!("{}-", k.name())).unwrap_or_default();
    match spec {
        PolicySpec::Fixed(r) => format!("{r}"),
        PolicySpec::RandomHh => String::from("Random-HH"),
        PolicySpec::Argmin => format!("{prefix}argmin"),
        PolicySpec::Lcb(l) => format!("{prefix}lcb-l{l:?}"),
        PolicySpec::Gated(l) => format!("{prefix}gated-l{l:?}"),
    }
}

//! Evaluation protocol: RPD against the per-instance hindsight best fixed
//! rule, win counts, the label/policy/lambda ablation grid, the rollout
//! depth x breadth sweep and the cross-size probe.
//!
//! Instances are evaluated in parallel; every run draws its seed from the
//! evaluation seed, the instance id and the method name, so a report does not
//! depend on thread count or on which other methods share it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rulegate_core::eval::{oracle_fixed, summarize};
use rulegate_core::labeler::{Breadth, Depth, LabelKind};
use rulegate_core::policy::method_name;
use rulegate_core::rng::{derive_seed, fnv1a};
use rulegate_core::rules::run_fixed_rule;
use rulegate_core::{Instance, Policy, PolicySpec, RuleId, SelectorModel, SplitMix64};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::fingerprint_hex;
use crate::labeling::build_dataset;

pub const REPORT_FORMAT: &str = "rulegate-report v1";
pub const SWEEP_FORMAT: &str = "rulegate-sweep v1";
pub const ORACLE_NAME: &str = "Oracle-Fixed";

const TAG_EVAL: u64 = 0x4556_414c;

/// A named policy in a report.
#[derive(Debug, Clone)]
pub struct Method<'m> {
    pub name: String,
    pub policy: Policy<'m>,
}

impl<'m> Method<'m> {
    pub fn new(name: impl Into<String>, policy: Policy<'m>) -> Self {
        Method { name: name.into(), policy }
    }

    /// Named after the policy and, for learned policies, the model's label.
    pub fn auto(policy: Policy<'m>) -> Self {
        let kind = policy.model().map(|m| m.label_kind());
        Method { name: method_name(kind, policy.spec()), policy }
    }

    fn is_stochastic(&self) -> bool {
        matches!(self.policy, Policy::RandomHh | Policy::Fixed(RuleId::Random))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub seed: u64,
    /// Runs averaged for stochastic methods.
    pub random_hh_seeds: usize,
    /// Also let the 5-seed mean of FIXED(RANDOM) set the reference.
    pub oracle_includes_random: bool,
}

impl EvalOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        EvalOptions {
            seed: cfg.seed,
            random_hh_seeds: cfg.random_hh_seeds,
            oracle_includes_random: cfg.oracle_includes_random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    pub policy: String,
    pub mean_rpd: f64,
    pub median_rpd: f64,
    pub wins: usize,
    /// Share of decisions not taken by the model's default rule.
    pub switch_rate: Option<f64>,
    pub makespans: Vec<f64>,
    pub rpds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub fingerprint: String,
    pub label_kind: LabelKind,
    pub default_rule: RuleId,
    pub k: usize,
    pub samples: usize,
}

impl ModelInfo {
    pub fn of(model: &SelectorModel) -> Self {
        ModelInfo {
            fingerprint: fingerprint_hex(model),
            label_kind: model.label_kind(),
            default_rule: model.default_rule(),
            k: model.k(),
            samples: model.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub title: String,
    pub scale: String,
    pub instance_ids: Vec<String>,
    pub eval_seed: u64,
    pub random_hh_seeds: usize,
    pub oracle_includes_random: bool,
    pub models: BTreeMap<String, ModelInfo>,
    pub config: Value,
    /// Oracle-Fixed first, then methods in the order given.
    pub rows: Vec<MethodRow>,
}

impl EvalReport {
    pub fn row(&self, name: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn mean_rpd(&self, name: &str) -> Option<f64> {
        self.row(name).map(|r| r.mean_rpd)
    }
}

fn run_seed(opts: &EvalOptions, instance: &Instance, method: &str, rep: usize) -> u64 {
    derive_seed(opts.seed, &[TAG_EVAL, fnv1a(instance.id().as_bytes()), fnv1a(method.as_bytes()), rep as u64])
}

struct InstanceResult {
    oracle: f64,
    makespans: Vec<f64>,
    switch_rates: Vec<Option<f64>>,
}

fn evaluate_instance(methods: &[Method<'_>], instance: &Instance, opts: &EvalOptions) -> Result<InstanceResult> {
    let reps = opts.random_hh_seeds.max(1);
    let mut oracle = oracle_fixed(instance, &RuleId::DETERMINISTIC, opts.seed)?.0 as f64;
    if opts.oracle_includes_random {
        let total: u64 = (0..reps)
            .map(|rep| {
                let mut rng = SplitMix64::new(run_seed(opts, instance, "FIXED-RANDOM", rep));
                run_fixed_rule(instance, RuleId::Random, &mut rng)
            })
            .sum();
        oracle = oracle.min(total as f64 / reps as f64);
    }
    let mut makespans = Vec::with_capacity(methods.len());
    let mut switch_rates = Vec::with_capacity(methods.len());
    for m in methods {
        let runs = if m.is_stochastic() { reps } else { 1 };
        let mut total = 0u64;
        let mut switched = 0.0;
        for rep in 0..runs {
            let run = m.policy.run(instance, run_seed(opts, instance, &m.name, rep))?;
            run.state.verify().map_err(|v| Error::Infeasible(format!("{} on {}: {}", m.name, instance.id(), v.0)))?;
            total += run.makespan.0;
            if let Some(model) = m.policy.model() {
                switched += run.switch_rate(model.default_rule());
            }
        }
        makespans.push(total as f64 / runs as f64);
        switch_rates.push(m.policy.model().map(|_| switched / runs as f64));
    }
    Ok(InstanceResult { oracle, makespans, switch_rates })
}

/// Runs every method on every test instance and aggregates RPD and wins.
pub fn evaluate(
    title: &str,
    methods: &[Method<'_>],
    test: &[Instance],
    opts: &EvalOptions,
    config: Value,
) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(Error::Config("no methods to evaluate".into()));
    }
    if test.is_empty() {
        return Err(Error::Config("no test instances".into()));
    }
    let results = test.par_iter().map(|inst| evaluate_instance(methods, inst, opts)).collect::<Result<Vec<_>>>()?;

    let n = test.len();
    let reference: Vec<f64> = results.iter().map(|r| r.oracle).collect();
    let mut names = vec![ORACLE_NAME.to_string()];
    let mut table = vec![reference.clone()];
    let mut competing = vec![false];
    for (i, m) in methods.iter().enumerate() {
        names.push(m.name.clone());
        table.push(results.iter().map(|r| r.makespans[i]).collect());
        competing.push(true);
    }
    let summaries = summarize(&names, &table, &competing, &reference)?;

    let mut rows = Vec::with_capacity(summaries.len());
    for (i, s) in summaries.into_iter().enumerate() {
        let (policy, switch_rate) = if i == 0 {
            ("oracle".to_string(), None)
        } else {
            let m = &methods[i - 1];
            let rate = m
                .policy
                .model()
                .map(|_| results.iter().map(|r| r.switch_rates[i - 1].unwrap_or(0.0)).sum::<f64>() / n as f64);
            (m.policy.spec().to_string(), rate)
        };
        rows.push(MethodRow {
            name: s.name,
            policy,
            mean_rpd: s.mean_rpd,
            median_rpd: s.median_rpd,
            wins: s.wins,
            switch_rate,
            makespans: s.makespans,
            rpds: s.rpds,
        });
    }

    let mut models = BTreeMap::new();
    for m in methods {
        if let Some(model) = m.policy.model() {
            models.insert(model.label_kind().name().to_string(), ModelInfo::of(model));
        }
    }
    let first = &test[0];
    let scale = if test.iter().all(|t| t.num_jobs() == first.num_jobs() && t.num_machines() == first.num_machines()) {
        format!("{}x{}", first.num_jobs(), first.num_machines())
    } else {
        "mixed".to_string()
    };
    Ok(EvalReport {
        format: REPORT_FORMAT.into(),
        title: title.into(),
        scale,
        instance_ids: test.iter().map(|t| t.id().to_string()).collect(),
        eval_seed: opts.seed,
        random_hh_seeds: opts.random_hh_seeds,
        oracle_includes_random: opts.oracle_includes_random,
        models,
        config,
        rows,
    })
}

/// Fixed-rule baselines, best to worst in the usual ranking.
pub const BASELINE_RULES: [RuleId; 6] =
    [RuleId::Fifo, RuleId::Mopnr, RuleId::Mwkr, RuleId::Spt, RuleId::Lpt, RuleId::Lwkr];

/// The main comparison: learned selectors, fixed rules and Random-HH.
pub fn main_methods<'m>(regret: &'m SelectorModel, normalized: &'m SelectorModel, lambda: f64) -> Vec<Method<'m>> {
    let mut methods = vec![
        Method::auto(Policy::Gated(regret, lambda)),
        Method::auto(Policy::Argmin(regret)),
        Method::auto(Policy::Argmin(normalized)),
    ];
    methods.extend(BASELINE_RULES[..3].iter().map(|&r| Method::auto(Policy::Fixed(r))));
    methods.push(Method::auto(Policy::RandomHh));
    methods.extend(BASELINE_RULES[3..].iter().map(|&r| Method::auto(Policy::Fixed(r))));
    methods
}

/// Both label kinds crossed with argmin, gated and LCB selection.
pub fn ablation_methods<'m>(
    regret: &'m SelectorModel,
    normalized: &'m SelectorModel,
    lambdas: &[f64],
) -> Vec<Method<'m>> {
    let mut methods = Vec::with_capacity(2 * (1 + 2 * lambdas.len()));
    for model in [regret, normalized] {
        methods.push(Method::auto(Policy::Argmin(model)));
        for &l in lambdas {
            methods.push(Method::auto(Policy::Gated(model, l)));
        }
        for &l in lambdas {
            methods.push(Method::auto(Policy::Lcb(model, l)));
        }
    }
    methods
}

/// Methods for a list of policy spec strings; learned specs use `models`
/// keyed by label kind, or every model when several are loaded.
pub fn methods_from_specs<'m>(specs: &[String], models: &[&'m SelectorModel]) -> Result<Vec<Method<'m>>> {
    let mut out = Vec::new();
    for s in specs {
        let spec: PolicySpec = s.parse()?;
        if spec.needs_model() {
            if models.is_empty() {
                return Err(Error::Config(format!("policy {s:?} needs a model")));
            }
            for &m in models {
                out.push(Method::auto(spec.bind(Some(m))?));
            }
        } else {
            out.push(Method::auto(spec.bind(None)?));
        }
    }
    Ok(out)
}

/// Runs the ablation grid on a shared test set.
pub fn ablation_grid(
    regret: &SelectorModel,
    normalized: &SelectorModel,
    test: &[Instance],
    lambdas: &[f64],
    opts: &EvalOptions,
    config: Value,
) -> Result<EvalReport> {
    evaluate("ablation", &ablation_methods(regret, normalized, lambdas), test, opts, config)
}

/// Fixed baselines plus the gated and argmin selectors of a model trained at
/// another scale. The model is only borrowed, so no refit can happen.
pub fn generalization_probe(
    regret: &SelectorModel,
    test: &[Instance],
    lambda: f64,
    opts: &EvalOptions,
    config: Value,
) -> Result<EvalReport> {
    let before = regret.fingerprint();
    let mut methods = vec![Method::auto(Policy::Gated(regret, lambda)), Method::auto(Policy::Argmin(regret))];
    methods.extend(BASELINE_RULES[..3].iter().map(|&r| Method::auto(Policy::Fixed(r))));
    methods.push(Method::auto(Policy::RandomHh));
    methods.extend(BASELINE_RULES[3..].iter().map(|&r| Method::auto(Policy::Fixed(r))));
    let report = evaluate("probe", &methods, test, opts, config)?;
    debug_assert_eq!(before, regret.fingerprint());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: String,
    pub breadth: String,
    pub wall_seconds: f64,
    pub rollouts: u64,
    pub steps: u64,
    pub completion_steps: u64,
    pub samples: usize,
    pub mean_rpd: f64,
    pub median_rpd: f64,
    pub switch_rate: f64,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub format: String,
    pub scale: String,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub default_rule: RuleId,
    pub lambda: f64,
    pub config: Value,
    pub rows: Vec<SweepRow>,
}

/// Relabels, refits and evaluates the gated selector for every depth and
/// breadth. All cells label the same sampled states (sampling seeds do not
/// depend on depth or breadth) and share the evaluation seed.
pub fn pareto_sweep(
    train: &[Instance],
    test: &[Instance],
    cfg: &RunConfig,
    default_rule: RuleId,
    opts: &EvalOptions,
) -> Result<SweepReport> {
    let mut rows = Vec::new();
    for &depth in &cfg.sweep_depths {
        for &breadth in &cfg.sweep_breadths {
            rows.push(sweep_cell(train, test, cfg, default_rule, opts, depth, breadth)?);
        }
    }
    let first = &test[0];
    Ok(SweepReport {
        format: SWEEP_FORMAT.into(),
        scale: format!("{}x{}", first.num_jobs(), first.num_machines()),
        train_ids: train.iter().map(|t| t.id().to_string()).collect(),
        test_ids: test.iter().map(|t| t.id().to_string()).collect(),
        default_rule,
        lambda: cfg.lambda,
        config: cfg.echo(),
        rows,
    })
}

fn sweep_cell(
    train: &[Instance],
    test: &[Instance],
    cfg: &RunConfig,
    default_rule: RuleId,
    opts: &EvalOptions,
    depth: Depth,
    breadth: Breadth,
) -> Result<SweepRow> {
    let mut lc = cfg.label_config(default_rule, LabelKind::Regret);
    lc.depth = depth;
    lc.breadth = breadth;
    let (dataset, ledger) = build_dataset(train, &lc)?;
    let model = SelectorModel::fit(&dataset, cfg.k, cfg.epsilon, LabelKind::Regret, default_rule)?;
    let method = Method::auto(Policy::Gated(&model, cfg.lambda));
    let report = evaluate("sweep-cell", std::slice::from_ref(&method), test, opts, Value::Null)?;
    let row = &report.rows[1];
    Ok(SweepRow {
        depth: depth.to_string(),
        breadth: breadth.to_string(),
        wall_seconds: ledger.wall_seconds,
        rollouts: ledger.rollouts,
        steps: ledger.steps,
        completion_steps: ledger.completion_steps,
        samples: dataset.len(),
        mean_rpd: row.mean_rpd,
        median_rpd: row.median_rpd,
        switch_rate: row.switch_rate.unwrap_or(0.0),
        fingerprint: fingerprint_hex(&model),
    })
}

fn csv_preamble(format: &str, config: &Value) -> Result<Vec<u8>> {
    Ok(format!("# {format}\n# config {}\n", serde_json::to_string(config)?).into_bytes())
}

/// One row per method.
pub fn report_csv(report: &EvalReport) -> Result<Vec<u8>> {
    let mut out = csv_preamble(&report.format, &report.config)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["method", "policy", "mean_rpd", "median_rpd", "wins", "switch_rate"])?;
        for r in &report.rows {
            w.write_record([
                r.name.clone(),
                r.policy.clone(),
                format!("{:.4}", r.mean_rpd),
                format!("{:.4}", r.median_rpd),
                r.wins.to_string(),
                r.switch_rate.map(|s| format!("{s:.4}")).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
    }
    Ok(out)
}

/// One row per sweep cell.
pub fn sweep_csv(report: &SweepReport) -> Result<Vec<u8>> {
    let mut out = csv_preamble(&report.format, &report.config)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "depth",
            "breadth",
            "wall_seconds",
            "rollouts",
            "steps",
            "completion_steps",
            "mean_rpd",
            "median_rpd",
            "switch_rate",
        ])?;
        for r in &report.rows {
            w.write_record([
                r.depth.clone(),
                r.breadth.clone(),
                format!("{:.3}", r.wall_seconds),
                r.rollouts.to_string(),
                r.steps.to_string(),
                r.completion_steps.to_string(),
                format!("{:.4}", r.mean_rpd),
                format!("{:.4}", r.median_rpd),
                format!("{:.4}", r.switch_rate),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep>", e))?;
    }
    Ok(out)
}

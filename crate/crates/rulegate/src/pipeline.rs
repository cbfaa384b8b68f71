//! The pipeline stages behind each subcommand, reading and writing a fixed
//! directory layout under the output root:
//!
//! ```text
//! instances/<scale>/{train,test}/*.json
//! data/<scale>/dataset.csv, ledger.json
//! models/<scale>/{regret,normalized}.model
//! reports/<scale>/{eval,ablate,sweep,probe}.{json,csv}
//! figures/*.svg
//! ```

use std::path::{Path, PathBuf};

use rulegate_core::instance::generate_set;
use rulegate_core::labeler::{retarget, LabelKind};
use rulegate_core::{best_fixed_rule, Instance, PolicySpec, RuleId, SelectorModel, Split};
use serde::Serialize;
use serde_json::Value;

use crate::config::{RunConfig, Scale};
use crate::error::{Error, Result};
use crate::formats::{self, DatasetMeta, LedgerFile};
use crate::harness::{self, EvalOptions, EvalReport, SweepReport};
use crate::labeling::build_dataset;
use crate::svg;

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn instances(&self, scale: Scale, split: Split) -> PathBuf {
        self.root.join("instances").join(scale.to_string()).join(split.as_str())
    }

    pub fn dataset(&self, scale: Scale) -> PathBuf {
        self.root.join("data").join(scale.to_string()).join("dataset.csv")
    }

    pub fn ledger(&self, scale: Scale) -> PathBuf {
        self.root.join("data").join(scale.to_string()).join("ledger.json")
    }

    pub fn model(&self, scale: Scale, kind: LabelKind) -> PathBuf {
        self.root.join("models").join(scale.to_string()).join(format!("{}.model", kind.name()))
    }

    /// `reports/<scale>/<name>.json`; the CSV sits next to it.
    pub fn report(&self, scale: Scale, name: &str) -> PathBuf {
        self.root.join("reports").join(scale.to_string()).join(format!("{name}.json"))
    }

    pub fn figures(&self) -> PathBuf {
        self.root.join("figures")
    }
}

/// Instances of one split, generated deterministically from the config.
pub fn generate_split(cfg: &RunConfig, scale: Scale, split: Split) -> Result<Vec<Instance>> {
    let count = match split {
        Split::Train => cfg.train_count,
        Split::Test => cfg.test_count,
    };
    Ok(generate_set(scale.jobs, scale.machines, count, split, cfg.seed)?)
}

/// Writes the train and test sets of `cfg.scale`.
pub fn gen(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let echo = cfg.echo();
    let mut written = Vec::new();
    for split in [Split::Train, Split::Test] {
        let dir = layout.instances(cfg.scale, split);
        for inst in generate_split(cfg, cfg.scale, split)? {
            let path = dir.join(format!("{}.json", inst.id()));
            formats::write_instance(&path, &inst, Some(&echo))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn load_split(layout: &Layout, scale: Scale, split: Split) -> Result<Vec<Instance>> {
    let dir = layout.instances(scale, split);
    if !dir.is_dir() {
        return Err(Error::format(&dir, "missing instances; run `gen` first"));
    }
    formats::read_instance_dir(&dir)
}

/// Picks the default rule on the training set, labels it and writes the
/// dataset and cost ledger. Targets use the first configured label kind;
/// rollout makespans are stored so other kinds can be derived at fit time.
pub fn label(cfg: &RunConfig, layout: &Layout) -> Result<(Vec<rulegate_core::LabeledSample>, LedgerFile)> {
    cfg.validate()?;
    let train = load_split(layout, cfg.scale, Split::Train)?;
    let default_rule = best_fixed_rule(&train, &RuleId::DETERMINISTIC, cfg.seed)?;
    let kind = cfg.label_kinds[0];
    let (dataset, ledger) = build_dataset(&train, &cfg.label_config(default_rule, kind))?;
    let meta = DatasetMeta::new(kind, cfg.depth, cfg.breadth, default_rule, dataset.len(), cfg.echo());
    formats::write_dataset(&layout.dataset(cfg.scale), &dataset, &meta)?;
    let ledger = LedgerFile::new(&ledger, cfg.echo());
    formats::write_json(&layout.ledger(cfg.scale), &ledger)?;
    Ok((dataset, ledger))
}

/// Fits one model per configured label kind from the stored dataset.
pub fn fit(cfg: &RunConfig, layout: &Layout) -> Result<Vec<SelectorModel>> {
    cfg.validate()?;
    let (mut dataset, meta) = formats::read_dataset(&layout.dataset(cfg.scale))?;
    let mut models = Vec::new();
    for &kind in &cfg.label_kinds {
        if kind != meta.label_kind {
            retarget(&mut dataset, kind);
        }
        let model = SelectorModel::fit(&dataset, cfg.k, cfg.epsilon, kind, meta.default_rule)?;
        formats::write_model(&layout.model(cfg.scale, kind), &model, &cfg.echo())?;
        models.push(model);
    }
    Ok(models)
}

pub fn load_model(layout: &Layout, scale: Scale, kind: LabelKind) -> Result<SelectorModel> {
    Ok(formats::read_model(&layout.model(scale, kind))?.0)
}

fn write_report<T: Serialize>(path: &Path, report: &T, csv: Vec<u8>) -> Result<()> {
    formats::write_json(path, report)?;
    formats::write_atomic(&path.with_extension("csv"), &csv)
}

/// The main comparison, or the configured policy list when one is given.
pub fn eval(cfg: &RunConfig, layout: &Layout) -> Result<EvalReport> {
    cfg.validate()?;
    let test = load_split(layout, cfg.scale, Split::Test)?;
    let opts = EvalOptions::from_config(cfg);
    let report = if cfg.policies.is_empty() {
        let regret = load_model(layout, cfg.scale, LabelKind::Regret)?;
        let normalized = load_model(layout, cfg.scale, LabelKind::Normalized)?;
        let methods = harness::main_methods(&regret, &normalized, cfg.lambda);
        harness::evaluate("eval", &methods, &test, &opts, cfg.echo())?
    } else {
        let needs_model = cfg
            .policies
            .iter()
            .map(|s| s.parse::<PolicySpec>().map(PolicySpec::needs_model))
            .collect::<std::result::Result<Vec<bool>, _>>()?
            .into_iter()
            .any(|b| b);
        let models = if needs_model {
            cfg.label_kinds.iter().map(|&k| load_model(layout, cfg.scale, k)).collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let refs: Vec<&SelectorModel> = models.iter().collect();
        let methods = harness::methods_from_specs(&cfg.policies, &refs)?;
        harness::evaluate("eval", &methods, &test, &opts, cfg.echo())?
    };
    let path = layout.report(cfg.scale, "eval");
    write_report(&path, &report, harness::report_csv(&report)?)?;
    Ok(report)
}

pub fn ablate(cfg: &RunConfig, layout: &Layout) -> Result<EvalReport> {
    cfg.validate()?;
    let test = load_split(layout, cfg.scale, Split::Test)?;
    let regret = load_model(layout, cfg.scale, LabelKind::Regret)?;
    let normalized = load_model(layout, cfg.scale, LabelKind::Normalized)?;
    let report = harness::ablation_grid(
        &regret,
        &normalized,
        &test,
        &cfg.ablation_lambdas,
        &EvalOptions::from_config(cfg),
        cfg.echo(),
    )?;
    write_report(&layout.report(cfg.scale, "ablate"), &report, harness::report_csv(&report)?)?;
    Ok(report)
}

/// Labels the first `sweep_train_count` training instances once per cell.
pub fn sweep(cfg: &RunConfig, layout: &Layout) -> Result<SweepReport> {
    cfg.validate()?;
    let mut train = load_split(layout, cfg.scale, Split::Train)?;
    train.truncate(cfg.sweep_train_count);
    let test = load_split(layout, cfg.scale, Split::Test)?;
    let default_rule = best_fixed_rule(&train, &RuleId::DETERMINISTIC, cfg.seed)?;
    let report = harness::pareto_sweep(&train, &test, cfg, default_rule, &EvalOptions::from_config(cfg))?;
    write_report(&layout.report(cfg.scale, "sweep"), &report, harness::sweep_csv(&report)?)?;
    Ok(report)
}

/// Evaluates the `cfg.scale` regret model on test instances of
/// `cfg.probe_test_scale`, read from the layout when present and generated
/// otherwise.
pub fn probe(cfg: &RunConfig, layout: &Layout) -> Result<EvalReport> {
    cfg.validate()?;
    let regret = load_model(layout, cfg.scale, LabelKind::Regret)?;
    let scale = cfg.probe_test_scale;
    let test = if layout.instances(scale, Split::Test).is_dir() {
        load_split(layout, scale, Split::Test)?
    } else {
        generate_split(cfg, scale, Split::Test)?
    };
    let report = harness::generalization_probe(&regret, &test, cfg.lambda, &EvalOptions::from_config(cfg), cfg.echo())?;
    let name = format!("probe-{scale}");
    write_report(&layout.report(cfg.scale, &name), &report, harness::report_csv(&report)?)?;
    Ok(report)
}

/// Runs one policy on one instance and renders the schedule.
pub fn gantt(instance: &Instance, spec: PolicySpec, model: Option<&SelectorModel>, seed: u64) -> Result<String> {
    let policy = spec.bind(model)?;
    let run = policy.run(instance, seed)?;
    run.state.verify().map_err(|v| Error::Infeasible(v.0))?;
    let name = harness::Method::auto(policy).name;
    let title = format!("{} on {} (makespan {})", name, instance.id(), run.makespan.0);
    Ok(svg::gantt(instance, run.state.log(), &title))
}

/// Renders a figure for a report file: a mean-RPD bar chart for method
/// reports, a cost-vs-RPD scatter for sweeps.
pub fn plot(report_path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::format(report_path, e.to_string()))?;
    match value.get("format").and_then(Value::as_str) {
        Some(harness::REPORT_FORMAT) => {
            let report: EvalReport =
                serde_json::from_value(value).map_err(|e| Error::format(report_path, e.to_string()))?;
            let bars: Vec<(String, f64)> = report
                .rows
                .iter()
                .filter(|r| r.name != harness::ORACLE_NAME)
                .map(|r| (r.name.clone(), r.mean_rpd))
                .collect();
            let title = format!("{} ({}, {} instances)", report.title, report.scale, report.instance_ids.len());
            Ok(svg::bar_chart(&bars, &title, "mean RPD (%)"))
        }
        Some(harness::SWEEP_FORMAT) => {
            let report: SweepReport =
                serde_json::from_value(value).map_err(|e| Error::format(report_path, e.to_string()))?;
            let points: Vec<(f64, f64, String)> = report
                .rows
                .iter()
                .map(|r| (r.steps as f64, r.mean_rpd, format!("d={} b={}", r.depth, r.breadth)))
                .collect();
            let title = format!("rollout cost vs test RPD ({})", report.scale);
            Ok(svg::scatter(&points, &title, "candidate-guided rollout steps (decisions)", "mean RPD (%)"))
        }
        other => Err(Error::format(report_path, format!("unknown report format {other:?}"))),
    }
}

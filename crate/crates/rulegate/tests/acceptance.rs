//! End-to-end acceptance checks on regenerated data. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rulegate::config::{RunConfig, Scale};
use rulegate::harness::{self, evaluate, EvalOptions, EvalReport, Method};
use rulegate::labeling::{build_dataset, with_threads};
use rulegate_core::features::state_features;
use rulegate_core::labeler::{label_instance, retarget, sample_states, state_seed, LabelConfig, LabelKind};
use rulegate_core::rng::fnv1a;
use rulegate_core::{
    best_fixed_rule, generate_instance, generate_set, FeatureVector, Instance, LabeledSample, Policy, RuleId,
    ScheduleState, SelectorModel, Split, SplitMix64,
};

const SCALE_10: Scale = Scale::new(10, 10);
const PROBE_SCALE: Scale = Scale::new(15, 10);
// stream tags the labeler uses for state sampling and rollouts
const TAG_SAMPLING: u64 = 0;
const TAG_ROLLOUT: u64 = 3;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// A trained setup for one scale and seed.
struct Setup {
    cfg: RunConfig,
    train: Vec<Instance>,
    test: Vec<Instance>,
    default_rule: RuleId,
    regret: SelectorModel,
    normalized: SelectorModel,
}

impl Setup {
    fn new(scale: Scale, seed: u64) -> Self {
        let cfg = RunConfig { scale, seed, ..RunConfig::default() };
        let train = generate_set(scale.jobs, scale.machines, cfg.train_count, Split::Train, seed).unwrap();
        let test = generate_set(scale.jobs, scale.machines, cfg.test_count, Split::Test, seed).unwrap();
        let default_rule = best_fixed_rule(&train, &RuleId::DETERMINISTIC, seed).unwrap();
        let (mut data, _) = build_dataset(&train, &cfg.label_config(default_rule, LabelKind::Regret)).unwrap();
        let regret = SelectorModel::fit(&data, cfg.k, cfg.epsilon, LabelKind::Regret, default_rule).unwrap();
        retarget(&mut data, LabelKind::Normalized);
        let normalized = SelectorModel::fit(&data, cfg.k, cfg.epsilon, LabelKind::Normalized, default_rule).unwrap();
        Setup { cfg, train, test, default_rule, regret, normalized }
    }

    fn opts(&self) -> EvalOptions {
        EvalOptions::from_config(&self.cfg)
    }

    fn main_report(&self) -> EvalReport {
        let methods = harness::main_methods(&self.regret, &self.normalized, self.cfg.lambda);
        evaluate("main", &methods, &self.test, &self.opts(), self.cfg.echo()).unwrap()
    }
}

fn mean_of(report: &EvalReport, methods: &[Method<'_>], policy_pred: impl Fn(&Policy<'_>) -> bool) -> f64 {
    let m = methods.iter().find(|m| policy_pred(&m.policy)).expect("method present");
    report.mean_rpd(&m.name).unwrap()
}

fn fixed_mean(report: &EvalReport, rule: RuleId) -> f64 {
    let name = Method::auto(Policy::Fixed(rule)).name;
    report.mean_rpd(&name).unwrap()
}

fn random_hh_mean(report: &EvalReport) -> f64 {
    report.mean_rpd(&Method::auto(Policy::RandomHh).name).unwrap()
}

/// Feasibility checked from the dispatch log alone.
fn log_is_feasible(inst: &Instance, ops: &[(usize, usize, usize, u64, u64)]) -> bool {
    let (j, m) = (inst.num_jobs(), inst.num_machines());
    if ops.len() != j * m {
        return false;
    }
    let mut seen = vec![vec![None; m]; j];
    for &(job, op, machine, start, end) in ops {
        if job >= j || op >= m || seen[job][op].is_some() {
            return false;
        }
        if inst.routing()[job][op] != machine || end != start + inst.proc_times()[job][op] as u64 {
            return false;
        }
        seen[job][op] = Some((start, end));
    }
    for row in &seen {
        for w in row.windows(2) {
            if w[0].unwrap().1 > w[1].unwrap().0 {
                return false;
            }
        }
    }
    for machine in 0..m {
        let mut slots: Vec<(u64, u64)> = ops.iter().filter(|o| o.2 == machine).map(|o| (o.3, o.4)).collect();
        slots.sort_unstable();
        if slots.windows(2).any(|w| w[0].1 > w[1].0) {
            return false;
        }
    }
    true
}

fn small_model(scale: Scale, seed: u64) -> SelectorModel {
    let train = generate_set(scale.jobs, scale.machines, 6, Split::Train, seed).unwrap();
    let cfg = LabelConfig { states_per_instance: 10, seed, ..LabelConfig::default() };
    let (data, _) = build_dataset(&train, &cfg).unwrap();
    SelectorModel::fit(&data, 7, 1e-8, LabelKind::Regret, RuleId::Fifo).unwrap()
}

fn c1_feasibility() -> Outcome {
    let t = Instant::now();
    let models: Vec<SelectorModel> = Scale::STANDARD.iter().map(|&s| small_model(s, 11)).collect();
    let mut rng = SplitMix64::new(2024);
    let mut bad = 0;
    for i in 0..1000 {
        let s = i % 3;
        let scale = Scale::STANDARD[s];
        let inst = generate_instance(scale.jobs, scale.machines, rng.next_u64()).unwrap();
        let model = &models[s];
        let lambda = rng.next_f64() * 3.0;
        let policy = match rng.index(5) {
            0 => Policy::Fixed(RuleId::ALL[rng.index(7)]),
            1 => Policy::RandomHh,
            2 => Policy::Argmin(model),
            3 => Policy::Lcb(model, lambda),
            _ => Policy::Gated(model, lambda),
        };
        let run = policy.run(&inst, rng.next_u64()).unwrap();
        let ops: Vec<_> = run.state.log().iter().map(|d| (d.job, d.op, d.machine, d.start, d.end)).collect();
        if run.state.verify().is_err() || !log_is_feasible(&inst, &ops) || run.makespan.0 < inst.lower_bound() {
            bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(bad == 0 && secs < 60.0, format!("1000 triples, {bad} infeasible, {secs:.1}s (limit 60s)"))
}

fn c2_labels() -> Outcome {
    let train = generate_set(10, 10, 20, Split::Train, 5).unwrap();
    let cfg = LabelConfig { seed: 5, ..LabelConfig::default() };
    let (mut states, mut bad_regret, mut bad_norm, mut bad_sim) = (0, 0, 0, 0);
    for inst in &train {
        let (samples, _) = label_instance(inst, &cfg).unwrap();
        let mut rng = SplitMix64::child(cfg.seed, &[TAG_SAMPLING, fnv1a(inst.id().as_bytes())]);
        let sampled = sample_states(inst, &cfg, &mut rng).unwrap();
        states += sampled.len();
        for (idx, _) in sampled.iter().enumerate() {
            let t: Vec<f64> = samples.iter().filter(|s| s.state_index == idx).map(|s| s.target).collect();
            if t.len() != 7 || t.iter().any(|&x| x < 0.0) || t.iter().cloned().fold(f64::INFINITY, f64::min) != 0.0 {
                bad_regret += 1;
            }
        }
        let mut normalized: Vec<LabeledSample> = samples.clone();
        retarget(&mut normalized, LabelKind::Normalized);
        for s in &normalized {
            let exact = s.target == s.makespan as f64 / s.lower_bound as f64;
            if !exact || (s.target * s.lower_bound as f64).round() as u64 != s.makespan {
                bad_norm += 1;
            }
        }
        for s in &samples {
            let prefix: Vec<usize> = sampled[s.state_index].state.log().iter().map(|d| d.job).collect();
            let mut r =
                SplitMix64::child(state_seed(cfg.seed, inst.id(), s.state_index), &[TAG_ROLLOUT, s.rule.code() as u64]);
            if oracle::rollout(inst, &prefix, s.rule, cfg.depth, cfg.default_rule, &mut r) != s.makespan {
                bad_sim += 1;
            }
        }
    }
    check(
        states >= 500 && bad_regret + bad_norm + bad_sim == 0,
        format!("{states} states; regret violations {bad_regret}, normalized {bad_norm}, re-simulation mismatches {bad_sim}"),
    )
}

fn random_state_features(seed: u64) -> [f64; 35] {
    let mut rng = SplitMix64::new(seed);
    let inst = generate_instance(2 + rng.index(10), 2 + rng.index(8), seed).unwrap();
    let mut state = ScheduleState::new(&inst);
    for _ in 0..rng.index(inst.num_ops()) {
        let j = RuleId::Random.select_job(&state, &mut rng).unwrap();
        state.dispatch(j).unwrap();
    }
    state_features(&state).unwrap()
}

fn c3_knn() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut k1_spread: f64 = 0.0;
    let mut rng = SplitMix64::new(77);
    for _ in 0..2 {
        let data: Vec<LabeledSample> = (0..50)
            .map(|i| {
                let rule = RuleId::ALL[rng.index(7)];
                LabeledSample {
                    features: FeatureVector::from_parts(&random_state_features(rng.next_u64()), rule),
                    target: rng.next_f64() * 10.0,
                    instance_id: format!("p{i}"),
                    state_index: i,
                    decision: 0,
                    rule,
                    makespan: 1,
                    lower_bound: 1,
                }
            })
            .collect();
        let raw: Vec<(Vec<f64>, f64)> = data.iter().map(|s| (s.features.0.to_vec(), s.target)).collect();
        let model = SelectorModel::fit(&data, 7, 1e-8, LabelKind::Regret, RuleId::Fifo).unwrap();
        let single = SelectorModel::fit(&data, 1, 1e-8, LabelKind::Regret, RuleId::Fifo).unwrap();
        for _ in 0..50 {
            let q = random_state_features(rng.next_u64());
            let z: [f64; 35] = std::array::from_fn(|d| model.normalizer().normalize_dim(d, q[d]));
            let preds = model.predict_normalized_state(&z);
            for rule in RuleId::ALL {
                let (r, s) = oracle::knn(&raw, &FeatureVector::from_parts(&q, rule).0, 7, 1e-8);
                worst = worst.max(oracle::rel_err(preds[rule.code()].r_hat, r));
                worst = worst.max(oracle::rel_err(preds[rule.code()].sigma_hat, s));
            }
            for p in single.predict_normalized_state(&z) {
                k1_spread = k1_spread.max(p.sigma_hat);
            }
        }
    }
    check(
        worst <= 1e-12 && k1_spread == 0.0,
        format!("100 queries x 7 rules, worst relative error {worst:.1e} (limit 1e-12), k=1 max spread {k1_spread}"),
    )
}

fn c4_gate_limits(setup: &Setup) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for model in [&setup.regret, &setup.normalized] {
        let mut differing = 0;
        let mut switches = 0;
        // spread of the chosen rule and predicted gain at each switch
        let mut max_spread: f64 = 0.0;
        let mut min_gain = f64::INFINITY;
        for inst in &setup.test[..20] {
            let gated = Policy::Gated(model, 1e6).run(inst, 0).unwrap();
            let fixed = Policy::Fixed(setup.default_rule).run(inst, 0).unwrap();
            if gated.state.log() != fixed.state.log() {
                differing += 1;
            }
            for (i, &c) in gated.choices.iter().enumerate() {
                if c == setup.default_rule {
                    continue;
                }
                switches += 1;
                let jobs = gated.state.log()[..i].iter().map(|d| d.job);
                let p = model.predict_all(&ScheduleState::replay(inst, jobs).unwrap()).unwrap();
                max_spread = max_spread.max(p[c.code()].sigma_hat);
                min_gain = min_gain.min(p[setup.default_rule.code()].r_hat - p[c.code()].r_hat);
            }
        }
        ok &= differing == 0;
        let why =
            if switches > 0 { format!(", max spread {max_spread:e}, min gain {min_gain:.4}") } else { String::new() };
        lines.push(format!("{}: {differing}/20 logs differ ({switches} switches{why})", model.label_kind().name()));
    }
    let mut lcb_mismatch = 0;
    for model in [&setup.regret, &setup.normalized] {
        for inst in &setup.test[..20] {
            let a = Policy::Argmin(model).run(inst, 0).unwrap();
            let l = Policy::Lcb(model, 0.0).run(inst, 0).unwrap();
            lcb_mismatch += a.choices.iter().zip(&l.choices).filter(|(x, y)| x != y).count();
        }
    }
    ok &= lcb_mismatch == 0;
    check(
        ok,
        format!(
            "gated lambda=1e6 vs FIXED({}): {}; LCB(0) vs argmin mismatched choices {lcb_mismatch}",
            setup.default_rule,
            lines.join(", ")
        ),
    )
}

fn c5_ordering(report: &EvalReport, secs: f64) -> Outcome {
    let order = [
        ("FIFO", fixed_mean(report, RuleId::Fifo)),
        ("MOPNR", fixed_mean(report, RuleId::Mopnr)),
        ("MWKR", fixed_mean(report, RuleId::Mwkr)),
        ("Random-HH", random_hh_mean(report)),
        ("SPT", fixed_mean(report, RuleId::Spt)),
        ("LPT", fixed_mean(report, RuleId::Lpt)),
        ("LWKR", fixed_mean(report, RuleId::Lwkr)),
    ];
    let sorted = order.windows(2).all(|w| w[0].1 < w[1].1);
    let rhh = order[3].1;
    let spt = order[4].1;
    let shown: Vec<String> = order.iter().map(|(n, v)| format!("{n} {v:.2}")).collect();
    check(
        sorted && rhh > 25.0 && spt > 100.0 && secs < 600.0,
        format!("{} | Random-HH > 25, SPT > 100, {secs:.1}s single-threaded (limit 600s)", shown.join(" < ")),
    )
}

struct SelectorCheck {
    ok: bool,
    summary: String,
}

fn selector_check(setup: &Setup) -> SelectorCheck {
    let methods = vec![
        Method::auto(Policy::Gated(&setup.regret, setup.cfg.lambda)),
        Method::auto(Policy::Argmin(&setup.regret)),
        Method::auto(Policy::Argmin(&setup.normalized)),
        Method::auto(Policy::Fixed(RuleId::Fifo)),
        Method::auto(Policy::RandomHh),
    ];
    let report = evaluate("selectors", &methods, &setup.test, &setup.opts(), setup.cfg.echo()).unwrap();
    let gated = mean_of(&report, &methods, |p| matches!(p, Policy::Gated(..)));
    let ra = report.mean_rpd(&methods[1].name).unwrap();
    let na = report.mean_rpd(&methods[2].name).unwrap();
    let fifo = fixed_mean(&report, RuleId::Fifo);
    let rhh = random_hh_mean(&report);
    let ok = gated <= ra && gated <= na && gated * 10.0 < rhh && (gated - fifo) <= 1.5;
    SelectorCheck {
        ok,
        summary: format!(
            "{} {}: gated {gated:.2} argmin {ra:.2}/{na:.2} FIFO {fifo:.2} RHH {rhh:.2}",
            setup.cfg.scale,
            if ok { "ok" } else { "miss" }
        ),
    }
}

fn c6_selectors(seed0: &[SelectorCheck]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 0..3u64 {
        let checks: Vec<SelectorCheck> = if seed == 0 {
            Vec::new()
        } else {
            Scale::STANDARD.iter().map(|&s| selector_check(&Setup::new(s, seed))).collect()
        };
        let checks = if seed == 0 { seed0 } else { &checks[..] };
        let misses = checks.iter().filter(|c| !c.ok).count();
        ok &= misses <= 1;
        parts.push(format!(
            "seed {seed}: {misses} miss [{}]",
            checks.iter().map(|c| c.summary.as_str()).collect::<Vec<_>>().join("; ")
        ));
    }
    check(ok, parts.join(" | "))
}

fn c7_sweep(setup: &Setup) -> Outcome {
    let mut train = setup.train.clone();
    train.truncate(setup.cfg.sweep_train_count);
    let default_rule = best_fixed_rule(&train, &RuleId::DETERMINISTIC, setup.cfg.seed).unwrap();
    let report = harness::pareto_sweep(&train, &setup.test, &setup.cfg, default_rule, &setup.opts()).unwrap();
    let cell = |d: &str, b: &str| report.rows.iter().find(|r| r.depth == d && r.breadth == b).unwrap();
    let full = cell("full", "full");
    let lowest = report.rows.iter().all(|r| full.mean_rpd <= r.mean_rpd);
    let mut gaps = Vec::new();
    for b in &setup.cfg.sweep_breadths {
        let b = b.to_string();
        gaps.push(cell("1", &b).mean_rpd - cell("full", &b).mean_rpd);
    }
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);

    let lc = setup.cfg.label_config(default_rule, LabelKind::Regret);
    let mut expected = 0u64;
    for inst in &train {
        let mut rng = SplitMix64::child(lc.seed, &[TAG_SAMPLING, fnv1a(inst.id().as_bytes())]);
        for s in sample_states(inst, &lc, &mut rng).unwrap() {
            expected += 7 * (inst.num_ops() - s.state.decisions_made()) as u64;
        }
    }
    let worst = report.rows.iter().map(|r| r.mean_rpd).fold(f64::NEG_INFINITY, f64::max);
    check(
        lowest && min_gap > 5.0 && full.steps == expected,
        format!(
            "full/full RPD {:.2} (grid max {worst:.2}, lowest: {lowest}); min depth-1 gap {min_gap:.2} (> 5); steps {} vs expected {expected}",
            full.mean_rpd, full.steps
        ),
    )
}

fn c8_probe(setup: &Setup) -> Outcome {
    let test = generate_set(PROBE_SCALE.jobs, PROBE_SCALE.machines, setup.cfg.test_count, Split::Test, setup.cfg.seed)
        .unwrap();
    let report =
        harness::generalization_probe(&setup.regret, &test, setup.cfg.lambda, &setup.opts(), setup.cfg.echo()).unwrap();
    let gated = report.mean_rpd(&Method::auto(Policy::Gated(&setup.regret, setup.cfg.lambda)).name).unwrap();
    let rhh = random_hh_mean(&report);
    let mwkr = fixed_mean(&report, RuleId::Mwkr);
    check(
        gated * 10.0 < rhh && gated < mwkr,
        format!("{SCALE_10} model on {PROBE_SCALE}: gated {gated:.2}, Random-HH {rhh:.2}, MWKR {mwkr:.2}"),
    )
}

fn run_pipeline(out: &Path, threads: &str) -> Result<(), String> {
    for stage in ["gen", "label", "fit", "eval"] {
        let o = Command::new(env!("CARGO_BIN_EXE_rulegate"))
            .arg("--out")
            .arg(out)
            .args(["--threads", threads, "--scale", "10x10", "--seed", "0", stage])
            .env_remove("RULEGATE_OUT")
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{stage}: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("a", "1"), ("b", "1"), ("c", "8")];
    for (name, threads) in runs {
        run_pipeline(&dir.path().join(name), threads)?;
    }
    let files = [
        "data/10x10/dataset.csv",
        "models/10x10/regret.model",
        "models/10x10/normalized.model",
        "reports/10x10/eval.json",
        "reports/10x10/eval.csv",
    ];
    let mut differing = Vec::new();
    for f in files {
        let a = std::fs::read(dir.path().join("a").join(f)).map_err(|e| e.to_string())?;
        for other in ["b", "c"] {
            if std::fs::read(dir.path().join(other).join(f)).map_err(|e| e.to_string())? != a {
                differing.push(format!("{other}/{f}"));
            }
        }
    }
    check(
        differing.is_empty(),
        format!("{} files x (repeat, --threads 8 vs 1); differing: {:?}", files.len(), differing),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 feasibility", c1_feasibility()));
    results.push(("2 label correctness", c2_labels()));
    results.push(("3 knn oracle", c3_knn()));

    let t = Instant::now();
    let (setup, main_report) = with_threads(1, || {
        let s = Setup::new(SCALE_10, 0);
        let r = s.main_report();
        (s, r)
    })
    .unwrap();
    let secs = t.elapsed().as_secs_f64();

    results.push(("4 gate limits", c4_gate_limits(&setup)));
    results.push(("5 rule ordering", c5_ordering(&main_report, secs)));
    let seed0: Vec<SelectorCheck> = Scale::STANDARD
        .iter()
        .map(|&s| if s == SCALE_10 { selector_check(&setup) } else { selector_check(&Setup::new(s, 0)) })
        .collect();
    results.push(("6 selector ordering", c6_selectors(&seed0)));
    results.push(("7 cost sweep", c7_sweep(&setup)));
    results.push(("8 generalization", c8_probe(&setup)));
    results.push(("9 determinism", c9_determinism()));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}")
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

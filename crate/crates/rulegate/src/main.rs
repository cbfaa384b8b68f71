use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rulegate::config::{RunConfig, Scale};
use rulegate::formats;
use rulegate::labeling::with_threads;
use rulegate::pipeline::{self, Layout};
use rulegate::{Error, Result};
use rulegate_core::labeler::{Breadth, Depth, LabelKind};
use rulegate_core::PolicySpec;

/// Rollout-labeled, uncertainty-gated dispatching-rule selection for the
/// job-shop scheduling problem.
#[derive(Parser, Debug)]
#[command(name = "rulegate", version)]
struct Cli {
    /// TOML (or .json) run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root directory.
    #[arg(long, global = true, env = "RULEGATE_OUT", default_value = "rulegate-out")]
    out: PathBuf,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Instance shape, e.g. 10x10.
    #[arg(long, global = true)]
    scale: Option<Scale>,
    #[arg(long, global = true)]
    train_count: Option<usize>,
    #[arg(long, global = true)]
    test_count: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sampled states per training instance.
    #[arg(long, global = true)]
    states: Option<usize>,
    /// Exploration trajectories per training instance.
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// Rollout depth: a step count or `full`.
    #[arg(long, global = true)]
    depth: Option<Depth>,
    /// Candidate rules per state: 1..=7 or `full`.
    #[arg(long, global = true)]
    breadth: Option<Breadth>,
    /// Draw reduced candidate subsets uniformly instead of always including
    /// the default rule.
    #[arg(long, global = true)]
    uniform_subsets: bool,
    /// Label kinds to fit, comma separated (regret, normalized).
    #[arg(long, global = true, value_delimiter = ',')]
    label_kinds: Option<Vec<LabelKind>>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Policy spec for `eval` (repeatable): fixed:FIFO, random-hh, argmin,
    /// lcb:1.0, gated:1.0.
    #[arg(long = "policy", global = true)]
    policies: Vec<String>,
    #[arg(long, global = true)]
    random_hh_seeds: Option<usize>,
    /// Let FIXED(RANDOM) take part in the hindsight reference.
    #[arg(long, global = true)]
    oracle_includes_random: bool,
    #[arg(long, global = true)]
    sweep_train_count: Option<usize>,
    #[arg(long, global = true)]
    probe_scale: Option<Scale>,
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            scale => scale,
            train_count => train_count,
            test_count => test_count,
            seed => seed,
            states => states_per_instance,
            trajectories => trajectories_per_instance,
            depth => depth,
            breadth => breadth,
            label_kinds => label_kinds,
            k => k,
            epsilon => epsilon,
            lambda => lambda,
            random_hh_seeds => random_hh_seeds,
            sweep_train_count => sweep_train_count,
            probe_scale => probe_test_scale,
        );
        if self.uniform_subsets {
            cfg.subset_includes_default = false;
        }
        if self.oracle_includes_random {
            cfg.oracle_includes_random = true;
        }
        if !self.policies.is_empty() {
            cfg.policies = self.policies;
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train and test instances.
    Gen,
    /// Roll out candidate rules on sampled training states.
    Label,
    /// Fit the KNN selector for each label kind.
    Fit,
    /// Compare learned selectors with fixed rules and Random-HH.
    Eval,
    /// Label kind x selection policy x lambda grid.
    Ablate,
    /// Rollout depth x breadth cost/quality sweep.
    Sweep,
    /// Evaluate the trained model on another instance size.
    Probe,
    /// Draw the schedule of one policy on one instance.
    Gantt {
        /// Instance file (JSON or text benchmark layout).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "with", default_value = "fixed:FIFO")]
        spec: PolicySpec,
        /// Model file, required for learned policies.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        run_seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Render SVG charts for report files.
    Plot {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Defaults to `<out>/figures`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    let layout = Layout::new(&cli.out);
    let threads = cli.threads;
    let command = cli.command;
    with_threads(threads, move || dispatch(command, &cfg, &layout))?
}

fn dispatch(command: Command, cfg: &RunConfig, layout: &Layout) -> Result<()> {
    match command {
        Command::Gen => {
            let files = pipeline::gen(cfg, layout)?;
            println!("wrote {} instances under {}", files.len(), layout.root.join("instances").display());
        }
        Command::Label => {
            let (data, ledger) = pipeline::label(cfg, layout)?;
            println!(
                "{} samples, {} rollouts, {} guided steps, {} completion steps, {:.2}s -> {}",
                data.len(),
                ledger.rollouts,
                ledger.steps,
                ledger.completion_steps,
                ledger.wall_seconds,
                layout.dataset(cfg.scale).display()
            );
        }
        Command::Fit => {
            for model in pipeline::fit(cfg, layout)? {
                println!(
                    "{} model: {} points, k={}, default rule {} -> {}",
                    model.label_kind().name(),
                    model.len(),
                    model.k(),
                    model.default_rule(),
                    layout.model(cfg.scale, model.label_kind()).display()
                );
            }
        }
        Command::Eval => print_report(&pipeline::eval(cfg, layout)?),
        Command::Ablate => print_report(&pipeline::ablate(cfg, layout)?),
        Command::Probe => print_report(&pipeline::probe(cfg, layout)?),
        Command::Sweep => {
            let report = pipeline::sweep(cfg, layout)?;
            println!("{:>6} {:>6} {:>9} {:>9} {:>10} {:>9}", "depth", "b", "time(s)", "rollouts", "steps", "RPD");
            for r in &report.rows {
                println!(
                    "{:>6} {:>6} {:>9.2} {:>9} {:>10} {:>9.2}",
                    r.depth, r.breadth, r.wall_seconds, r.rollouts, r.steps, r.mean_rpd
                );
            }
        }
        Command::Gantt { instance, spec, model, run_seed, output } => {
            let inst = formats::read_instance(&instance)?;
            let model = model.map(|p| formats::read_model(&p)).transpose()?.map(|(m, _)| m);
            let svg = pipeline::gantt(&inst, spec, model.as_ref(), run_seed)?;
            formats::write_atomic(&output, svg.as_bytes())?;
            println!("wrote {}", output.display());
        }
        Command::Plot { reports, output_dir } => {
            let dir = output_dir.unwrap_or_else(|| layout.figures());
            for path in reports {
                let svg = pipeline::plot(&path)?;
                let stem =
                    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
                let scale = path
                    .parent()
                    .and_then(|p| p.file_name())
                    .map(|s| format!("{}-", s.to_string_lossy()))
                    .unwrap_or_default();
                let target = dir.join(format!("{scale}{stem}.svg"));
                formats::write_atomic(&target, svg.as_bytes())?;
                println!("wrote {}", target.display());
            }
        }
    }
    Ok(())
}

fn print_report(report: &rulegate::harness::EvalReport) {
    println!("{} on {} ({} instances)", report.title, report.scale, report.instance_ids.len());
    println!("{:<24} {:>9} {:>9} {:>5} {:>7}", "method", "mean RPD", "median", "wins", "switch");
    for r in &report.rows {
        let switch = r.switch_rate.map(|s| format!("{s:.3}")).unwrap_or_else(|| "-".into());
        println!("{:<24} {:>9.2} {:>9.2} {:>5} {:>7}", r.name, r.mean_rpd, r.median_rpd, r.wins, switch);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Config(_) = e {
                return ExitCode::from(2);
            }
            ExitCode::FAILURE
        }
    }
}

//! Command-line workflows over the library: simulate a point, generate the
//! perturbation database, train and evaluate the models, and run scenario
//! timelines. Every artifact-writing command drops a run manifest next to
//! its outputs so results are regenerable.
//!
//! Exit codes: 0 success, 2 argument/file parse errors, 3 runtime failures
//! (no convergence, schedule violations), 4 I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::ConfigError;
use crate::dataset::{self, DatasetError, SamplingPlan, FAULT_CLASS_COUNT};
use crate::fddcore::{
    load_thresholds, thresholds_to_kv_string, EstimatorSet, ThresholdVector, TwinState,
};
use crate::hydronet::{simulate, ComponentVector, ControlVector, LoopConfig, SolveError};
use crate::mlkit::{
    load_svr, load_tree, save_svr, save_tree, DecisionTreeModel, ModelIoError, SvrModel,
    SvrParams, DEFAULT_MAX_DEPTH, DEFAULT_MIN_SAMPLES_LEAF,
};
use crate::scenario::{
    evaluate_estimation, evaluate_localization, run_scenario, ScenarioError, ScenarioSpec,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hydrotwin",
    version,
    about = "Digital twin of a closed hydraulic loop: simulation, fault database, models, monitoring campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one steady state and print the process vector.
    Simulate(SimulateArgs),
    /// Generate the perturbation database from a sampling plan.
    Gen(GenArgs),
    /// Train the localization classifier and the per-class estimators.
    Train(TrainArgs),
    /// Evaluate localization and estimation on the held-out split.
    Eval(EvalArgs),
    /// Run a fault-injection scenario timeline.
    Scenario(ScenarioArgs),
    /// Print compiled-in defaults in the config dialect.
    Config(ConfigArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Pump speed, percent.
    #[arg(long)]
    u1: f64,
    /// Valve opening, percent.
    #[arg(long)]
    u2: f64,
    /// Component override `INDEX=VALUE` (index 1..=6), repeatable.
    #[arg(long = "theta", value_name = "INDEX=VALUE")]
    theta: Vec<String>,
    /// Loop constants file (defaults compiled in).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Sampling plan file (defaults to the desk-scale plan).
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset produced by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Directory for the model files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Split seed; must match between train and eval.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES_LEAF)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = SvrParams::default().c)]
    svr_c: f64,
    #[arg(long, default_value_t = SvrParams::default().epsilon)]
    svr_epsilon: f64,
    #[arg(long, default_value_t = SvrParams::default().gamma)]
    svr_gamma: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory holding the model files from `train`.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Also write the metrics as delimited text files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario timeline file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Thresholds file (defaults compiled in).
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Directory for the per-step trace and metrics.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Which defaults to print: loop, plan, or thresholds.
    #[arg(long, default_value = "loop")]
    kind: String,
}

/// Entry point for the binary.
pub fn run_from_env() -> u8 {
    let args: Vec<String> = std::env::args().collect();
    run(&args)
}

/// Parse and execute; returns the process exit code. Split out so tests can
/// drive the CLI in-process.
pub fn run(args: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_PARSE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Scenario(a) => cmd_scenario(a),
        Command::Config(a) => cmd_config(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelIoError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_PARSE,
            CliError::Config(_) => EXIT_PARSE,
            CliError::Solve(_) => EXIT_RUNTIME,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Io { .. } => EXIT_IO,
            CliError::Model(ModelIoError::Io { .. }) => EXIT_IO,
            CliError::Model(ModelIoError::Format { .. }) => EXIT_PARSE,
            CliError::Scenario(ScenarioError::ScheduleViolation { .. }) => EXIT_RUNTIME,
            CliError::Scenario(ScenarioError::Solve { .. }) => EXIT_RUNTIME,
            CliError::Scenario(ScenarioError::EmptyTestSet) => EXIT_RUNTIME,
            CliError::Scenario(_) => EXIT_PARSE,
            CliError::Dataset(DatasetError::Io(_)) => EXIT_IO,
            CliError::Dataset(_) => EXIT_PARSE,
        }
    }
}

fn load_loop_config(path: &Option<PathBuf>) -> Result<LoopConfig, CliError> {
    match path {
        Some(p) => Ok(LoopConfig::from_file(p)?),
        None => Ok(LoopConfig::default()),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        context: format!("creating {}", path.display()),
        source,
    })
}

/// Manifest recording how an artifact was produced, written alongside it.
fn write_manifest(
    dir_or_file: &Path,
    command: &str,
    entries: &[(&str, String)],
) -> Result<(), CliError> {
    let path = if dir_or_file.is_dir() {
        dir_or_file.join("manifest.txt")
    } else {
        let mut name = dir_or_file.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest");
        dir_or_file.with_file_name(name)
    };
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = format!("command = {command}\ntimestamp_unix = {timestamp}\n");
    for (k, v) in entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    write_output(&path, &out)
}

fn parse_theta_overrides(
    pairs: &[String],
    base: ComponentVector,
) -> Result<ComponentVector, CliError> {
    let mut theta = base;
    for pair in pairs {
        let (index, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--theta needs INDEX=VALUE, got `{pair}`")))?;
        let index: usize = index
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("--theta index `{index}`: {e}")))?;
        if !(1..=6).contains(&index) {
            return Err(CliError::Usage(format!(
                "--theta index {index} outside 1..=6"
            )));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("--theta value `{value}`: {e}")))?;
        if !(value > 0.0) {
            return Err(CliError::Usage(format!(
                "--theta value must be strictly positive, got {value}"
            )));
        }
        theta = theta.with_component(index, value);
    }
    Ok(theta)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let u = ControlVector::new(args.u1, args.u2);
    if !u.is_valid() {
        return Err(CliError::Usage(format!(
            "setpoints must lie in 0..=100 percent, got u1={} u2={}",
            args.u1, args.u2
        )));
    }
    let cfg = load_loop_config(&args.config)?;
    let theta = parse_theta_overrides(&args.theta, ComponentVector::NOMINAL)?;
    let y = simulate(&u, &theta, &cfg)?;
    println!("p1 = {:.6}", y.p1);
    println!("p2 = {:.6}", y.p2);
    println!("p3 = {:.6}", y.p3);
    println!("p4 = {:.6}", y.p4);
    println!("fl = {:.6}", y.flow);
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let cfg = load_loop_config(&args.config)?;
    let plan = match &args.plan {
        Some(p) => SamplingPlan::from_file(p)?,
        None => SamplingPlan::default(),
    };
    let outcome = dataset::generate(&plan, &ComponentVector::NOMINAL, &cfg)?;
    dataset::save(&outcome.records, &args.out)?;
    write_manifest(
        &args.out,
        "gen",
        &[
            (
                "plan",
                args.plan
                    .as_ref()
                    .map_or("builtin".into(), |p| p.display().to_string()),
            ),
            (
                "config",
                args.config
                    .as_ref()
                    .map_or("builtin".into(), |p| p.display().to_string()),
            ),
            ("records", outcome.records.len().to_string()),
            ("dropped", outcome.dropped.to_string()),
            ("seed", plan.seed.to_string()),
        ],
    )?;
    println!(
        "wrote {} records to {} ({} non-convergent grid points dropped)",
        outcome.records.len(),
        args.out.display(),
        outcome.dropped
    );
    Ok(())
}

fn estimator_path(dir: &Path, class: usize) -> PathBuf {
    dir.join(format!("svr_class{class}.model"))
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let records = dataset::load(&args.data)?;
    let (train, _) = dataset::split(&records, args.train_fraction, args.seed)?;
    ensure_dir(&args.out_dir)?;

    let (rows, labels) = dataset::classifier_rows(&train);
    let tree = DecisionTreeModel::fit(&rows, &labels, args.max_depth, args.min_samples_leaf)
        .map_err(|e| CliError::Runtime(format!("classifier training failed: {e}")))?;
    save_tree(&tree, &args.out_dir.join("tree.model"))?;
    println!(
        "classifier: {} nodes, depth {}, training accuracy {:.4}",
        tree.node_count(),
        tree.depth(),
        tree.accuracy(&rows, &labels)
    );

    let params = SvrParams {
        c: args.svr_c,
        epsilon: args.svr_epsilon,
        gamma: args.svr_gamma,
        ..SvrParams::default()
    };
    for class in 1..=FAULT_CLASS_COUNT {
        let (crows, ctargets) = dataset::estimator_rows(&train, class);
        let model = SvrModel::fit(&crows, &ctargets, &params)
            .map_err(|e| CliError::Runtime(format!("estimator {class} training failed: {e}")))?;
        println!(
            "estimator {}: {} rows, {} support vectors, {}",
            class,
            crows.len(),
            model.support_vector_count(),
            if model.converged() {
                "converged".to_string()
            } else {
                format!("budget exhausted (kkt gap {:.2e})", model.kkt_gap())
            }
        );
        save_svr(&model, &estimator_path(&args.out_dir, class))?;
    }

    write_manifest(
        &args.out_dir,
        "train",
        &[
            ("data", args.data.display().to_string()),
            ("seed", args.seed.to_string()),
            ("train_fraction", args.train_fraction.to_string()),
            ("max_depth", args.max_depth.to_string()),
            ("min_samples_leaf", args.min_samples_leaf.to_string()),
            ("svr_c", args.svr_c.to_string()),
            ("svr_epsilon", args.svr_epsilon.to_string()),
            ("svr_gamma", args.svr_gamma.to_string()),
        ],
    )?;
    Ok(())
}

fn load_models(dir: &Path) -> Result<(DecisionTreeModel, EstimatorSet), CliError> {
    let tree = load_tree(&dir.join("tree.model"))?;
    let mut estimators = EstimatorSet::new();
    for class in 1..=FAULT_CLASS_COUNT {
        estimators.set(class, load_svr(&estimator_path(dir, class))?);
    }
    Ok((tree, estimators))
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let records = dataset::load(&args.data)?;
    let (_, test) = dataset::split(&records, args.train_fraction, args.seed)?;
    let (tree, estimators) = load_models(&args.models)?;

    let localization = evaluate_localization(&tree, &test)?;
    print!("{}", localization.to_display_string());
    let estimation = evaluate_estimation(&estimators, &tree, &test)?;
    print!("{}", estimation.to_display_string());

    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        write_output(&dir.join("localization.csv"), &localization.to_delimited())?;
        write_output(&dir.join("estimation.csv"), &estimation.to_delimited())?;
        write_manifest(
            dir,
            "eval",
            &[
                ("data", args.data.display().to_string()),
                ("models", args.models.display().to_string()),
                ("seed", args.seed.to_string()),
                ("train_fraction", args.train_fraction.to_string()),
            ],
        )?;
    }
    Ok(())
}

fn cmd_scenario(args: ScenarioArgs) -> Result<(), CliError> {
    let cfg = load_loop_config(&args.config)?;
    let spec = ScenarioSpec::from_file(&args.spec)?;
    let (tree, estimators) = load_models(&args.models)?;
    let (detection, validation) = match &args.thresholds {
        Some(p) => load_thresholds(p)?,
        None => (
            ThresholdVector::DETECTION_DEFAULT,
            ThresholdVector::VALIDATION_DEFAULT,
        ),
    };
    let mut twin = TwinState::new(
        ComponentVector::NOMINAL,
        cfg,
        tree,
        estimators,
        detection,
        validation,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let result = run_scenario(&spec, &mut twin, ComponentVector::NOMINAL)?;
    ensure_dir(&args.out_dir)?;

    let mut trace = String::from(
        "step,u1,u2,p1,p2,p3,p4,fl,triggered,outcome,predicted_class,committed_value\n",
    );
    for s in &result.steps {
        let y = s.measured;
        let outcome = match s.report.outcome {
            crate::fddcore::FddOutcome::NoFault => "NoFault",
            crate::fddcore::FddOutcome::Converged => "Converged",
            crate::fddcore::FddOutcome::FailedToConverge => "FailedToConverge",
        };
        let (class, value) = match s.report.committed {
            Some((c, v)) => (c.to_string(), format!("{v:.6}")),
            None => (String::new(), String::new()),
        };
        trace.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}\n",
            s.step,
            s.control.pump_speed,
            s.control.valve_opening,
            y.p1,
            y.p2,
            y.p3,
            y.p4,
            y.flow,
            s.report.triggered,
            outcome,
            class,
            value
        ));
    }
    write_output(&args.out_dir.join("trace.csv"), &trace)?;

    // Full diagnosis reports for the steps where something happened.
    let mut reports = String::new();
    for s in result
        .steps
        .iter()
        .filter(|s| s.report.outcome != crate::fddcore::FddOutcome::NoFault)
    {
        reports.push_str(&format!("step = {}\n", s.step));
        reports.push_str(&s.report.to_text());
        reports.push('\n');
    }
    write_output(&args.out_dir.join("reports.txt"), &reports)?;

    let m = &result.metrics;
    let latency: Vec<String> = m
        .detection_latency
        .iter()
        .map(|l| l.map_or("-".to_string(), |v| v.to_string()))
        .collect();
    let summary = format!(
        "steps = {}\nevents_injected = {}\nevents_converged = {}\nconvergence_rate = {:.4}\nfalse_triggers = {}\ndetection_latency = {}\n",
        m.steps,
        m.events_injected,
        m.events_converged,
        m.convergence_rate,
        m.false_triggers,
        latency.join(",")
    );
    write_output(&args.out_dir.join("metrics.txt"), &summary)?;
    write_manifest(
        &args.out_dir,
        "scenario",
        &[
            ("spec", args.spec.display().to_string()),
            ("models", args.models.display().to_string()),
            (
                "config",
                args.config
                    .as_ref()
                    .map_or("builtin".into(), |p| p.display().to_string()),
            ),
            ("seed", spec.seed.to_string()),
        ],
    )?;
    print!("{summary}");
    Ok(())
}

fn cmd_config(args: ConfigArgs) -> Result<(), CliError> {
    match args.kind.as_str() {
        "loop" => print!("{}", LoopConfig::default().to_kv_string()),
        "plan" => print!("{}", SamplingPlan::default().to_kv_string()),
        "thresholds" => print!(
            "{}",
            thresholds_to_kv_string(
                &ThresholdVector::DETECTION_DEFAULT,
                &ThresholdVector::VALIDATION_DEFAULT
            )
        ),
        other => {
            return Err(CliError::Usage(format!(
                "unknown config kind `{other}` (expected loop, plan, or thresholds)"
            )))
        }
    }
    Ok(())
}

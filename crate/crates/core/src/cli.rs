//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid config or arguments, 3 non-finite loss,
//! 4 I/O failure, 1 anything else.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{preset_names, ExperimentConfig};
use crate::experiment::{comparison_configs, format_table, run_experiment, sweep_configs, ExperimentError, SweepAxis};
use crate::networks::DualNetwork;
use crate::problems::{verify_manufactured, ProblemDefinition, ProblemId};
use crate::reporting::{evaluate_errors, export_field_grid};
use crate::training::{AdamState, HistoryEntry, ResampleEvent, TrainError, TrainObserver};

#[derive(Parser, Debug)]
#[command(name = "dualkan", version, about = "Dual-network PINN/KAN solvers for elliptic interface problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one configuration and write its artifacts.
    Train(TrainArgs),
    /// Evaluate a saved network on a fresh test set.
    Evaluate(EvaluateArgs),
    /// Run PINNs, KANs, PINNs-A and KANs-A on one problem.
    Compare(CompareArgs),
    /// Vary KAN width or grid size on one problem.
    Sweep(SweepArgs),
    /// Check the manufactured solutions against their PDE data.
    VerifyProblems(VerifyArgs),
    /// Write network and exact values on a uniform grid.
    ExportField(ExportArgs),
    /// List presets, or print one as JSON.
    Presets { name: Option<String> },
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Experiment config file (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in preset such as `e1-kan-rard`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the total number of Adam steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Network JSON written by `train`.
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long, default_value_t = crate::reporting::N_TEST_INTERIOR)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    Neurons,
    G,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Comma-separated values, e.g. `3,5,7`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    /// Hidden width held fixed while sweeping `g`.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// Grid intervals held fixed while sweeping `neurons`.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Problems to check; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub problems: Vec<ProblemId>,
    #[arg(long, default_value_t = 2000)]
    pub n_check: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub interior_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub jump_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let message = match &e {
            ExperimentError::Train(TrainError::NonFinite { step, loss, .. }) => {
                format!("non-finite loss at step {step}; components {:?}", loss.components())
            }
            other => other.to_string(),
        };
        CliError {
            code: e.exit_code(),
            message,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: 4,
        message: format!("{}: {e}", path.display()),
    }
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes")
}

/// Streams loss rows, resample events and checkpoints to disk.
struct ArtifactWriter {
    dir: PathBuf,
    stem: String,
    loss: BufWriter<File>,
    resample: BufWriter<File>,
    error: Option<CliError>,
    quiet: bool,
    total_steps: usize,
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    step: usize,
    network: &'a DualNetwork,
    adam: &'a AdamState,
}

impl ArtifactWriter {
    fn new(dir: &Path, stem: &str, quiet: bool, total_steps: usize) -> Result<Self, CliError> {
        let open = |suffix: &str| {
            let path = dir.join(format!("{stem}.{suffix}"));
            File::create(&path).map(BufWriter::new).map_err(|e| io_err(&path, e))
        };
        let mut loss = open("loss.csv")?;
        writeln!(loss, "step,{}", crate::loss::LossBreakdown::CSV_HEADER).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            loss,
            resample: open("resample.jsonl")?,
            error: None,
            quiet,
            total_steps,
        })
    }

    fn record(&mut self, r: std::io::Result<()>) {
        if let (Err(e), None) = (r, &self.error) {
            self.error = Some(io_err(&self.dir, e));
        }
    }

    fn finish(mut self) -> Result<(), CliError> {
        let r = self.loss.flush().and_then(|_| self.resample.flush());
        self.record(r);
        self.error.map_or(Ok(()), Err)
    }
}

impl TrainObserver for ArtifactWriter {
    fn on_log(&mut self, e: &HistoryEntry) {
        let c = e.loss.components();
        let r = writeln!(
            self.loss,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            e.step, c[0], c[1], c[2], c[3], c[4], c[5], e.loss.total
        );
        self.record(r);
        if !self.quiet && e.step.is_multiple_of(1000) {
            eprintln!("[{}] step {}/{} loss {:.4e}", self.stem, e.step, self.total_steps, e.loss.total);
        }
    }

    fn on_resample(&mut self, ev: &ResampleEvent) {
        let r = writeln!(self.resample, "{}", serde_json::to_string(ev).expect("event serializes"));
        self.record(r);
    }

    fn on_checkpoint(&mut self, step: usize, dual: &DualNetwork, adam: &AdamState) {
        let path = self.dir.join(format!("{}.ckpt_{step:06}.json", self.stem));
        let r = fs::write(&path, serde_json::to_string(&Checkpoint { step, network: dual, adam }).unwrap());
        self.record(r);
    }
}

/// Trains `cfg`, writing all artifacts under `dir`; returns the error report.
fn train_to_dir(cfg: &ExperimentConfig, config_text: &str, dir: &Path, quiet: bool) -> Result<crate::reporting::ErrorReport, CliError> {
    cfg.validate().map_err(|e| config_err(format!("invalid config: {e}")))?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let stem = cfg.run_name();
    write_file(&dir.join(format!("{stem}.config.json")), config_text)?;
    let mut writer = ArtifactWriter::new(dir, &stem, quiet, cfg.train.total_steps)?;
    let result = run_experiment(cfg, &mut writer);
    writer.finish()?;
    let outcome = match result {
        Ok(o) => o,
        Err(ExperimentError::Train(TrainError::NonFinite { step, loss, last_good })) => {
            write_file(&dir.join(format!("{stem}.last_good.json")), &last_good.to_json())?;
            return Err(ExperimentError::Train(TrainError::NonFinite { step, loss, last_good }).into());
        }
        Err(e) => return Err(e.into()),
    };
    write_file(&dir.join(format!("{stem}.network.json")), &outcome.dual.to_json())?;
    write_file(&dir.join(format!("{stem}.errors.json")), &to_json(&outcome.errors))?;
    write_file(&dir.join(format!("{stem}.collocation.json")), &to_json(&outcome.collocation))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        run: &'a str,
        parameter_count: usize,
        total_steps: usize,
        wall_clock_seconds: f64,
        resample_events: usize,
        final_loss: Option<&'a HistoryEntry>,
        errors: &'a crate::reporting::ErrorReport,
    }
    let summary = Summary {
        run: &stem,
        parameter_count: cfg.parameter_count(),
        total_steps: cfg.train.total_steps,
        wall_clock_seconds: outcome.report.wall_clock_seconds,
        resample_events: outcome.report.resample_events.len(),
        final_loss: outcome.report.history.last(),
        errors: &outcome.errors,
    };
    write_file(&dir.join(format!("{stem}.report.json")), &to_json(&summary))?;
    Ok(outcome.errors)
}

fn load_config(args: &TrainArgs) -> Result<(ExperimentConfig, String), CliError> {
    let (mut cfg, mut text) = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let cfg = ExperimentConfig::from_json(&text).map_err(|e| config_err(format!("invalid config: {e}")))?;
            (cfg, text)
        }
        (None, Some(name)) => {
            let cfg = ExperimentConfig::preset(name).map_err(|e| config_err(e.to_string()))?;
            let text = cfg.to_json();
            (cfg, text)
        }
        (None, None) => return Err(config_err("one of --config or --preset is required")),
    };
    let overridden = args.seed.is_some() || args.steps.is_some();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.steps {
        cfg.set_total_steps(n);
    }
    if overridden {
        // Keep the copied config in step with what actually ran.
        text = cfg.to_json();
    }
    Ok((cfg, text))
}

fn output_dir(flag: &Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn apply_steps(cfg: &mut ExperimentConfig, steps: Option<usize>) {
    if let Some(n) = steps {
        cfg.set_total_steps(n);
    }
}

fn run_table(rows: Vec<(String, ExperimentConfig)>, first_header: &str, out: &Path, stem: &str, steps: Option<usize>, quiet: bool) -> Result<(), CliError> {
    let mut results = Vec::new();
    for (label, mut cfg) in rows {
        apply_steps(&mut cfg, steps);
        let dir = out.join(&label);
        let errors = train_to_dir(&cfg, &cfg.to_json(), &dir, quiet)?;
        results.push((label, errors));
    }
    let (csv, text) = format_table(first_header, &results);
    write_file(&out.join(format!("{stem}.csv")), &csv)?;
    write_file(&out.join(format!("{stem}.txt")), &text)?;
    print!("{text}");
    Ok(())
}

fn load_network(path: &Path) -> Result<DualNetwork, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    DualNetwork::from_json(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let (cfg, text) = load_config(&args)?;
            let dir = output_dir(&args.out, &cfg);
            let errors = train_to_dir(&cfg, &text, &dir, args.quiet)?;
            println!("{}", to_json(&errors));
        }
        Command::Evaluate(args) => {
            let dual = load_network(&args.network)?;
            let def = ProblemDefinition::builtin(args.problem);
            let errors = evaluate_errors(&dual, &def, args.n_test, args.seed).map_err(|e| CliError {
                code: 1,
                message: e.to_string(),
            })?;
            match &args.out {
                Some(p) => write_file(p, &to_json(&errors))?,
                None => println!("{}", to_json(&errors)),
            }
        }
        Command::Compare(args) => {
            fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
            let stem = format!("{}_compare", args.problem);
            run_table(comparison_configs(args.problem, args.seed), "network", &args.out, &stem, args.steps, args.quiet)?;
        }
        Command::Sweep(args) => {
            fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
            let (axis, name) = match args.axis {
                AxisArg::Neurons => (SweepAxis::Neurons, "neurons"),
                AxisArg::G => (SweepAxis::Grid, "g"),
            };
            let rows = sweep_configs(args.problem, axis, &args.values, args.neurons, args.grid, args.seed);
            let rows = rows.into_iter().map(|(l, c)| (format!("{name}_{l}"), c)).collect();
            let stem = format!("{}_sweep_{name}", args.problem);
            run_table(rows, name, &args.out, &stem, args.steps, args.quiet)?;
        }
        Command::VerifyProblems(args) => {
            let ids = if args.problems.is_empty() { ProblemId::ALL.to_vec() } else { args.problems };
            let mut failed = false;
            for id in ids {
                let def = ProblemDefinition::builtin(id);
                let r = verify_manufactured(&def, args.n_check, args.interior_tol, args.jump_tol, args.seed);
                println!(
                    "{id}: {} (interior {:.3e} / {:.0e}, jumps {:.3e} / {:.0e})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.max_interior_residual,
                    r.interior_tol,
                    r.max_jump_mismatch,
                    r.jump_tol
                );
                failed |= !r.passed;
            }
            if failed {
                return Err(CliError {
                    code: 1,
                    message: "manufactured-solution verification failed".into(),
                });
            }
        }
        Command::ExportField(args) => {
            let dual = load_network(&args.network)?;
            let def = ProblemDefinition::builtin(args.problem);
            let csv = export_field_grid(&dual, &def, args.resolution).map_err(|e| config_err(e.to_string()))?;
            write_file(&args.out, &csv)?;
        }
        Command::Presets { name } => match name {
            Some(n) => {
                let cfg = ExperimentConfig::preset(&n).map_err(|e| config_err(e.to_string()))?;
                println!("{}", cfg.to_json());
            }
            None => {
                for n in preset_names() {
                    println!("{n}");
                }
            }
        },
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

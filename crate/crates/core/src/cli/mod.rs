//! The `subsight` command line: argument parsing, run context, exit codes
//! and per-run manifests. Subcommand bodies live in `commands`.

mod commands;
mod config;
mod manifest;

pub use commands::{
    model_file, read_predictions, write_predictions, ABLATION_FILE, ABLATION_FOLDS_FILE, ALIGNED_PREFIX,
    DISPLACEMENT_FILE, GROUNDWATER_FILE, INVERSION_FILE, PRECIPITATION_FILE, PREDICTIONS_FILE, REPORT_FILE,
    SAMPLES_FILE, SCATTER_FILE, STACK_FILE, SUMMARY_FILE, TEXTURE_FILE, TRUTH_DEM_FILE, TRUTH_DISPLACEMENT_FILE,
};
pub use config::Config;
pub use manifest::RunManifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::evalstat::Protocol;
use crate::learn::ModelKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "subsight", version, about = "InSAR time-series inversion, grid fusion and texture regression")]
pub struct Cli {
    /// Run configuration (`key = value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input directory; repeat to search several, first match wins.
    /// Defaults to the output directory.
    #[arg(long = "in", global = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario: texture, forcing, truth and interferograms.
    Simulate,
    /// Invert an interferogram stack for displacement series.
    Invert,
    /// Align all sources on the target grid and write the sample table.
    Fuse,
    /// Fit a model on the whole sample table.
    Train(ModelArg),
    /// Run evaluation protocols and write the report.
    Eval(EvalArgs),
    /// Leave-one-month-out ablation with Bonferroni-corrected significance.
    Ablate(AblateArgs),
    /// Summarize an existing report and redraw its scatter plot.
    Report,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArg {
    /// tree | forest | net
    #[arg(long, default_value = "forest")]
    pub model: ModelKind,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// holdout:F | kfold:K | distance:M | month:N; repeatable. Defaults to
    /// holdout at the configured fraction.
    #[arg(long)]
    pub protocol: Vec<Protocol>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// `all` or a comma-separated list of months 1..12.
    #[arg(long, default_value = "all")]
    pub months: String,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Invert => "invert",
            Command::Fuse => "fuse",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::Report => "report",
        }
    }

    /// Subcommand arguments in canonical form, for the manifest.
    fn canonical_args(&self) -> String {
        match self {
            Command::Train(m) => format!("--model {}", m.model.name()),
            Command::Eval(e) => {
                let mut s = format!("--model {}", e.model.model.name());
                for p in &e.protocol {
                    s += &format!(" --protocol {p}");
                }
                s
            }
            Command::Ablate(a) => format!("--model {} --months {}", a.model.model.name(), a.months),
            _ => String::new(),
        }
    }
}

/// Resolved settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: Config,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
}

impl RunContext {
    /// First input directory holding `name`.
    pub fn input(&self, name: &str) -> Result<PathBuf> {
        self.inputs
            .iter()
            .map(|d| d.join(name))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                let dirs: Vec<String> = self.inputs.iter().map(|d| d.display().to_string()).collect();
                Error::Invalid(format!("input file {name} not found in {}", dirs.join(", ")))
            })
    }

    pub fn optional_input(&self, name: &str) -> Option<PathBuf> {
        self.input(name).ok()
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }
}

fn log(msg: &str) {
    eprintln!("subsight: {msg}");
}

/// Exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Context { source, .. } => exit_code(source),
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (program name first) and runs it. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log(&format!("error: {e}"));
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line on a dedicated thread pool.
pub fn execute(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let mut config = match &cli.config {
        Some(p) => Config::read(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let inputs = if cli.inputs.is_empty() {
        vec![cli.out.clone()]
    } else {
        cli.inputs.clone()
    };
    let ctx = RunContext {
        config,
        config_path: cli.config.clone(),
        inputs,
        out: cli.out.clone(),
    };
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    log(&format!("{} -> {}", cli.command.name(), ctx.out.display()));
    pool.install(|| dispatch(&cli.command, &ctx))?;
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        args: cli.command.canonical_args(),
        config_path: ctx.config_path.clone(),
        inputs: ctx.inputs.clone(),
        out: ctx.out.clone(),
        seed: ctx.seed(),
        tool_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: ctx.config.normalized(),
    };
    manifest.write(&ctx.out)
}

fn dispatch(cmd: &Command, ctx: &RunContext) -> Result<()> {
    match cmd {
        Command::Simulate => commands::simulate(ctx),
        Command::Invert => commands::invert(ctx),
        Command::Fuse => commands::fuse(ctx),
        Command::Train(m) => commands::train(ctx, m.model),
        Command::Eval(e) => {
            let protocols = if e.protocol.is_empty() {
                vec![Protocol::Holdout(ctx.config.holdout_fraction)]
            } else {
                e.protocol.clone()
            };
            commands::eval(ctx, e.model.model, &protocols)
        }
        Command::Ablate(a) => commands::ablate(ctx, a.model.model, &parse_months(&a.months)?),
        Command::Report => commands::report(ctx),
    }
}

pub fn parse_months(s: &str) -> Result<Vec<u32>> {
    if s == "all" {
        return Ok((1..=12).collect());
    }
    let mut out = Vec::new();
    for tok in s.split(',') {
        match tok.trim().parse::<u32>() {
            Ok(m) if (1..=12).contains(&m) => out.push(m),
            _ => return Err(Error::Config(vec![format!("--months: bad month {tok:?}")])),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

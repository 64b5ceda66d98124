use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hamosc::criteria::{evaluate, CriteriaOptions, CriterionId, CriterionReport, Span, Window};
use hamosc::matfun::DerivativeMethod;
use hamosc::ode::OdeOptions;
use hamosc::oracle::{empirical_oracle, OracleOptions, OracleReport};
use hamosc::system::{load_system, SystemSpec};
use hamosc::Error;
use serde::Serialize;

mod validate;

#[derive(Parser)]
#[command(name = "hamosc", version, about = "Oscillation criteria and simulation for linear matrix Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate oscillation criteria on a window or up to a horizon
    Check(CheckArgs),
    /// Sample conjoined solutions and look for zeros of det Φ
    Simulate(SimulateArgs),
    /// Run the residual and invariant suite
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// System definition (JSON)
    #[arg(long)]
    system: PathBuf,
    /// Leave the generation time out of the report
    #[arg(long)]
    no_timestamp: bool,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpanArgs {
    /// Finite window [A, B]
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    window: Option<Vec<f64>>,
    /// End of the ray [t0, T]
    #[arg(long, value_name = "T", allow_negative_numbers = true)]
    horizon: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Derivative {
    /// Central differences
    Fd,
    /// Daleckii–Krein formula
    Dk,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    span: SpanArgs,
    /// Indices j (1-based, comma separated); default all
    #[arg(long, value_delimiter = ',')]
    j: Vec<usize>,
    /// Criterion ids such as cor2.2,thm2.4; default all applicable
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<String>,
    /// Grid samples per span for the reductions
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    #[arg(long, value_enum, default_value = "fd")]
    derivative: Derivative,
    /// Checkpoints for staged divergence evidence
    #[arg(long, default_value_t = 8)]
    stages: usize,
    /// Value both staged integrals must reach
    #[arg(long, default_value_t = 10.0)]
    divergence_threshold: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    span: SpanArgs,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for events.csv and per-trial trajectory CSV files
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "T", allow_negative_numbers = true)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct Report<C, R> {
    tool: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    command: &'static str,
    config: C,
    result: R,
}

#[derive(Serialize)]
struct SystemInfo {
    path: String,
    name: Option<String>,
    n: usize,
    t0: f64,
}

#[derive(Serialize)]
struct CheckConfig {
    system: SystemInfo,
    span: Span,
    criteria: Vec<CriterionId>,
    j: Vec<usize>,
    options: CriteriaOptions,
}

#[derive(Serialize)]
struct CheckResult {
    reports: Vec<CriterionReport>,
}

#[derive(Serialize)]
struct SimulateConfig {
    system: SystemInfo,
    span: Span,
    trials: usize,
    seed: u64,
    psi_sigma: f64,
    psi_norm_cap: f64,
    ode: OdeOptions,
    trace_dir: Option<String>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: String,
}

struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
            code: if e.is_precondition() { 2 } else { 1 },
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        kind: "UsageError",
        message: message.into(),
        code: 2,
    }
}

fn span_of(args: &SpanArgs, t0: f64) -> Result<Span, Failure> {
    match (&args.window, args.horizon) {
        (Some(w), None) => Ok(Span::Window(Window::new(w[0], w[1])?)),
        (None, Some(horizon)) => {
            if !(horizon > t0) {
                return Err(usage(format!("--horizon {horizon} must exceed t0 = {t0}")));
            }
            Ok(Span::Ray { horizon })
        }
        (Some(_), Some(_)) => Err(usage("give either --window or --horizon, not both")),
        (None, None) => Err(usage("one of --window or --horizon is required")),
    }
}

/// Loads the system validated over the span it will be used on.
fn load(common: &Common, span: impl Fn(f64) -> Result<(f64, f64), Failure>) -> Result<(SystemSpec, SystemInfo), Failure> {
    let text = fs::read_to_string(&common.system).map_err(|e| Failure {
        kind: "IoError",
        message: format!("{}: {e}", common.system.display()),
        code: 2,
    })?;
    let probe = SystemSpec::parse_json(&text)?;
    let interval = span(probe.t0())?;
    let sys = load_system(&common.system, Some(interval))?;
    let info = SystemInfo {
        path: common.system.display().to_string(),
        name: sys.name.clone(),
        n: sys.n(),
        t0: sys.t0(),
    };
    Ok((sys, info))
}

fn timestamp(skip: bool) -> Option<u64> {
    if skip {
        return None;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn emit<C: Serialize, R: Serialize>(common: &Common, command: &'static str, config: C, result: R) -> Result<(), Failure> {
    let report = Report {
        tool: "hamosc",
        version: env!("CARGO_PKG_VERSION"),
        generated_at_unix: timestamp(common.no_timestamp),
        command,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    text.push('\n');
    match &common.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_check(args: CheckArgs) -> Result<(), Failure> {
    let (sys, info) = load(&args.common, |t0| Ok(span_of(&args.span, t0)?.interval(t0)))?;
    let span = span_of(&args.span, sys.t0())?;
    let criteria = args
        .criteria
        .iter()
        .map(|s| CriterionId::parse(s.trim()).ok_or_else(|| usage(format!("unknown criterion {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let options = CriteriaOptions {
        grid: args.grid,
        stages: args.stages,
        divergence_threshold: args.divergence_threshold,
        derivative: match args.derivative {
            Derivative::Fd => DerivativeMethod::FiniteDifference,
            Derivative::Dk => DerivativeMethod::DaleckiiKrein,
        },
        ..Default::default()
    };
    let reports = evaluate(
        &sys,
        &span,
        (!criteria.is_empty()).then_some(criteria.as_slice()),
        (!args.j.is_empty()).then_some(args.j.as_slice()),
        &options,
    )?;
    let resolved_j = if args.j.is_empty() { (1..=sys.n()).collect() } else { args.j.clone() };
    let mut resolved: Vec<CriterionId> = reports.iter().map(|r| r.criterion).collect();
    resolved.dedup();
    let config = CheckConfig {
        system: info,
        span,
        criteria: resolved,
        j: resolved_j,
        options,
    };
    emit(&args.common, "check", config, CheckResult { reports })
}

fn write_traces(dir: &Path, report: &OracleReport) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    report.write_events_csv(BufWriter::new(File::create(dir.join("events.csv"))?))?;
    for trial in &report.trials {
        if let Some(traj) = &trial.trajectory {
            traj.write_csv(BufWriter::new(File::create(dir.join(format!("trial_{:03}.csv", trial.index)))?))?;
        }
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (sys, info) = load(&args.common, |t0| Ok(span_of(&args.span, t0)?.interval(t0)))?;
    let span = span_of(&args.span, sys.t0())?;
    let opts = OracleOptions {
        trials: args.trials,
        seed: args.seed,
        keep_trajectories: args.trace_dir.is_some(),
        ..Default::default()
    };
    let report = empirical_oracle(&sys, &span, &opts)?;
    if let Some(dir) = &args.trace_dir {
        write_traces(dir, &report)?;
    }
    let config = SimulateConfig {
        system: info,
        span,
        trials: opts.trials,
        seed: opts.seed,
        psi_sigma: opts.psi_sigma,
        psi_norm_cap: opts.psi_norm_cap,
        ode: opts.ode,
        trace_dir: args.trace_dir.as_ref().map(|d| d.display().to_string()),
    };
    emit(&args.common, "simulate", config, report)
}

fn run_validate(args: ValidateArgs) -> Result<bool, Failure> {
    let horizon = args.horizon;
    let (sys, info) = load(&args.common, |t0| {
        if horizon > t0 {
            Ok((t0, horizon))
        } else {
            Err(usage(format!("--horizon {horizon} must exceed t0 = {t0}")))
        }
    })?;
    let suite = validate::run(&sys, horizon, args.seed)?;
    let passed = suite.all_passed;
    let config = validate::Config {
        system: info,
        horizon,
        seed: args.seed,
        thresholds: validate::THRESHOLDS,
    };
    emit(&args.common, "validate", config, suite)?;
    Ok(passed)
}

fn fail(f: Failure) -> ExitCode {
    let report = ErrorReport {
        kind: f.kind,
        message: f.message,
    };
    let text = serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}", f.kind));
    eprintln!("{text}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(usage(e.render().to_string().trim_end().to_string())),
    };
    let outcome = match cli.command {
        Command::Check(args) => run_check(args).map(|()| true),
        Command::Simulate(args) => run_simulate(args).map(|()| true),
        Command::Validate(args) => run_validate(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => fail(f),
    }
}

//! Command-line front end: instance generation, solving, method comparison,
//! near-zero regularization runs, and analytical oracle reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use l1h::analysis::{check_assumption, restricted_eigs, DEFAULT_ENUM_BUDGET};
use l1h::experiments::{
    default_lambda_tgt, figure_rows, generate_instance, run_bp, run_comparison,
    run_comparison_instance, InstanceSpec, Method,
};
use l1h::io::{self, format_f64};
use l1h::problem::{
    DEFAULT_DELTA, DEFAULT_ETA, DEFAULT_GAMMA_DEC, DEFAULT_GAMMA_INC, DEFAULT_MAX_INNER_ITERS,
    DEFAULT_MAX_LINESEARCH_STEPS,
};
use l1h::report::{self, ResultSummary};
use l1h::{
    homotopy, solve_pg, Error, ProblemInstance, Result, SolveResult, SolveStatus, SolverConfig,
};

/// Sparse least-squares solver and benchmark harness.
#[derive(Parser)]
#[command(name = "l1h", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file with a planted sparse signal.
    Gen(GenArgs),
    /// Solve an instance file with the selected method.
    Solve(SolveArgs),
    /// Run both methods on one instance against a shared reference objective.
    Compare(CompareArgs),
    /// Drive the continuation solver to a near-zero regularization on a
    /// noise-free instance and report recovery error per stage.
    Bp(BpArgs),
    /// Restricted extremal eigenvalues of the instance's Gram matrix.
    Eigs(EigsArgs),
    /// Check the sparse-recovery conditions on an instance with a planted
    /// signal.
    Check(CheckArgs),
}

#[derive(Args)]
struct ShapeArgs {
    /// Number of rows.
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Number of columns.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Planted support size.
    #[arg(long, default_value_t = 20)]
    sbar: usize,
    /// Noise half-width.
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ShapeArgs {
    fn spec(&self) -> InstanceSpec {
        InstanceSpec {
            m: self.m,
            n: self.n,
            sbar: self.sbar,
            sigma: self.sigma,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SolveFlags {
    /// Regularization target; defaults to four times the measured noise
    /// level of the instance.
    #[arg(long)]
    lambda_tgt: Option<f64>,
    /// Final-stage residue tolerance.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Stage decrease factor for the regularization weight.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Intermediate-stage tolerance factor.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Line-search increase factor.
    #[arg(long, default_value_t = DEFAULT_GAMMA_INC)]
    gamma_inc: f64,
    /// Curvature decrease factor between iterations.
    #[arg(long, default_value_t = DEFAULT_GAMMA_DEC)]
    gamma_dec: f64,
    /// Curvature floor; defaults to the largest squared column norm.
    #[arg(long)]
    l_min: Option<f64>,
    /// Iteration cap per inner solve.
    #[arg(long, default_value_t = DEFAULT_MAX_INNER_ITERS)]
    max_iters: usize,
}

impl SolveFlags {
    fn config(&self, problem: &ProblemInstance) -> Result<SolverConfig> {
        let lambda_tgt = match self.lambda_tgt {
            Some(v) => v,
            None => default_lambda_tgt(problem)?,
        };
        let l_min = self
            .l_min
            .unwrap_or_else(|| problem.op.matrix().max_col_norm_sq());
        let config = SolverConfig {
            lambda_tgt,
            eps: self.eps,
            eta: self.eta,
            delta: self.delta,
            l_min,
            gamma_inc: self.gamma_inc,
            gamma_dec: self.gamma_dec,
            max_inner_iters: self.max_iters,
            max_linesearch_steps: DEFAULT_MAX_LINESEARCH_STEPS,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Output path for the instance file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file to solve.
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    flags: SolveFlags,
    /// Solver: pg (single stage) or pgh (continuation).
    #[arg(long, default_value = "pgh")]
    method: String,
    /// Path for the JSON result report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Path for the per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Instance file; if omitted, an instance is generated from the shape
    /// flags.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    flags: SolveFlags,
    /// Path for the JSON comparison report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace prefix: writes <prefix>.pg.csv, <prefix>.pgh.csv, and
    /// <prefix>.long.csv.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BpArgs {
    /// Number of rows.
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Number of columns.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Planted support size.
    #[arg(long, default_value_t = 20)]
    sbar: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Final-stage residue tolerance; defaults to the stage tolerance at the
    /// target regularization.
    #[arg(long)]
    eps: Option<f64>,
    /// Path for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Path for the per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EigsArgs {
    /// Instance file to analyze.
    #[arg(long)]
    problem: PathBuf,
    /// Sparsity level.
    #[arg(long)]
    s: usize,
    /// Cap on enumerated supports.
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    budget: u64,
    /// Path for the JSON report; defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Instance file to check; must carry a planted signal.
    #[arg(long)]
    problem: PathBuf,
    /// Regularization target; defaults to four times the measured noise
    /// level of the instance.
    #[arg(long)]
    lambda_tgt: Option<f64>,
    /// Stage decrease factor, used to derive the residue transfer constant.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Intermediate-stage tolerance factor.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Line-search increase factor.
    #[arg(long, default_value_t = DEFAULT_GAMMA_INC)]
    gamma_inc: f64,
    /// Sparsity overshoot level; defaults to the planted support size.
    #[arg(long)]
    s: Option<usize>,
    /// Cap on enumerated supports.
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    budget: u64,
    /// Path for the JSON report; defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum LogLevel {
    Quiet,
    Info,
    Debug,
}

fn log_level() -> LogLevel {
    match std::env::var("L1H_LOG")
        .map(|v| v.to_ascii_lowercase())
        .as_deref()
    {
        Ok("quiet") => LogLevel::Quiet,
        Ok("debug") => LogLevel::Debug,
        _ => LogLevel::Info,
    }
}

fn log_info(line: &str) {
    if log_level() >= LogLevel::Info {
        eprintln!("{line}");
    }
}

fn log_debug(line: &str) {
    if log_level() >= LogLevel::Debug {
        eprintln!("{line}");
    }
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIterations => "max_iterations",
        SolveStatus::LineSearchFailed => "line_search_failed",
    }
}

fn status_code(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    }
}

fn log_summary(label: &str, result: &SolveResult, start: Instant) {
    log_info(&format!(
        "{label} status={} stages={} iterations={} matvecs={} omega={} wall_ms={}",
        status_name(result.status),
        result.stages.len(),
        result.total_inner_iterations,
        result.total_matvecs,
        format_f64(result.final_omega),
        start.elapsed().as_millis()
    ));
    for (k, stage) in result.stages.iter().enumerate() {
        log_debug(&format!(
            "  stage={} lambda={} eps_hat={} iterations={} entry_omega={} final_omega={}",
            k,
            format_f64(stage.lambda),
            format_f64(stage.eps_hat),
            stage.inner_iterations,
            format_f64(stage.entry_omega),
            format_f64(stage.final_omega)
        ));
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = report::to_json_pretty(value)?;
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_gen(args: &GenArgs, start: Instant) -> Result<ExitCode> {
    let spec = args.shape.spec();
    let problem = generate_instance(&spec)?;
    io::save_problem(&problem, &args.out)?;
    log_info(&format!(
        "gen m={} n={} sbar={} sigma={} seed={} out={} wall_ms={}",
        spec.m,
        spec.n,
        spec.sbar,
        format_f64(spec.sigma),
        spec.seed,
        args.out.display(),
        start.elapsed().as_millis()
    ));
    Ok(ExitCode::SUCCESS)
}

fn run_solve(args: &SolveArgs, start: Instant) -> Result<ExitCode> {
    let method = Method::parse(&args.method)?;
    let mut problem = io::load_problem(&args.problem)?;
    let config = args.flags.config(&problem)?;
    let result = match method {
        Method::Pg => solve_pg(&mut problem, &config)?,
        Method::Pgh => homotopy(&mut problem, &config)?,
    };
    if let Some(path) = &args.trace {
        report::write_trace(path, &result.trace)?;
    }
    if let Some(path) = &args.out {
        report::write_result_json(path, &result)?;
    }
    log_summary(method.name(), &result, start);
    Ok(status_code(result.status))
}

fn trace_path(prefix: &Path, name: &str) -> PathBuf {
    PathBuf::from(format!("{}.{}.csv", prefix.display(), name))
}

fn run_compare(args: &CompareArgs, start: Instant) -> Result<ExitCode> {
    let methods = [Method::Pg, Method::Pgh];
    let run = match &args.problem {
        Some(path) => {
            let base = io::load_problem(path)?;
            let config = args.flags.config(&base)?;
            run_comparison_instance(&base, &config, &methods)?
        }
        None => {
            let spec = args.shape.spec();
            let base = generate_instance(&spec)?;
            let config = args.flags.config(&base)?;
            run_comparison(&spec, &config, &methods)?
        }
    };
    if let Some(path) = &args.out {
        emit_json(&run.report, Some(path))?;
    }
    if let Some(prefix) = &args.trace {
        for (method, result) in &run.results {
            report::write_trace(&trace_path(prefix, method.name()), &result.trace)?;
        }
        let rows = figure_rows(&run);
        io::write_atomic(
            &trace_path(prefix, "long"),
            report::long_csv(&rows).as_bytes(),
        )?;
    }
    log_info(&format!(
        "compare lambda_tgt={} eps={} phi_star={}",
        format_f64(run.report.lambda_tgt),
        format_f64(run.report.eps),
        format_f64(run.report.phi_star)
    ));
    let mut worst = ExitCode::SUCCESS;
    for (method, result) in &run.results {
        log_summary(method.name(), result, start);
        if result.status != SolveStatus::Converged {
            worst = ExitCode::from(1);
        }
    }
    Ok(worst)
}

#[derive(Serialize)]
struct BpReport {
    lambda0_estimate: f64,
    lambda_tgt: f64,
    final_recovery_error: f64,
    stage_recovery: Vec<f64>,
    summary: ResultSummary,
}

fn run_bp_cmd(args: &BpArgs, start: Instant) -> Result<ExitCode> {
    let spec = InstanceSpec {
        m: args.m,
        n: args.n,
        sbar: args.sbar,
        sigma: 0.0,
        seed: args.seed,
    };
    let bp = run_bp(&spec, args.eps)?;
    let final_recovery_error = *bp
        .stage_recovery
        .last()
        .expect("continuation runs report at least one stage");
    let rep = BpReport {
        lambda0_estimate: bp.lambda0_estimate,
        lambda_tgt: bp.result.lambda_tgt,
        final_recovery_error,
        stage_recovery: bp.stage_recovery.clone(),
        summary: ResultSummary::from(&bp.result),
    };
    if let Some(path) = &args.out {
        emit_json(&rep, Some(path))?;
    }
    if let Some(path) = &args.trace {
        report::write_trace(path, &bp.result.trace)?;
    }
    log_summary("bp", &bp.result, start);
    log_info(&format!(
        "bp recovery final={} stages={}",
        format_f64(final_recovery_error),
        bp.stage_recovery.len()
    ));
    Ok(status_code(bp.result.status))
}

fn run_eigs(args: &EigsArgs, start: Instant) -> Result<ExitCode> {
    let problem = io::load_problem(&args.problem)?;
    let spectrum = restricted_eigs(problem.op.matrix(), args.s, args.budget)?;
    emit_json(&spectrum, args.out.as_deref())?;
    log_info(&format!(
        "eigs s={} rho_minus={} rho_plus={} wall_ms={}",
        spectrum.s,
        format_f64(spectrum.rho_minus),
        format_f64(spectrum.rho_plus),
        start.elapsed().as_millis()
    ));
    Ok(ExitCode::SUCCESS)
}

fn run_check(args: &CheckArgs, start: Instant) -> Result<ExitCode> {
    let problem = io::load_problem(&args.problem)?;
    let lambda_tgt = match args.lambda_tgt {
        Some(v) => v,
        None => default_lambda_tgt(&problem)?,
    };
    let delta_prime = (args.delta + 1.0 - args.eta) / args.eta;
    let gamma = 2.0 * (1.0 + delta_prime) / (1.0 - delta_prime);
    let s_tilde = match args.s {
        Some(v) => v,
        None => problem
            .xbar
            .as_ref()
            .map(|x| x.iter().filter(|v| **v != 0.0).count())
            .ok_or_else(|| {
                Error::InvalidArgument("instance has no planted signal; pass --s".into())
            })?,
    };
    let rep = check_assumption(
        &problem,
        lambda_tgt,
        gamma,
        delta_prime,
        s_tilde,
        args.gamma_inc,
        args.budget,
    )?;
    emit_json(&rep, args.out.as_deref())?;
    log_info(&format!(
        "check lambda_ok={} re_ok={} l_min_ok={} wall_ms={}",
        rep.lambda_ok,
        rep.re_ok,
        rep.l_min_ok,
        start.elapsed().as_millis()
    ));
    Ok(ExitCode::SUCCESS)
}

fn run(command: &Command, start: Instant) -> Result<ExitCode> {
    match command {
        Command::Gen(args) => run_gen(args, start),
        Command::Solve(args) => run_solve(args, start),
        Command::Compare(args) => run_compare(args, start),
        Command::Bp(args) => run_bp_cmd(args, start),
        Command::Eigs(args) => run_eigs(args, start),
        Command::Check(args) => run_check(args, start),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    match run(&cli.command, start) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

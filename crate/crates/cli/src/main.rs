//! `nlbvp`: hypothesis screening, spectra, branch tracing and positive
//! solutions for nonlocal hinged-beam problems described by a config file.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 hypotheses fail,
//! 3 solve failure.

mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use nlbvp_core::{
    build_problem, check_hypotheses, higher_eigenpairs, ContinuationError, EigenOptions,
    HypothesisOptions, NewtonOptions, NonlocalProblem, ProblemConfig, ProblemSpec, TraceOptions,
};

const DEFAULT_N: usize = 199;

#[derive(Debug, Parser)]
#[command(
    name = "nlbvp",
    version,
    about = "Positive solutions of nonlocal hinged fourth-order problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Evaluate the sufficient conditions for a positive solution.
    Check,
    /// Weighted eigenvalues with nodal counts.
    Eigen,
    /// Trace the positive branch from the principal eigenvalue.
    Branch,
    /// Positive solution at a fixed lambda (default 1).
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct RunOptions {
    /// Problem description (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Interior grid nodes; overrides `n` in the config.
    #[arg(long, global = true, value_name = "N")]
    n: Option<usize>,
    /// Initial pseudo-arclength step.
    #[arg(long, global = true, value_name = "DS")]
    ds: Option<f64>,
    /// Maximum continuation steps.
    #[arg(long = "max-steps", global = true, value_name = "K")]
    max_steps: Option<usize>,
    /// Stop tracing once lambda exceeds this value.
    #[arg(long = "lambda-max", global = true, value_name = "L")]
    lambda_max: Option<f64>,
    /// Target lambda for `solve`.
    #[arg(long = "lambda", global = true, value_name = "TARGET")]
    lambda_target: Option<f64>,
    /// Number of modes for `eigen` (at most 6, including the principal one).
    #[arg(long, global = true, value_name = "M")]
    modes: Option<usize>,
    /// Amplitude of the branch start `u = epsilon phi_1`.
    #[arg(long, global = true, value_name = "E")]
    epsilon: Option<f64>,
    /// Newton tolerance on the sup-norm residual.
    #[arg(long = "newton-tol", global = true, value_name = "TOL")]
    newton_tol: Option<f64>,
    /// Relative stopping tolerance of the eigen-iteration.
    #[arg(long = "eigen-tol", global = true, value_name = "TOL")]
    eigen_tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    fn solve(error: anyhow::Error) -> Self {
        Self { code: 3, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::usage(error)
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let opts = &cli.run;
    validate(opts)?;
    let spec = load(opts)?;
    for warning in spec.warnings() {
        eprintln!("warning: {warning}");
    }
    match cli.command {
        Command::Check => run_check(&spec, opts),
        Command::Eigen => run_eigen(spec, opts),
        Command::Branch => run_branch(spec, opts),
        Command::Solve => run_solve(spec, opts),
    }
}

fn validate(opts: &RunOptions) -> anyhow::Result<()> {
    let positive = [
        ("--ds", opts.ds),
        ("--lambda-max", opts.lambda_max),
        ("--lambda", opts.lambda_target),
        ("--epsilon", opts.epsilon),
        ("--newton-tol", opts.newton_tol),
        ("--eigen-tol", opts.eigen_tol),
    ];
    for (flag, value) in positive {
        if let Some(v) = value {
            if !(v.is_finite() && v > 0.0) {
                bail!("{flag} must be a positive number, got {v}");
            }
        }
    }
    Ok(())
}

fn load(opts: &RunOptions) -> anyhow::Result<ProblemSpec> {
    let path = opts
        .config
        .as_deref()
        .context("--config PATH is required")?;
    let config = ProblemConfig::from_path(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let n = opts.n.or(config.n).unwrap_or(DEFAULT_N);
    Ok(build_problem(&config, n)?)
}

fn eigen_options(opts: &RunOptions) -> EigenOptions {
    let defaults = EigenOptions::default();
    EigenOptions {
        tol: opts.eigen_tol.unwrap_or(defaults.tol),
        ..defaults
    }
}

fn trace_options(opts: &RunOptions) -> TraceOptions {
    let d = TraceOptions::default();
    TraceOptions {
        ds: opts.ds.unwrap_or(d.ds),
        max_steps: opts.max_steps.unwrap_or(d.max_steps),
        lambda_max: opts.lambda_max.unwrap_or(d.lambda_max),
        newton_tol: opts.newton_tol.unwrap_or(d.newton_tol),
        epsilon: opts.epsilon.unwrap_or(d.epsilon),
        ..d
    }
}

fn format(opts: &RunOptions, default: Format) -> Format {
    opts.format.unwrap_or(default)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run_check(spec: &ProblemSpec, opts: &RunOptions) -> Outcome {
    let options = HypothesisOptions {
        eigen: eigen_options(opts),
        ..HypothesisOptions::default()
    };
    let report = check_hypotheses(spec, options);
    let text = match format(opts, Format::Json) {
        Format::Json => output::json(&report)?,
        Format::Csv => output::flat_csv(&report)?,
    };
    emit(opts.out.as_deref(), &text)?;
    Ok(if report.theorem_applies { 0 } else { 2 })
}

fn run_eigen(spec: ProblemSpec, opts: &RunOptions) -> Outcome {
    let modes = opts.modes.unwrap_or(1);
    let problem = NonlocalProblem::new(spec).map_err(anyhow::Error::from)?;
    let options = eigen_options(opts);
    let mut pairs = Vec::with_capacity(modes);
    if modes > 0 {
        let first = problem
            .principal_eigenpair(options)
            .map_err(anyhow::Error::from)?;
        let rest = higher_eigenpairs(
            problem.operator(),
            problem.spec().a().samples(),
            &first,
            modes - 1,
            options,
        )
        .map_err(anyhow::Error::from)?;
        pairs.push(first);
        pairs.extend(rest);
    }
    let text = match format(opts, Format::Csv) {
        Format::Csv => output::eigen_csv(&pairs),
        Format::Json => output::json(&pairs)?,
    };
    emit(opts.out.as_deref(), &text)?;
    Ok(0)
}

fn run_branch(spec: ProblemSpec, opts: &RunOptions) -> Outcome {
    let problem = NonlocalProblem::new(spec).map_err(anyhow::Error::from)?;
    let pair = problem
        .principal_eigenpair(eigen_options(opts))
        .map_err(|e| Failure::solve(e.into()))?;
    let branch = problem.trace_branch(&pair, &trace_options(opts));
    let text = match format(opts, Format::Csv) {
        Format::Csv => output::branch_csv(&branch),
        Format::Json => output::json(&branch)?,
    };
    emit(opts.out.as_deref(), &text)?;
    if let Some(message) = &branch.message {
        eprintln!("{}: {message}", branch.ended_by);
    }
    Ok(if branch.ended_by.is_failure() { 3 } else { 0 })
}

fn run_solve(spec: ProblemSpec, opts: &RunOptions) -> Outcome {
    let target = opts.lambda_target.unwrap_or(1.0);
    let problem = NonlocalProblem::new(spec).map_err(anyhow::Error::from)?;
    let pair = problem
        .principal_eigenpair(eigen_options(opts))
        .map_err(|e| Failure::solve(e.into()))?;
    let trace = TraceOptions {
        lambda_max: target,
        ..trace_options(opts)
    };
    let branch = problem.trace_branch(&pair, &trace);
    let newton = NewtonOptions {
        tol: trace.newton_tol,
        ..NewtonOptions::default()
    };
    let point = problem
        .solve_at_lambda(&branch, target, newton)
        .map_err(|e| match e {
            ContinuationError::NoBracket(_) if branch.ended_by.is_failure() => {
                Failure::solve(anyhow::Error::from(e).context(format!(
                    "branch trace ended by {}: {}",
                    branch.ended_by,
                    branch.message.as_deref().unwrap_or("")
                )))
            }
            e => Failure::solve(e.into()),
        })?;
    let nodes = problem.spec().grid().nodes();
    let summary = output::SolutionSummary::from(&point);
    match format(opts, Format::Csv) {
        Format::Csv => {
            emit(opts.out.as_deref(), &output::solution_csv(nodes, &point.u))?;
            let sidecar = output::json(&summary)?;
            match &opts.out {
                Some(path) => emit(Some(&path.with_extension("json")), &sidecar)?,
                None => eprint!("{sidecar}"),
            }
        }
        Format::Json => {
            let text = output::json(&output::SolutionJson::new(summary, nodes, &point.u))?;
            emit(opts.out.as_deref(), &text)?;
        }
    }
    Ok(0)
}

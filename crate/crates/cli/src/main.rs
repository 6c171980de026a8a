mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_core::dual::{run_frames_observed, TrajectoryWriter};
use aoi_core::oracle::{self, MAX_GRID_LINKS};
use aoi_core::{
    closed_form_age, heuristic_sqrt_policy, parse_network, run_frames, simulate, simulate_traced, solve_centralized,
    validate, Error, Intent, Network, OptimizerConfig, OptimizerResult, Policy, StepSchedule,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use report::{Column, Comparison, RunReport};

const CSV_HELP: &str = "\
Machine-readable outputs (CSV, fixed column order):
  simulate, optimize, oracle --csv:
      link,gamma,weight,interferers,p,f,age,empirical_age,empirical_peak_age,relative_error,lambda
  compare --csv:
      link,heuristic_p,optimal_p,oracle_p,heuristic_age,optimal_age,oracle_age
      (a final `total` row carries network ages; skipped columns are empty)
  optimize --trajectory-out:
      frame,link,lambda,theta,p,G
  simulate --trace-out:
      t,link,age,attempted,channel,success

Exit codes: 0 success, 1 usage or validation failure, 2 non-convergence, 3 I/O error.";

#[derive(Parser)]
#[command(name = "aoi", version, about = "Age-of-information analysis for slotted wireless networks", after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network config and list any problems.
    Validate {
        config: PathBuf,
        /// Also require what the distributed optimizer needs (symmetric interference).
        #[arg(long)]
        for_algorithm1: bool,
    },
    /// Simulate link ages and compare them with the closed form.
    Simulate(SimulateArgs),
    /// Compute age-optimal attempt probabilities by distributed dual ascent.
    Optimize(OptimizeArgs),
    /// Brute-force grid search plus coordinate descent (small instances).
    Oracle(OracleArgs),
    /// Heuristic vs optimal vs oracle on one instance.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    /// `optimal`, `heuristic`, or a CSV file with columns `link,p`.
    #[arg(long, default_value = "optimal")]
    policy: String,
    /// Number of slots.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-slot trace CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Per-link report CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Use the 1/sqrt(gamma) heuristic even outside a single collision domain.
    #[arg(long)]
    force_heuristic: bool,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args)]
struct OptimizerArgs {
    /// Projection floor for the dual variables.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// Initial step size (default: smallest link weight).
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long, value_enum, default_value_t = Schedule::Constant)]
    schedule: Schedule,
    /// Stop when no dual variable moves by more than this in a frame.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_frames: usize,
    /// Include the channel probabilities in the dual objective.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    gamma_corrected: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Constant,
    Diminishing,
}

#[derive(Args)]
struct OptimizeArgs {
    config: PathBuf,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// Solve centrally instead of by message passing; accepts asymmetric interference.
    #[arg(long, conflicts_with = "trajectory_out")]
    centralized: bool,
    /// Per-frame dual trajectory CSV.
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    /// Per-link report CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    config: PathBuf,
    /// Grid spacing per coordinate.
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
    /// Coordinate-descent sweeps after the grid search.
    #[arg(long, default_value_t = 1000)]
    refine_iters: usize,
    /// Lift the link-count limit on the grid search.
    #[arg(long)]
    allow_large: bool,
    /// Per-link report CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    config: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
    #[arg(long, default_value_t = 1000)]
    refine_iters: usize,
    /// Use the 1/sqrt(gamma) heuristic even outside a single collision domain.
    #[arg(long)]
    force_heuristic: bool,
    /// Comparison table CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

enum Failure {
    Invalid(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::NotConverged(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::NotConverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match &err {
            Error::Io(_) => Failure::Io(err.to_string()),
            Error::Csv(e) if e.is_io_error() => Failure::Io(err.to_string()),
            _ => Failure::Invalid(err.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(err: csv::Error) -> Self {
        Error::from(err).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::Io(err.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let command = std::iter::once("aoi".to_string())
        .chain(std::env::args().skip(1))
        .collect::<Vec<_>>()
        .join(" ");
    let outcome = match cli.command {
        Command::Validate { config, for_algorithm1 } => cmd_validate(&config, for_algorithm1),
        Command::Simulate(args) => cmd_simulate(command, &args),
        Command::Optimize(args) => cmd_optimize(command, &args),
        Command::Oracle(args) => cmd_oracle(command, &args),
        Command::Compare(args) => cmd_compare(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn load(path: &Path) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_network(&text)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

impl OptimizerArgs {
    fn config(&self, gamma_corrected: bool) -> OptimizerConfig {
        OptimizerConfig {
            epsilon: self.epsilon,
            eta0: self.eta0,
            schedule: match self.schedule {
                Schedule::Constant => StepSchedule::Constant,
                Schedule::Diminishing => StepSchedule::Diminishing,
            },
            max_frames: self.max_frames,
            tolerance: self.tol,
            gamma_corrected,
            ..Default::default()
        }
    }
}

/// Distributed solver when interference is symmetric, centralized otherwise.
fn solve_optimal(net: &Network, cfg: &OptimizerConfig) -> Result<OptimizerResult, Failure> {
    let res = if net.is_symmetric() {
        run_frames(net, cfg)?
    } else {
        solve_centralized(net, cfg)?
    };
    Ok(res)
}

fn not_converged(res: &OptimizerResult) -> Failure {
    Failure::NotConverged(format!(
        "optimizer did not converge within {} frames (max fixed-point residual {})",
        res.frames,
        res.max_residual()
    ))
}

fn cmd_validate(config: &Path, for_algorithm1: bool) -> Outcome {
    let net = load(config)?;
    let intent = if for_algorithm1 {
        Intent::Distributed
    } else {
        Intent::General
    };
    let report = validate(&net, intent);
    for issue in &report.issues {
        let ids: Vec<String> = issue.links.iter().map(|id| id.to_string()).collect();
        let tag = match issue.severity {
            aoi_core::Severity::Warning => "warning",
            aoi_core::Severity::Error => "error",
        };
        println!("{tag} [link {}]: {}", ids.join(","), issue.message);
    }
    if report.ok {
        println!("ok: {} links", net.len());
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} failed validation", config.display())))
    }
}

fn cmd_simulate(command: String, args: &SimulateArgs) -> Outcome {
    let net = load(&args.config)?;
    let report = validate(&net, Intent::General);
    if !report.ok {
        return Err(Error::Invalid(report).into());
    }
    let mut rep = RunReport::new(command, &net);
    let policy = match args.policy.as_str() {
        "optimal" => {
            let res = solve_optimal(&net, &args.optimizer.config(args.optimizer.gamma_corrected))?;
            if !res.converged {
                return Err(not_converged(&res));
            }
            rep.set_optimizer(&res);
            rep.note("policy", "optimal");
            res.policy
        }
        "heuristic" => {
            rep.note("policy", "heuristic 1/sqrt(gamma)");
            heuristic_sqrt_policy(&net, args.force_heuristic)?
        }
        path => {
            let file = File::open(path).map_err(|e| Failure::Io(format!("{path}: {e}")))?;
            rep.note("policy", format!("file {path}"));
            Policy::from_csv(file, &net)?
        }
    };
    let profile = closed_form_age(&net, &policy)?;
    for &e in &profile.divergent {
        eprintln!(
            "warning: link {} has gamma*f = 0 under this policy; its age grows without bound",
            net.id(e)
        );
    }
    let stats = match &args.trace_out {
        Some(path) => {
            let mut w = csv::Writer::from_writer(create(path)?);
            let stats = simulate_traced(&net, &policy, args.horizon, args.seed, &mut w)?;
            w.flush()?;
            stats
        }
        None => simulate(&net, &policy, args.horizon, args.seed)?,
    };
    rep.set_policy(&policy, &profile);
    rep.set_simulation(&stats, &stats.relative_errors(&profile.age));
    print!("{}", rep.render());
    if let Some(path) = &args.csv {
        rep.write_csv(create(path)?)?;
    }
    Ok(())
}

fn cmd_optimize(command: String, args: &OptimizeArgs) -> Outcome {
    let net = load(&args.config)?;
    let cfg = args.optimizer.config(args.optimizer.gamma_corrected);
    let res = if args.centralized {
        solve_centralized(&net, &cfg)?
    } else if let Some(path) = &args.trajectory_out {
        let mut w = TrajectoryWriter::new(&net, create(path)?)?;
        let res = run_frames_observed(&net, &cfg, |s, g| w.record(s, g))?;
        w.finish()?.flush()?;
        res
    } else {
        run_frames(&net, &cfg)?
    };

    let mut rep = RunReport::new(command, &net);
    rep.set_policy(&res.policy, &closed_form_age(&net, &res.policy)?);
    rep.set_optimizer(&res);
    if !cfg.gamma_corrected {
        let reference_cfg = args.optimizer.config(true);
        let reference = if args.centralized {
            solve_centralized(&net, &reference_cfg)?
        } else {
            run_frames(&net, &reference_cfg)?
        };
        rep.note("gamma-corrected dual value G", reference.dual_objective);
        rep.note("gamma-corrected duality gap", reference.duality_gap);
        if res.duality_gap > 1e-6 * (1.0 + res.primal_objective.abs()) {
            rep.note(
                "WARNING",
                format!(
                    "duality gap {} between G(lambda*) = {} and the primal optimum {}; rerun with --gamma-corrected=true",
                    res.duality_gap, res.dual_objective, reference.primal_objective
                ),
            );
        }
    }
    print!("{}", rep.render());
    if let Some(path) = &args.csv {
        rep.write_csv(create(path)?)?;
    }
    if res.converged {
        Ok(())
    } else {
        Err(not_converged(&res))
    }
}

fn cmd_oracle(command: String, args: &OracleArgs) -> Outcome {
    let net = load(&args.config)?;
    let limit = if args.allow_large { usize::MAX } else { MAX_GRID_LINKS };
    let res = oracle::solve_limited(&net, args.resolution, args.refine_iters, limit)?;
    let mut rep = RunReport::new(command, &net);
    rep.set_policy(&res.policy, &closed_form_age(&net, &res.policy)?);
    rep.note("resolution", res.resolution);
    rep.note("refinement sweeps", res.refinement_iterations);
    rep.note("tolerance bound", res.tolerance_bound);
    rep.note("grid ties", res.ties.len());
    for tie in &res.ties {
        let p: Vec<String> = tie.as_slice().iter().map(|x| x.to_string()).collect();
        rep.note("tie", p.join(","));
    }
    print!("{}", rep.render());
    if let Some(path) = &args.csv {
        rep.write_csv(create(path)?)?;
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Outcome {
    let net = load(&args.config)?;
    let report = validate(&net, Intent::General);
    if !report.ok {
        return Err(Error::Invalid(report).into());
    }
    let column = |policy: Policy| -> Result<Column, Error> {
        let profile = closed_form_age(&net, &policy)?;
        Ok(Column { policy, profile })
    };

    let optimal = solve_optimal(&net, &args.optimizer.config(args.optimizer.gamma_corrected))?;
    if !optimal.converged {
        return Err(not_converged(&optimal));
    }
    let heuristic = match heuristic_sqrt_policy(&net, args.force_heuristic) {
        Ok(p) => Ok(column(p)?),
        Err(e @ Error::NotCollisionDomain { .. }) => Err(format!("{e}; pass --force-heuristic to use it anyway")),
        Err(e) => return Err(e.into()),
    };
    let oracle = match oracle::solve(&net, args.resolution, args.refine_iters) {
        Ok(res) => Ok(column(res.policy)?),
        Err(e @ Error::InstanceTooLarge { .. }) => Err(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let table = Comparison {
        ids: net.links().iter().map(|l| l.id).collect(),
        heuristic,
        optimal: column(optimal.policy)?,
        oracle,
    };
    print!("{}", table.render());
    if let Some(path) = &args.csv {
        table.write_csv(create(path)?)?;
    }
    Ok(())
}

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use rwre_cli::fit::{fit_scaling, read_columns, Model};
use rwre_cli::{run, write_outputs, CliError, ExperimentSpec};

#[derive(Parser)]
#[command(name = "rwre", version, about = "Random walks in random environment on Galton-Watson trees")]
struct Cli {
    /// Worker threads for replica-parallel experiments.
    #[arg(long, env = "RWRE_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 2 when an acceptance gate fails.
    #[arg(long)]
    gate: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Regime classification and limit constants.
    AnalyzeLaw(RunArgs),
    /// Exact escape probabilities over a tree ensemble.
    Solve(RunArgs),
    /// Walk simulation and displacement scaling.
    Walk(RunArgs),
    /// Minimal running maximum of the potential over rays.
    BrwMin(RunArgs),
    /// One-dimensional small-deviation estimates.
    Rw1d(RunArgs),
    /// Spine and many-to-one checks.
    Spine(RunArgs),
    /// Least-squares scaling fit of one CSV column against another.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, default_value = "n")]
        x: String,
        #[arg(long, default_value = "value")]
        y: String,
        /// Predicted constant to compare the slope with.
        #[arg(long)]
        constant: Option<f64>,
        /// Exit with status 2 when no scaling is detected.
        #[arg(long)]
        gate: bool,
    },
}

impl Command {
    fn expected_kind(&self) -> &'static str {
        match self {
            Command::AnalyzeLaw(_) => "analyze_law",
            Command::Solve(_) => "solve_ensemble",
            Command::Walk(_) => "walk_scaling",
            Command::BrwMin(_) => "min_vbar_scaling",
            Command::Rw1d(_) => "rw1d_suite",
            Command::Spine(_) => "spine_suite",
            Command::Fit { .. } => "fit",
        }
    }
}

fn experiment(kind: &'static str, args: &RunArgs) -> Result<bool, CliError> {
    let spec = ExperimentSpec::load(&args.config)?;
    if spec.experiment.kind() != kind {
        return Err(CliError::WrongKind { expected: kind, found: spec.experiment.kind() });
    }
    let outcome = run(&spec)?;
    let dir = args.out.clone().or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let written = write_outputs(&spec, &outcome, &dir)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary(&spec))?);
    eprintln!("wrote {} and {}", written.csv.display(), written.summary.display());
    for g in outcome.gates.iter().filter(|g| !g.passed) {
        eprintln!("gate failed: {} (measured {}, predicted {}, {})", g.name, g.measured, g.predicted, g.tolerance);
    }
    Ok(!args.gate || outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let kind = cli.command.expected_kind();
    let result = match &cli.command {
        Command::AnalyzeLaw(a)
        | Command::Solve(a)
        | Command::Walk(a)
        | Command::BrwMin(a)
        | Command::Rw1d(a)
        | Command::Spine(a) => experiment(kind, a),
        Command::Fit { csv, model, x, y, constant, gate } => {
            read_columns(csv, x, y).and_then(|(xs, ys)| fit_scaling(&xs, &ys, *model, *constant)).and_then(|r| {
                println!("{}", serde_json::to_string_pretty(&r)?);
                Ok(!*gate || !r.no_scaling)
            })
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

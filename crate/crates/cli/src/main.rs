//! `mqsac`: region enumeration, queue analytics, simulation, fitting,
//! chain evaluation, strategy search and the evaluation presets.

mod commands;
mod output;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mqsac", version, about = "Multi-queue network-slice admission control toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Multiplier in (0, 1] for strategy and replication counts.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub scale: f64,
    /// Overwrite an existing output directory.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count the feasible and admissible states of a scenario.
    Regions(commands::RegionsArgs),
    /// Steady-state report of one impatient queue.
    Analyze(commands::AnalyzeArgs),
    /// Monte-Carlo simulation of a strategy.
    Simulate(commands::SimulateArgs),
    /// Fit a geometric or exponential law to a CSV column.
    Fit(commands::FitArgs),
    /// Long-run occupancy of the embedded state chain.
    Markov(commands::MarkovArgs),
    /// Random strategy search with benchmark rows.
    Search(commands::SearchArgs),
    /// Run an evaluation campaign into an artifact directory.
    Preset(presets::PresetArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialArg {
    Empty,
    RandomFeasible,
    RandomFull,
}

impl From<InitialArg> for mqsac::sim::InitialState {
    fn from(a: InitialArg) -> Self {
        match a {
            InitialArg::Empty => Self::Empty,
            InitialArg::RandomFeasible => Self::RandomFeasible,
            InitialArg::RandomFull => Self::RandomFull,
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<mqsac::Error>() {
            return match e {
                mqsac::Error::Io(_) => 1,
                e if e.is_numeric() => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Regions(a) => commands::regions(g, &a),
        Command::Analyze(a) => commands::analyze(g, &a),
        Command::Simulate(a) => commands::simulate(g, &a),
        Command::Fit(a) => commands::fit(g, &a),
        Command::Markov(a) => commands::markov(g, &a),
        Command::Search(a) => commands::search(g, &a),
        Command::Preset(a) => presets::preset(g, &a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

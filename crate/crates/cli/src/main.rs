use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evfabric_cli::config::App;
use evfabric_cli::{run_experiment, run_report, Overrides, Task};

#[derive(Parser)]
#[command(name = "evfabric", version, about = "Event-based many-core fabric experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record the full event trace as trace.csv.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Partition, place and route an snn config without running it.
    Map(Common),
    /// Simulate a spiking network.
    Snn(Common),
    /// Tiled int8 matrix multiplication.
    Matmul(Common),
    /// Sparse training with prune-and-regrow.
    Rewire(Common),
    /// Event-carried gradient training of a feed-forward spiking network.
    Eventprop(Common),
    /// Energy per item and per timestep across batch sizes.
    Sweep(Common),
    /// Recompute a finished run's energy report from its activity counts.
    Report {
        /// Directory of the run, holding activity.json.
        #[arg(long)]
        run: PathBuf,
        /// Cost model to apply instead of the run's own.
        #[arg(long)]
        cost_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = |task: Task, c: Common| {
        let ov = Overrides {
            out: c.out,
            seed: c.seed,
            trace: c.trace,
        };
        run_experiment(task, &c.config, &ov)
    };
    let result = match cli.command {
        Command::Map(c) => experiment(Task::Map, c),
        Command::Snn(c) => experiment(Task::Run(App::Snn), c),
        Command::Matmul(c) => experiment(Task::Run(App::Matmul), c),
        Command::Rewire(c) => experiment(Task::Run(App::Rewire), c),
        Command::Eventprop(c) => experiment(Task::Run(App::Eventprop), c),
        Command::Sweep(c) => experiment(Task::Run(App::Sweep), c),
        Command::Report { run, cost_model, out } => run_report(&run, cost_model.as_deref(), &out),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

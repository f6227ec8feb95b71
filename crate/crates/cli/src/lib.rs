//! Command-line experiments: one JSON config in, artifact files out.

pub mod apps;
pub mod artifacts;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

use crate::artifacts::Artifacts;
use crate::config::App;
pub use crate::error::{CliError, Result, EXIT_RUNTIME, EXIT_VALIDATION};

/// What a subcommand runs. `Map` stops after the mapping pipeline of an snn
/// config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Map,
    Run(App),
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trace: bool,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment in `config` and writes its artifacts. Nothing is
/// written unless the whole run succeeds.
pub fn run_experiment(task: Task, config: &Path, ov: &Overrides) -> Result<Outcome> {
    let loaded = config::load(config, ov.seed)?;
    let app = loaded.config.app;
    let wanted = match task {
        Task::Map => App::Snn,
        Task::Run(a) => a,
    };
    if app != wanted {
        return Err(CliError::Validation(format!(
            "{}: config is for app `{}`, subcommand runs `{}`",
            config.display(),
            app.name(),
            wanted.name()
        )));
    }
    let out_dir = match (&ov.out, &loaded.config.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => loaded.resolve(o),
        (None, None) => {
            return Err(CliError::Validation(
                "no output directory: pass --out or set `out`".into(),
            ))
        }
    };
    let (artifacts, summary) = match task {
        Task::Map => apps::snn::map(&loaded)?,
        Task::Run(App::Snn) => apps::snn::run(&loaded, ov.trace)?,
        Task::Run(App::Matmul) => apps::matmul::run(&loaded, ov.trace)?,
        Task::Run(App::Rewire) => apps::rewire::run(&loaded)?,
        Task::Run(App::Eventprop) => apps::eventprop::run(&loaded)?,
        Task::Run(App::Sweep) => apps::sweep::run(&loaded)?,
    };
    finish(artifacts, summary, &out_dir)
}

/// Recomputes a finished run's energy report into `out`.
pub fn run_report(run_dir: &Path, cost_model: Option<&Path>, out: &Path) -> Result<Outcome> {
    let (artifacts, summary) = apps::report::run(run_dir, cost_model)?;
    finish(artifacts, summary, out)
}

fn finish(artifacts: Artifacts, summary: String, out: &Path) -> Result<Outcome> {
    let files = artifacts.write_to(out)?;
    Ok(Outcome { summary, files })
}

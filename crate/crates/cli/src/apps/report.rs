use std::path::Path;

use evfabric_core::{account, Activity, EnergyReport};
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::{load_cost_model, parse_json_file};
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct Recomputed {
    total: u64,
    /// Whether the run directory's own energy report is identical.
    matches_recorded: Option<bool>,
}

/// Recomputes the energy report of a finished run from its activity counts
/// and a cost model (the run's own unless `cost_model` is given).
pub fn run(run_dir: &Path, cost_model: Option<&Path>) -> Result<(Artifacts, String)> {
    let activity: Activity = parse_json_file(&run_dir.join("activity.json"))?;
    let model_path = cost_model.map_or_else(|| run_dir.join("cost_model.json"), Path::to_path_buf);
    let model = load_cost_model(&model_path)?;
    let energy = account(&activity, &model).map_err(|e| CliError::runtime("energy", e))?;
    let recorded = run_dir.join("energy.json");
    let matches_recorded = if recorded.exists() {
        let old: EnergyReport = parse_json_file(&recorded)?;
        Some(old == energy)
    } else {
        None
    };
    let mut out = Artifacts::default();
    out.json("energy.json", &energy)?;
    out.json(
        "recomputed.json",
        &Recomputed {
            total: energy.total(),
            matches_recorded,
        },
    )?;
    let verdict = match matches_recorded {
        Some(true) => "matches the recorded report",
        Some(false) => "DIFFERS from the recorded report",
        None => "no recorded report to compare",
    };
    Ok((out, format!("report: energy {} ({verdict})", energy.total())))
}

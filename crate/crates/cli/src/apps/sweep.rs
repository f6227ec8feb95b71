use evfabric_core::energy::write_sweep_csv;
use evfabric_core::energy::IdleWorkload;
use evfabric_core::{batch_sweep, BatchWorkload};
use evfabric_eventprop::GradientWorkload;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apps::eventprop::build;
use crate::artifacts::Artifacts;
use crate::config::{Loaded, SweepWorkload};
use crate::error::{CliError, Result};

pub fn run(l: &Loaded) -> Result<(Artifacts, String)> {
    let s = l.config.sweep.as_ref().expect("checked at load");
    if s.batches.is_empty() || s.batches.contains(&0) {
        return Err(CliError::Validation("sweep.batches: need at least one batch size, all >= 1".into()));
    }
    let model = l.cost_model()?;
    let workload: Box<dyn BatchWorkload> = match &s.workload {
        SweepWorkload::Eventprop { data, net, train } => {
            train.validate().map_err(|e| CliError::Validation(format!("sweep.workload: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(l.config.seed);
            let (samples, net) = build(data, net, &mut rng)?;
            Box::new(GradientWorkload {
                net,
                samples,
                cfg: train.clone(),
            })
        }
        SweepWorkload::Idle {
            items,
            cores_per_item,
            timesteps,
            cycles_per_timestep,
        } => Box::new(IdleWorkload {
            items: *items,
            cores_per_item: *cores_per_item,
            timesteps: *timesteps,
            cycles_per_timestep: *cycles_per_timestep,
        }),
    };
    let points = batch_sweep(workload.as_ref(), &s.batches, &model).map_err(|e| CliError::runtime("energy", e))?;
    let mut csv = Vec::new();
    write_sweep_csv(&points, &mut csv).map_err(|e| CliError::runtime("energy", e))?;
    let mut out = Artifacts::default();
    out.add("sweep.csv", csv);
    let per_step: Vec<f64> = points.iter().map(|p| p.energy_per_timestep).collect();
    let lo = per_step.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_step.iter().cloned().fold(0.0, f64::max);
    let summary = format!(
        "sweep: {} batch sizes, energy per timestep {lo:.1}..{hi:.1} ({:+.3}% spread)",
        points.len(),
        if lo > 0.0 { 100.0 * (hi - lo) / lo } else { 0.0 }
    );
    Ok((out, summary))
}

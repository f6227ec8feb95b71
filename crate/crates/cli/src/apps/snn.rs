use evfabric_core::trace::trace_csv_bytes;
use evfabric_snn::{map_network, read_spikes_csv, run_snn, write_spikes_csv, Mapping, Network, PlacementStrategy, SnnError};

use crate::artifacts::Artifacts;
use crate::config::{parse_json_file, read_input_bytes, Loaded, SnnSection};
use crate::error::{CliError, Result};

fn section(l: &Loaded) -> &SnnSection {
    l.config.snn.as_ref().expect("checked at load")
}

fn network(l: &Loaded) -> Result<Network> {
    let net: Network = parse_json_file(&l.resolve(&section(l).network))?;
    net.validate().map_err(|e| CliError::Validation(format!("network: {e}")))?;
    Ok(net)
}

fn strategy(l: &Loaded) -> PlacementStrategy {
    match section(l).run.placement {
        PlacementStrategy::FirstFit => PlacementStrategy::FirstFit,
        PlacementStrategy::Random { .. } => PlacementStrategy::Random { seed: l.config.seed },
    }
}

fn mapping_artifacts(net: &Network, mapping: &Mapping, out: &mut Artifacts) -> Result<()> {
    out.json("placement.json", &mapping.placement_json(net))?;
    out.json("routing_tables.json", &mapping.tables_json())?;
    let mut keymap = Vec::new();
    mapping
        .write_keymap_csv(net, &mut keymap)
        .map_err(|e| CliError::runtime("mapping", e))?;
    out.add("keymap.csv", keymap);
    Ok(())
}

/// Mapping only: placement, routing tables and key map.
pub fn map(l: &Loaded) -> Result<(Artifacts, String)> {
    let net = network(l)?;
    let cfg = l.machine()?;
    let mapping = map_network(&net, &cfg, &section(l).run.sram, strategy(l)).map_err(|e| CliError::runtime("mapping", e))?;
    let mut out = Artifacts::default();
    mapping_artifacts(&net, &mapping, &mut out)?;
    let entries: usize = mapping.tables.iter().map(|t| t.entries.len()).sum();
    let summary = format!(
        "map: {} vertices on {} PEs, {entries} routing entries",
        mapping.graph.vertices.len(),
        mapping.placement.pes.len()
    );
    Ok((out, summary))
}

pub fn run(l: &Loaded, trace: bool) -> Result<(Artifacts, String)> {
    let s = section(l);
    let net = network(l)?;
    let cfg = l.machine()?;
    let model = l.cost_model()?;
    let mut stimulus = s.stimulus.clone();
    if let Some(p) = &s.stimulus_file {
        let bytes = read_input_bytes(&l.resolve(p))?;
        stimulus.extend(read_spikes_csv(bytes.as_slice()).map_err(|e| CliError::Validation(format!("stimulus_file: {e}")))?);
    }
    let mut opts = s.run.clone();
    opts.placement = strategy(l);
    opts.trace |= trace;
    let r = run_snn(&net, &cfg, &stimulus, &opts, &model).map_err(|e| match e {
        SnnError::Stimulus(m) => CliError::Validation(format!("stimulus: {m}")),
        e => CliError::runtime("snn", e),
    })?;
    let mut out = Artifacts::default();
    let mut raster = Vec::new();
    write_spikes_csv(&r.raster, &mut raster).map_err(|e| CliError::runtime("snn", e))?;
    out.add("raster.csv", raster);
    out.json("energy.json", &r.energy)?;
    out.json("activity.json", &r.activity)?;
    out.json("cost_model.json", &model)?;
    mapping_artifacts(&net, &r.mapping, &mut out)?;
    if let Some(t) = &r.trace {
        out.add("trace.csv", trace_csv_bytes(t));
    }
    let summary = format!(
        "snn: {} spikes over {} ticks on {} PEs, energy {}",
        r.raster.len(),
        opts.ticks,
        r.mapping.placement.pes.len(),
        r.energy.total()
    );
    Ok((out, summary))
}

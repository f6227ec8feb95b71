//! Experiment configuration files.
//!
//! Paths inside a config resolve against the directory holding the config.
//! The experiment seed replaces every seed field of the selected app, so one
//! number fixes a run.

use std::path::{Path, PathBuf};

use evfabric_core::{CostModel, MachineConfig};
use evfabric_eventprop::{EventpropConfig, LatencyEncoder};
use evfabric_matmul::MatmulOptions;
use evfabric_rewire::TrainConfig;
use evfabric_snn::{LifParams, RunOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum App {
    Snn,
    Matmul,
    Rewire,
    Eventprop,
    Sweep,
}

impl App {
    pub fn name(self) -> &'static str {
        match self {
            App::Snn => "snn",
            App::Matmul => "matmul",
            App::Rewire => "rewire",
            App::Eventprop => "eventprop",
            App::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub app: App,
    pub seed: u64,
    /// Machine config JSON; defaults apply when absent.
    #[serde(default)]
    pub machine: Option<PathBuf>,
    /// Cost-model JSON; the built-in illustrative model when absent.
    #[serde(default)]
    pub cost_model: Option<PathBuf>,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub snn: Option<SnnSection>,
    #[serde(default)]
    pub matmul: Option<MatmulSection>,
    #[serde(default)]
    pub rewire: Option<RewireSection>,
    #[serde(default)]
    pub eventprop: Option<EventpropSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnnSection {
    /// Network JSON.
    pub network: PathBuf,
    /// Stimulus CSV with `tick,key` rows, keys being global neuron ids.
    #[serde(default)]
    pub stimulus_file: Option<PathBuf>,
    /// Extra stimulus spikes `[tick, neuron]`.
    #[serde(default)]
    pub stimulus: Vec<(u64, u32)>,
    #[serde(default)]
    pub run: RunOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatmulSection {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// `[tile_m, tile_k, tile_n]`; whole matrices when absent.
    #[serde(default)]
    pub tile: Option<[usize; 3]>,
    pub workers: usize,
    /// Matrix files; drawn from the seed when absent.
    #[serde(default)]
    pub a: Option<PathBuf>,
    #[serde(default)]
    pub b: Option<PathBuf>,
    #[serde(default)]
    pub options: MatmulOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RewireData {
    /// IDX files; `limit_train`/`limit_test` keep the first samples.
    Mnist {
        dir: PathBuf,
        #[serde(default)]
        limit_train: Option<usize>,
        #[serde(default)]
        limit_test: Option<usize>,
    },
    Blobs {
        train: usize,
        test: usize,
        dim: usize,
        sigma: f32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewireSection {
    pub data: RewireData,
    #[serde(default)]
    pub train: TrainConfig,
    /// Train on the layer-per-core fabric mapping instead of standalone.
    #[serde(default)]
    pub fabric: bool,
}

/// Two-class latency-coded blobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub samples: usize,
    pub dim: usize,
    pub sigma: f32,
    #[serde(default)]
    pub encoder: LatencyEncoder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnnNetSpec {
    /// Hidden layer widths; inputs come from the encoder and outputs are
    /// the two classes.
    pub hidden: Vec<usize>,
    pub horizon: u32,
    #[serde(default)]
    pub lif: LifParams,
    /// Initial weight mean and spread per trained layer, in units of
    /// `v_th / fan_in` and `v_th / sqrt(fan_in)`.
    pub init_mean: Vec<f32>,
    pub init_std: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradCheckSpec {
    /// Samples from the training set checked on the initial network.
    pub samples: usize,
    #[serde(default)]
    pub config: evfabric_eventprop::GradCheckConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventpropSection {
    pub data: BlobSpec,
    pub net: SnnNetSpec,
    pub steps: usize,
    pub batch: usize,
    #[serde(default)]
    pub train: EventpropConfig,
    pub gradcheck: GradCheckSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepWorkload {
    /// Eventprop gradient passes over latency-coded blobs.
    Eventprop {
        data: BlobSpec,
        net: SnnNetSpec,
        #[serde(default)]
        train: EventpropConfig,
    },
    /// Cores that boot and sleep.
    Idle {
        items: usize,
        cores_per_item: usize,
        timesteps: u64,
        cycles_per_timestep: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub batches: Vec<usize>,
    pub workload: SweepWorkload,
}

/// A parsed config plus the directory its relative paths hang off.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn machine(&self) -> Result<MachineConfig> {
        match &self.config.machine {
            None => Ok(MachineConfig::default()),
            Some(p) => {
                let path = self.resolve(p);
                let cfg: MachineConfig = parse_json_file(&path)?;
                cfg.validate()
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                Ok(cfg)
            }
        }
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        match &self.config.cost_model {
            None => Ok(CostModel::default()),
            Some(p) => load_cost_model(&self.resolve(p)),
        }
    }
}

pub fn load_cost_model(path: &Path) -> Result<CostModel> {
    let model: CostModel = parse_json_file(path)?;
    model
        .validate()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(model)
}

/// Reads and deserializes a JSON file, naming the offending field path on
/// failure.
pub fn parse_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_input(path)?;
    parse_json(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Inputs named by a config that cannot be read are config errors.
pub fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

pub fn read_input_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Validation(inner.to_string())
        } else {
            CliError::Validation(format!("at `{path}`: {inner}"))
        }
    })
}

/// Parses a config file, applies a seed override and checks that the app's
/// section is present and no other section is.
pub fn load(path: &Path, seed: Option<u64>) -> Result<Loaded> {
    let mut config: ExperimentConfig = parse_json_file(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let c = &config;
    let present = [
        (App::Snn, c.snn.is_some()),
        (App::Matmul, c.matmul.is_some()),
        (App::Rewire, c.rewire.is_some()),
        (App::Eventprop, c.eventprop.is_some()),
        (App::Sweep, c.sweep.is_some()),
    ];
    for (app, has) in present {
        if app == c.app && !has {
            return Err(CliError::Validation(format!(
                "{}: app `{}` needs a `{}` section",
                path.display(),
                app.name(),
                app.name()
            )));
        }
        if app != c.app && has {
            return Err(CliError::Validation(format!(
                "{}: section `{}` given for app `{}`",
                path.display(),
                app.name(),
                c.app.name()
            )));
        }
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

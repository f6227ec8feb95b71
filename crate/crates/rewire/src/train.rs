//! Standalone minibatch trainer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connectome::{split_budget, SparseConnectome};
use crate::data::Dataset;
use crate::error::{Result, RewireError};
use crate::kernels::{argmax, forward, train_sample, Gradients, Workspace};
use crate::memory::MemoryBudget;
use crate::rewire::{prune_and_regrow, update_layer, RewireHyper, RewireStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Layer widths, input first.
    pub arch: Vec<usize>,
    /// Fraction of dense connections kept active overall.
    pub connectivity: f64,
    /// Explicit per-layer budget; overrides `connectivity`.
    pub active: Option<Vec<usize>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub hyper: RewireHyper,
    pub memory: MemoryBudget,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: vec![784, 300, 100, 10],
            connectivity: 0.013,
            // 1.3% of the dense 266200, weighted towards the later layers.
            active: Some(vec![2260, 900, 300]),
            epochs: 20,
            batch_size: 10,
            hyper: RewireHyper::default(),
            memory: MemoryBudget::default(),
        }
    }
}

impl TrainConfig {
    pub fn budget(&self) -> Result<Vec<usize>> {
        match &self.active {
            Some(ks) if ks.len() + 1 == self.arch.len() => Ok(ks.clone()),
            Some(ks) => Err(RewireError::ShapeMismatch(format!(
                "{} budgets for {} layers",
                ks.len(),
                self.arch.len().saturating_sub(1)
            ))),
            None => split_budget(&self.arch, self.connectivity),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.batch_size == 0 {
            return Err(RewireError::InvalidHyper("batch_size must be >= 1".into()));
        }
        self.budget().map(drop)
    }
}

/// Per-layer random streams (stream `l + 1` of the seed) and the data-order
/// stream (stream 0).
pub fn streams(seed: u64, layers: usize) -> (ChaCha8Rng, Vec<ChaCha8Rng>) {
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(s);
        r
    };
    (stream(0), (1..=layers as u64).map(stream).collect())
}

/// Initial connectome and the per-layer streams positioned after drawing it.
pub fn init_model(cfg: &TrainConfig) -> Result<(SparseConnectome, ChaCha8Rng, Vec<ChaCha8Rng>)> {
    cfg.validate()?;
    let budget = cfg.budget()?;
    let (order, mut rngs) = streams(cfg.hyper.seed, budget.len());
    let net = SparseConnectome::random(&cfg.arch, &budget, &mut rngs)?;
    Ok((net, order, rngs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub rewire_period: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub active: Vec<usize>,
    pub connectivity: f64,
    /// Bytes per layer core, and for the whole model on one core.
    pub footprint_per_layer: Vec<u64>,
    pub footprint_model: u64,
    pub pruned: usize,
    pub regrown: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub arch: Vec<usize>,
    pub budget: Vec<usize>,
    pub epochs: Vec<EpochMetrics>,
    pub final_test_accuracy: f64,
}

pub fn accuracy(net: &SparseConnectome, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut ws = Workspace::new(&net.arch());
    let mut hits = 0usize;
    for i in 0..data.len() {
        forward(net, data.sample(i), &mut ws)?;
        hits += (argmax(ws.z.last().unwrap()) == data.labels[i] as usize) as usize;
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Sample order for one epoch: a fresh shuffle from the data stream.
pub fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Applies one optimiser step to every layer and, if `rewire`, a
/// prune/regrow pass.
pub fn apply_step(
    net: &mut SparseConnectome,
    grads: &Gradients,
    hyper: &RewireHyper,
    rngs: &mut [ChaCha8Rng],
    rewire: bool,
) -> Result<RewireStats> {
    let mut stats = RewireStats::default();
    for (l, layer) in net.layers.iter_mut().enumerate() {
        update_layer(layer, &grads.w[l], &grads.b[l], hyper, &mut rngs[l]);
        if rewire {
            let s = prune_and_regrow(layer, l, hyper.theta0, &mut rngs[l])?;
            stats.pruned += s.pruned;
            stats.regrown += s.regrown;
        }
    }
    Ok(stats)
}

pub fn train(train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<(SparseConnectome, TrainReport)> {
    let (mut net, mut order_rng, mut rngs) = init_model(cfg)?;
    if train_set.dim != cfg.arch[0] {
        return Err(RewireError::ShapeMismatch(format!(
            "dataset has {} features, architecture expects {}",
            train_set.dim, cfg.arch[0]
        )));
    }
    cfg.memory.check_per_core(&net)?;
    let budget = net.budget.clone();
    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size);
    let mut ws = Workspace::new(&cfg.arch);
    let mut grads = Gradients::zeros(&net);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let period = cfg.hyper.period(epoch, steps_per_epoch);
        let order = epoch_order(train_set.len(), &mut order_rng);
        let (mut loss, mut hits, mut stats) = (0.0f64, 0usize, RewireStats::default());
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.clear();
            let scale = 1.0 / batch.len() as f32;
            for &i in batch {
                let y = train_set.labels[i] as usize;
                let (l, ok) = train_sample(&net, train_set.sample(i), y, scale, &mut ws, &mut grads)?;
                loss += l as f64;
                hits += ok as usize;
            }
            let rewire = (step + 1) % period == 0;
            let s = apply_step(&mut net, &grads, &cfg.hyper, &mut rngs, rewire)?;
            stats.pruned += s.pruned;
            stats.regrown += s.regrown;
            net.check(rewire)?;
        }
        let per_layer = cfg.memory.per_layer(&net);
        cfg.memory.check_per_core(&net)?;
        epochs.push(EpochMetrics {
            epoch,
            rewire_period: period,
            steps: steps_per_epoch,
            train_loss: loss / train_set.len() as f64,
            train_accuracy: hits as f64 / train_set.len() as f64,
            test_accuracy: accuracy(&net, test_set)?,
            active: net.layers.iter().map(|l| l.k()).collect(),
            connectivity: net.connectivity(),
            footprint_per_layer: per_layer,
            footprint_model: cfg.memory.model(&net),
            pruned: stats.pruned,
            regrown: stats.regrown,
        });
    }
    let final_test_accuracy = epochs.last().map_or(accuracy(&net, test_set)?, |e| e.test_accuracy);
    Ok((
        net,
        TrainReport {
            arch: cfg.arch.clone(),
            budget,
            epochs,
            final_test_accuracy,
        },
    ))
}

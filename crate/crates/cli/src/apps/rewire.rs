use evfabric_rewire::{blobs, load_mnist, train, train_on_fabric, Dataset, TrainReport};

use crate::artifacts::Artifacts;
use crate::config::{Loaded, RewireData};
use crate::error::{CliError, Result};

fn datasets(l: &Loaded, data: &RewireData) -> Result<(Dataset, Dataset)> {
    match data {
        RewireData::Mnist {
            dir,
            limit_train,
            limit_test,
        } => {
            let (train, test) = load_mnist(&l.resolve(dir)).map_err(|e| CliError::Validation(format!("rewire.data: {e}")))?;
            let cut = |d: Dataset, n: &Option<usize>| match n {
                Some(n) => d.head(*n),
                None => d,
            };
            Ok((cut(train, limit_train), cut(test, limit_test)))
        }
        RewireData::Blobs { train, test, dim, sigma } => {
            if !(*sigma >= 0.0) || *dim == 0 {
                return Err(CliError::Validation("rewire.data: blobs need dim >= 1 and sigma >= 0".into()));
            }
            let seed = l.config.seed;
            Ok((blobs(*train, *dim, *sigma, seed), blobs(*test, *dim, *sigma, seed ^ 0x5eed)))
        }
    }
}

fn connectivity_rows(report: &TrainReport) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    for e in &report.epochs {
        for (layer, active) in e.active.iter().enumerate() {
            let dense = report.arch[layer] * report.arch[layer + 1];
            rows.push([
                e.epoch.to_string(),
                layer.to_string(),
                active.to_string(),
                dense.to_string(),
                format!("{}", *active as f64 / dense as f64),
            ]);
        }
    }
    rows
}

pub fn run(l: &Loaded) -> Result<(Artifacts, String)> {
    let s = l.config.rewire.as_ref().expect("checked at load");
    let (train_set, test_set) = datasets(l, &s.data)?;
    let mut cfg = s.train.clone();
    cfg.hyper.seed = l.config.seed;
    cfg.validate().map_err(|e| CliError::Validation(format!("rewire.train: {e}")))?;
    let mut out = Artifacts::default();
    let report = if s.fabric {
        let model = l.cost_model()?;
        let (_, r) = train_on_fabric(&train_set, &test_set, &cfg, &model).map_err(|e| CliError::runtime("rewire", e))?;
        out.json("metrics.json", &r)?;
        r.train
    } else {
        let (_, r) = train(&train_set, &test_set, &cfg).map_err(|e| CliError::runtime("rewire", e))?;
        out.json("metrics.json", &r)?;
        r
    };
    out.csv(
        "connectivity.csv",
        &["epoch", "layer", "active", "dense", "fraction"],
        connectivity_rows(&report),
    )?;
    let summary = format!(
        "rewire: {} epochs, test accuracy {:.4}, active {:?}{}",
        report.epochs.len(),
        report.final_test_accuracy,
        report.budget,
        if s.fabric { " (fabric)" } else { "" }
    );
    Ok((out, summary))
}

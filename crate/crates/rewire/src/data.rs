//! Labelled datasets: the IDX image/label files and a synthetic blob set.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, RewireError};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub classes: usize,
    /// Row-major `[samples][dim]`.
    pub features: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            dim: self.dim,
            classes: self.classes,
            features: self.features[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

fn be_u32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses an IDX3 image file and its IDX1 label file; pixels scale to [0, 1].
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let bad = |m: String| Err(RewireError::Dataset(m));
    if images.len() < 16 || be_u32(images, 0) != 0x0803 {
        return bad("image file lacks the IDX3 magic".into());
    }
    if labels.len() < 8 || be_u32(labels, 0) != 0x0801 {
        return bad("label file lacks the IDX1 magic".into());
    }
    let n = be_u32(images, 4) as usize;
    let dim = be_u32(images, 8) as usize * be_u32(images, 12) as usize;
    if be_u32(labels, 4) as usize != n {
        return bad(format!("{n} images but {} labels", be_u32(labels, 4)));
    }
    if images.len() != 16 + n * dim || labels.len() != 8 + n {
        return bad("IDX payload length does not match its header".into());
    }
    let labels = labels[8..].to_vec();
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    Ok(Dataset {
        dim,
        classes,
        features: images[16..].iter().map(|&p| p as f32 / 255.0).collect(),
        labels,
    })
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|e| RewireError::Dataset(format!("{}: {e}", p.display())))
    };
    parse_idx(&read(images)?, &read(labels)?)
}

/// Training and test splits from the four standard MNIST files in `dir`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let f = |name: &str| -> PathBuf { dir.join(name) };
    let mut train = load_idx(&f("train-images-idx3-ubyte"), &f("train-labels-idx1-ubyte"))?;
    let mut test = load_idx(&f("t10k-images-idx3-ubyte"), &f("t10k-labels-idx1-ubyte"))?;
    train.classes = 10;
    test.classes = 10;
    Ok((train, test))
}

/// Two Gaussian blobs centred at `±1` in every coordinate, noise `sigma`,
/// alternating labels.
pub fn blobs(n: usize, dim: usize, sigma: f32, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, sigma).expect("sigma is finite and >= 0");
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i % 2) as u8;
        let centre = if c == 0 { -1.0 } else { 1.0 };
        features.extend((0..dim).map(|_| centre + noise.sample(&mut rng)));
        labels.push(c);
    }
    Dataset {
        dim,
        classes: 2,
        features,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(n: u32, rows: u32, cols: u32, px: &[u8], lb: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut im = vec![0, 0, 8, 3];
        for v in [n, rows, cols] {
            im.extend_from_slice(&v.to_be_bytes());
        }
        im.extend_from_slice(px);
        let mut l = vec![0, 0, 8, 1];
        l.extend_from_slice(&n.to_be_bytes());
        l.extend_from_slice(lb);
        (im, l)
    }

    #[test]
    fn parses_tiny_idx() {
        let (im, l) = idx(2, 1, 2, &[0, 255, 51, 0], &[3, 1]);
        let d = parse_idx(&im, &l).unwrap();
        assert_eq!((d.dim, d.len(), d.classes), (2, 2, 4));
        assert_eq!(d.sample(0), &[0.0, 1.0]);
        assert_eq!(d.sample(1), &[0.2, 0.0]);
        assert!(parse_idx(&im[..im.len() - 1], &l).is_err());
        assert!(parse_idx(&l, &im).is_err());
    }

    #[test]
    fn blobs_alternate() {
        let d = blobs(10, 3, 0.1, 1);
        assert_eq!(d.labels, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        assert!(d.sample(1).iter().all(|&v| v > 0.0));
        assert_eq!(d, blobs(10, 3, 0.1, 1));
    }
}

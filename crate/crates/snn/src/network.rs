//! Population/projection description of a spiking network and its expansion
//! into explicit synapses.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifParams {
    /// Membrane decay per tick, in (0, 1].
    pub alpha: f32,
    pub v_th: f32,
    #[serde(default)]
    pub v_reset: f32,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            v_th: 1.0,
            v_reset: 0.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SnnError::Network(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(self.v_th.is_finite() && self.v_reset.is_finite() && self.v_th > self.v_reset) {
            return Err(SnnError::Network(format!(
                "v_th {} must exceed v_reset {}",
                self.v_th, self.v_reset
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Population {
    pub name: String,
    pub size: u32,
    #[serde(default)]
    pub params: LifParams,
    /// Source neurons never integrate; they fire only when stimulated.
    #[serde(default)]
    pub source: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Connectivity {
    AllToAll,
    OneToOne,
    FixedProbability { p: f64, seed: u64 },
    /// `(pre, post)` index pairs, in synapse order.
    Explicit { pairs: Vec<(u32, u32)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant(f32),
    Uniform { low: f32, high: f32, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Constant(u16),
    /// Inclusive range of ticks.
    Uniform { low: u16, high: u16, seed: u64 },
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec::Constant(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Projection {
    pub pre: String,
    pub post: String,
    pub connectivity: Connectivity,
    pub weight: WeightSpec,
    #[serde(default)]
    pub delay: DelaySpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub populations: Vec<Population>,
    #[serde(default)]
    pub projections: Vec<Projection>,
}

/// One synapse with population-local indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Synapse {
    pub pre: u32,
    pub post: u32,
    pub weight: f32,
    pub delay: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedProjection {
    pub pre: usize,
    pub post: usize,
    pub synapses: Vec<Synapse>,
}

/// A network with every projection drawn out into synapses. The global
/// synapse order is projection order, then order within the projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Expanded {
    /// Global id of each population's neuron 0.
    pub offsets: Vec<u32>,
    pub projections: Vec<ExpandedProjection>,
}

impl Expanded {
    pub fn neuron_count(&self, net: &Network) -> u32 {
        self.offsets.last().copied().unwrap_or(0)
            + net.populations.last().map_or(0, |p| p.size)
    }

    /// Largest delay of any synapse into population `post` (0 if none).
    pub fn max_delay_into(&self, post: usize) -> u16 {
        self.projections
            .iter()
            .filter(|p| p.post == post)
            .flat_map(|p| p.synapses.iter().map(|s| s.delay))
            .max()
            .unwrap_or(0)
    }

    /// Number of synapses ending on each neuron of population `post`.
    pub fn in_degree(&self, post: usize, size: u32) -> Vec<u64> {
        let mut deg = vec![0u64; size as usize];
        for p in self.projections.iter().filter(|p| p.post == post) {
            for s in &p.synapses {
                deg[s.post as usize] += 1;
            }
        }
        deg
    }
}

impl Network {
    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network =
            serde_json::from_str(text).map_err(|e| SnnError::Network(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    pub fn population_index(&self, name: &str) -> Result<usize> {
        self.populations
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| SnnError::Network(format!("unknown population `{name}`")))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (i, p) in self.populations.iter().enumerate() {
            if p.size == 0 {
                return Err(SnnError::Network(format!("population `{}` is empty", p.name)));
            }
            if seen.insert(p.name.as_str(), i).is_some() {
                return Err(SnnError::Network(format!("duplicate population `{}`", p.name)));
            }
            p.params.validate()?;
        }
        for pr in &self.projections {
            let pre = &self.populations[self.population_index(&pr.pre)?];
            let post = &self.populations[self.population_index(&pr.post)?];
            match &pr.connectivity {
                Connectivity::OneToOne if pre.size != post.size => {
                    return Err(SnnError::Network(format!(
                        "one_to_one between `{}` and `{}` of different sizes",
                        pre.name, post.name
                    )))
                }
                Connectivity::FixedProbability { p, .. } if !(0.0..=1.0).contains(p) => {
                    return Err(SnnError::Network(format!("probability {p} not in [0, 1]")))
                }
                Connectivity::Explicit { pairs } => {
                    if let Some(bad) = pairs.iter().find(|(a, b)| *a >= pre.size || *b >= post.size) {
                        return Err(SnnError::Network(format!(
                            "explicit pair {bad:?} out of range for `{}` -> `{}`",
                            pre.name, post.name
                        )));
                    }
                }
                _ => {}
            }
            match pr.delay {
                DelaySpec::Constant(0) => {
                    return Err(SnnError::Network("delays must be at least 1 tick".into()))
                }
                DelaySpec::Uniform { low, high, .. } if low == 0 || high < low => {
                    return Err(SnnError::Network(format!("bad delay range {low}..={high}")))
                }
                _ => {}
            }
            if let WeightSpec::Uniform { low, high, .. } = pr.weight {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(SnnError::Network(format!("bad weight range {low}..{high}")));
                }
            }
        }
        Ok(())
    }

    pub fn expand(&self) -> Result<Expanded> {
        self.validate()?;
        let mut offsets = Vec::with_capacity(self.populations.len());
        let mut next = 0u64;
        for p in &self.populations {
            offsets.push(u32::try_from(next).map_err(|_| {
                SnnError::Network("more than 2^32 neurons".into())
            })?);
            next += p.size as u64;
        }
        let mut projections = Vec::with_capacity(self.projections.len());
        for pr in &self.projections {
            let pre = self.population_index(&pr.pre)?;
            let post = self.population_index(&pr.post)?;
            let (ns, nt) = (self.populations[pre].size, self.populations[post].size);
            let pairs: Vec<(u32, u32)> = match &pr.connectivity {
                Connectivity::AllToAll => (0..ns)
                    .flat_map(|i| (0..nt).map(move |j| (i, j)))
                    .collect(),
                Connectivity::OneToOne => (0..ns).map(|i| (i, i)).collect(),
                Connectivity::FixedProbability { p, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    let mut out = Vec::new();
                    for i in 0..ns {
                        for j in 0..nt {
                            if rng.random::<f64>() < *p {
                                out.push((i, j));
                            }
                        }
                    }
                    out
                }
                Connectivity::Explicit { pairs } => pairs.clone(),
            };
            let mut weights = WeightDraw::new(&pr.weight);
            let mut delays = DelayDraw::new(&pr.delay);
            let synapses = pairs
                .into_iter()
                .map(|(pre, post)| Synapse {
                    pre,
                    post,
                    weight: weights.next(),
                    delay: delays.next(),
                })
                .collect();
            projections.push(ExpandedProjection {
                pre,
                post,
                synapses,
            });
        }
        Ok(Expanded {
            offsets,
            projections,
        })
    }
}

struct WeightDraw<'a> {
    spec: &'a WeightSpec,
    rng: Option<ChaCha8Rng>,
}

impl<'a> WeightDraw<'a> {
    fn new(spec: &'a WeightSpec) -> Self {
        let rng = match spec {
            WeightSpec::Uniform { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            WeightSpec::Constant(_) => None,
        };
        Self { spec, rng }
    }

    fn next(&mut self) -> f32 {
        match (self.spec, self.rng.as_mut()) {
            (WeightSpec::Uniform { low, high, .. }, Some(rng)) if high > low => {
                rng.random_range(*low..*high)
            }
            (WeightSpec::Uniform { low, .. }, _) => *low,
            (WeightSpec::Constant(w), _) => *w,
        }
    }
}

struct DelayDraw<'a> {
    spec: &'a DelaySpec,
    rng: Option<ChaCha8Rng>,
}

impl<'a> DelayDraw<'a> {
    fn new(spec: &'a DelaySpec) -> Self {
        let rng = match spec {
            DelaySpec::Uniform { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            DelaySpec::Constant(_) => None,
        };
        Self { spec, rng }
    }

    fn next(&mut self) -> u16 {
        match (self.spec, self.rng.as_mut()) {
            (DelaySpec::Uniform { low, high, .. }, Some(rng)) => rng.random_range(*low..=*high),
            (DelaySpec::Uniform { low, .. }, None) => *low,
            (DelaySpec::Constant(d), _) => *d,
        }
    }
}

/// Synfire chain: `groups` groups of `size` neurons in one population, each
/// group fully connected to the next with one-tick delays.
pub fn synfire_chain(groups: u32, size: u32, weight: f32) -> Network {
    let mut pairs = Vec::new();
    for g in 0..groups.saturating_sub(1) {
        for i in 0..size {
            for j in 0..size {
                pairs.push((g * size + i, (g + 1) * size + j));
            }
        }
    }
    Network {
        populations: vec![Population {
            name: "chain".into(),
            size: groups * size,
            params: LifParams::default(),
            source: false,
        }],
        projections: vec![Projection {
            pre: "chain".into(),
            post: "chain".into(),
            connectivity: Connectivity::Explicit { pairs },
            weight: WeightSpec::Constant(weight),
            delay: DelaySpec::Constant(1),
        }],
    }
}

/// Randomly connected recurrent population with mixed-sign weights and
/// delays of 1..=4 ticks.
pub fn random_recurrent(size: u32, p: f64, seed: u64) -> Network {
    Network {
        populations: vec![Population {
            name: "pool".into(),
            size,
            params: LifParams {
                alpha: 0.9,
                v_th: 1.0,
                v_reset: 0.0,
            },
            source: false,
        }],
        projections: vec![Projection {
            pre: "pool".into(),
            post: "pool".into(),
            connectivity: Connectivity::FixedProbability { p, seed },
            weight: WeightSpec::Uniform {
                low: -0.4,
                high: 0.8,
                seed: seed.wrapping_add(1),
            },
            delay: DelaySpec::Uniform {
                low: 1,
                high: 4,
                seed: seed.wrapping_add(2),
            },
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let net = random_recurrent(10, 0.2, 3);
        let text = serde_json::to_string(&net).unwrap();
        assert_eq!(Network::from_json(&text).unwrap(), net);
        let bad = text.replacen("\"size\"", "\"sise\"", 1);
        assert!(Network::from_json(&bad).is_err());
    }

    #[test]
    fn expansion_is_deterministic() {
        let net = random_recurrent(50, 0.1, 9);
        let a = net.expand().unwrap();
        assert_eq!(a, net.expand().unwrap());
        let syn = &a.projections[0].synapses;
        assert!(!syn.is_empty());
        assert!(syn.iter().all(|s| (1..=4).contains(&s.delay)));
        assert!(syn.iter().all(|s| (-0.4..0.8).contains(&s.weight)));
    }

    #[test]
    fn rejects_zero_delay_and_bad_pairs() {
        let mut net = synfire_chain(2, 2, 1.0);
        net.projections[0].delay = DelaySpec::Constant(0);
        assert!(net.validate().is_err());
        let mut net = synfire_chain(2, 2, 1.0);
        net.projections[0].connectivity = Connectivity::Explicit { pairs: vec![(0, 4)] };
        assert!(net.validate().is_err());
    }
}

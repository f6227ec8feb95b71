//! Sparse-to-sparse training of a small dense-layer network under a fixed
//! active-connection budget: amplitudes follow SGD with an L1 pull and
//! Gaussian noise, connections whose amplitude reaches zero are pruned and
//! replaced by uniformly drawn dormant ones. Runs standalone or split across
//! fabric cores.

pub mod connectome;
pub mod data;
pub mod error;
pub mod fabric;
pub mod kernels;
pub mod memory;
pub mod rewire;
pub mod train;

pub use connectome::{split_budget, SparseConnectome, SparseLayer};
pub use data::{blobs, load_idx, load_mnist, parse_idx, Dataset};
pub use error::{Result, RewireError};
pub use fabric::{train_on_fabric, FabricTrainReport, PeFootprint};
pub use kernels::{batch_gradients, logits, Gradients, Workspace};
pub use memory::MemoryBudget;
pub use rewire::{prune_and_regrow, update_layer, RewireHyper, RewireStats};
pub use train::{accuracy, train, EpochMetrics, TrainConfig, TrainReport};

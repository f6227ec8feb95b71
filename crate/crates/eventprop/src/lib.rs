//! Event-carried backpropagation for feed-forward LIF networks: a
//! clock-driven forward pass with interpolated spike times, a
//! time-to-first-spike loss, the discrete adjoint run backward over ticks,
//! and batch-parallel training on the fabric with errors carried in packet
//! payloads.

pub mod adam;
pub mod backward;
pub mod error;
pub mod event;
pub mod fabric;
pub mod forward;
pub mod gradcheck;
pub mod loss;
pub mod net;
pub mod train;

pub use adam::{AdamHyper, AdamState};
pub use backward::{backward, incoming_errors, layer_adjoint, AdjointState, Backward, LayerAdjoint, DEFAULT_EPS_RATE};
pub use error::{EventpropError, Result};
pub use event::{ErrorEvent, ERROR_EVENT_BYTES};
pub use fabric::{gradients_on_fabric, records_on_fabric, train_step, GradientWorkload, StepReport};
pub use forward::{forward, LayerSim, Spike, SpikeRecord};
pub use gradcheck::{gradient_check, GradCheck, GradCheckConfig};
pub use loss::{predict, ttfs_loss};
pub use net::{blobs, FeedForwardSnn, LatencyEncoder};
pub use train::{accuracy, batch_gradients, evaluate, sample_gradients, BatchResult, EventpropConfig, Sample, SampleResult};

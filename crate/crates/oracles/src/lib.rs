//! Slow, obviously-correct reference implementations. Test code only: nothing
//! here shares an implementation path with the crates it checks.

pub mod fd;
pub mod layered;
pub mod loss;
pub mod matmul;
pub mod mlp;
pub mod multicast;
pub mod snn;
pub mod split;
pub mod torus;

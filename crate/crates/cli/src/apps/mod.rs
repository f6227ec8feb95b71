pub mod eventprop;
pub mod matmul;
pub mod report;
pub mod rewire;
pub mod snn;
pub mod sweep;

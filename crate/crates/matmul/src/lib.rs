//! Tiled int8 × int8 → int32 matrix multiplication on the fabric. A scheduler
//! PE runs a state machine over worker flags; workers exchange tiles and
//! partial results by DMA and reduce each output tile along a binary tree.

pub mod error;
pub mod fsm;
pub mod matrix;
pub mod plan;
pub mod runtime;

pub use error::{MatmulError, Result};
pub use fsm::{Command, SchedulerFsm, WorkerFlag, WorkerState};
pub use matrix::Matrix;
pub use plan::{plan_tiling, reduction_tree, CombineStep, Group, Task, TilingPlan};
pub use runtime::{audit, run_matmul, AuditSummary, MatmulOptions, MatmulReport, MatmulRun};

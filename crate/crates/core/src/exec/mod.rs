//! Executors that turn a shelf plan into agent paths.

pub mod baseline;
pub mod crest;
pub mod state;

pub use baseline::run_decomp_pp;
pub use crest::{run_crest, shelf_assignment};
pub use state::{Event, EventKind, ExecState, ExecutionResult, RunStats, StrategyKind, StrategyRecord};

//! Execution of precomputed shelf plans by a team of warehouse robots.

pub mod error;
pub mod grid;
pub mod instance;
pub mod plan;
pub mod intervals;
pub mod sipp;
pub mod seed;
pub mod depgraph;
pub mod hungarian;
pub mod mlsipp;
pub mod exec;
pub mod execlog;
pub mod strategies;
pub mod metrics;
pub mod validate;
pub mod layout;
pub mod bench;

//! Synthesis of ReRAM processing-in-memory CNN accelerators.
//!
//! Given a quantized CNN and a total power budget, the flow picks weight
//! duplication factors, compiles an IR-level dataflow DAG, partitions layers
//! onto macros, sizes the peripheral components of every macro, and scores
//! each candidate with an event-driven simulation.

pub mod alloc;
pub mod dataflow;
pub mod dse;
pub mod error;
pub mod hw;
pub mod model;
pub mod partition;
pub mod report;
pub mod seed;
pub mod sim;
pub mod wtdup;

pub use error::{Error, Result};

//! Stage 3: macro partitioning.
//!
//! A gene assigns every weight-bearing layer a macro count and optionally a
//! sharing partner; an evolutionary search picks the gene, and the resulting
//! plan adds merge/transfer IRs to the dataflow DAG.

mod ea;
mod gene;
mod plan;

pub use ea::{ea_explore, EaConfig, EaOutcome};
pub use gene::{validate_gene, GeneSpace, MacAllocGene, MAX_MACROS};
pub use plan::{attach_comm_irs, build_macro_plan, flits, noc_latency, MacroGroup, MacroInfo, MacroPlan};

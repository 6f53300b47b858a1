//! Sharing elimination.
//!
//! Operands of the multilinear nest that depend on a single linear loop are
//! partitioned by the symbols they share. Partitions with no more operands
//! than symbols are hoisted into temporaries; the others are expanded. The
//! products that expansion creates form the sharing graph, and a minimum
//! vertex cover of it selects the symbols to factorize. Code motion then
//! schedules everything left, and reduction-level scalars get a final
//! factorize-or-hoist pass.

pub mod graph;
pub mod ilp;
mod nest;
pub mod operands;
mod synth;

pub use graph::{merge_vertices, MergeDecision, SharingGraph, Vertex};
pub use ilp::{solve_ilp, IlpSolution};
pub use operands::{collect_operands, strategy_select, MultilinearOperand, OperandPartition, Strategy, StrategyChoice};
pub use synth::{
    build_sharing_graph, eliminate, sharing_elimination, FlipTrace, NestTrace, PartitionTrace, SeOptions, SeOutcome,
    SeTrace, StageFlops,
};

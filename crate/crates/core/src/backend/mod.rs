//! Zero-block skipping, C emission and the end-to-end pipeline.

pub mod emit;
mod pipeline;
pub mod zero;

pub use emit::{emit_c, lower, CFunction};
pub use pipeline::{run_pipeline, PipelineOptions, PipelineOutcome, Report};
pub use zero::{detect_zero_blocks, restructure_loops, NonzeroLayout, ZeroSkip};

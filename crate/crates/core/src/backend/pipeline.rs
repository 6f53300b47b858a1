use serde::Serialize;

use crate::cost::{array_footprint, CostReport};
use crate::driver::{optimize, Config};
use crate::error::Result;
use crate::ir::{flop_count, validate_fem_nest, Kernel};
use crate::preeval::PreevalSummary;
use crate::scalar::Scalar;
use crate::sharing::{SeTrace, StageFlops};

use super::zero::{detect_zero_blocks, restructure_loops, ZeroSkip};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineOptions {
    pub config: Config,
    pub zero_skip: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { config: Config::default(), zero_skip: true }
    }
}

/// Transformation report.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub input_flops: u64,
    pub output_flops: u64,
    /// Whole-kernel flop count after every stage, in order.
    pub stages: Vec<StageFlops>,
    /// Bytes of introduced array temporaries in the final kernel.
    pub temporary_bytes: usize,
    pub plan: CostReport,
    pub preeval: Option<PreevalSummary>,
    pub sharing: Option<SeTrace>,
    pub zero_skip: Option<ZeroSkip>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome<T> {
    pub kernel: Kernel<T>,
    pub report: Report,
}

/// Plan selection, pre-evaluation and sharing elimination, then zero-block
/// skipping on the result.
pub fn run_pipeline<T: Scalar>(k: &Kernel<T>, opts: &PipelineOptions) -> Result<PipelineOutcome<T>> {
    let v = validate_fem_nest(k)?;
    let element = v.roles.element.clone();
    let opt = optimize(&v, &opts.config)?;
    let mut stages = opt.stages;
    let mut kernel = opt.kernel;
    let mut zero_skip = None;
    if opts.zero_skip {
        let layout = detect_zero_blocks(&kernel)?;
        let (out, rep) = restructure_loops(&kernel, &layout)?;
        stages.push(StageFlops { stage: "zero-skip".into(), flops: rep.flops_after });
        kernel = out;
        zero_skip = Some(rep);
    }
    let report = Report {
        input_flops: flop_count(k),
        output_flops: flop_count(&kernel),
        stages,
        temporary_bytes: array_footprint(&kernel, element.as_deref())?,
        plan: opt.report,
        preeval: opt.preeval,
        sharing: opt.sharing,
        zero_skip,
    };
    Ok(PipelineOutcome { kernel, report })
}

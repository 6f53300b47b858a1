//! Differential checks against the interpreter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{run_pipeline, PipelineOptions};
use crate::error::Result;
use crate::ir::eval::relative_error;
use crate::ir::{evaluate, Kernel, Provenance};
use crate::scalar::Scalar;

/// Scales every input table entry by a random factor in `[0.75, 1.25]`.
/// Exact zeros stay zero, so padding survives.
pub fn perturb<T: Scalar>(k: &Kernel<T>, seed: u64) -> Kernel<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = k.clone();
    for t in out.tables.values_mut().filter(|t| t.provenance == Provenance::Input) {
        for v in &mut t.values {
            let f: f64 = rng.gen_range(0.75..1.25);
            *v = v.clone() * T::lit(f);
        }
    }
    out
}

/// Largest relative error of the full pipeline against the interpreter of
/// its input, over the given seeds.
pub fn pipeline_error(k: &Kernel<f64>, opts: &PipelineOptions, seeds: impl IntoIterator<Item = u64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for seed in seeds {
        let input = perturb(k, seed);
        let out = run_pipeline(&input, opts)?;
        worst = worst.max(relative_error(&evaluate(&input)?, &evaluate(&out.kernel)?));
    }
    Ok(worst)
}

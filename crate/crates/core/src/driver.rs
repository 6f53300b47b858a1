//! Plan selection: which monomials to pre-evaluate and which to leave to
//! sharing elimination, under the temporary memory threshold.

use serde::Serialize;

use crate::cost::{
    base_flops, increase_factor, theta_pre, theta_se, BipartitionCost, CostReport, MonomialCost, PreCost,
};
use crate::error::{Error, Result};
use crate::ir::{flop_count, Kernel, ValidatedKernel};
use crate::preeval::{preevaluate, split_monomials, PreevalSummary};
use crate::scalar::Scalar;
use crate::sharing::{eliminate, SeOptions, SeTrace, StageFlops};

/// Default byte threshold for temporaries, the size of a typical L2 cache.
pub const DEFAULT_THRESHOLD: usize = 262_144;

/// Largest candidate set whose bipartitions are enumerated.
pub const MAX_CANDIDATES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Config {
    /// Bytes available to introduced array temporaries.
    pub threshold: usize,
    pub preeval: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config { threshold: DEFAULT_THRESHOLD, preeval: true }
    }
}

impl Config {
    pub fn with_threshold(threshold: usize) -> Self {
        Config { threshold, ..Config::default() }
    }
}

/// Monomials split by their individual verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Triage {
    /// Cheaper under sharing elimination, or not pre-evaluable.
    pub s: Vec<usize>,
    /// Candidates for pre-evaluation.
    pub p: Vec<usize>,
    pub monomials: Vec<MonomialCost>,
}

/// Scores every monomial on its own.
pub fn triage<T: Scalar>(k: &ValidatedKernel<T>, cfg: &Config) -> Result<Triage> {
    let Ok(monomials) = split_monomials(k) else {
        return Ok(Triage { s: Vec::new(), p: Vec::new(), monomials: Vec::new() });
    };
    let mut out = Triage { s: Vec::new(), p: Vec::new(), monomials: Vec::new() };
    for m in &monomials {
        let se = theta_se(k, &[m.id], Some(cfg.threshold))?;
        let pre = if cfg.preeval {
            theta_pre(k, &[m.id])?
        } else {
            PreCost::Rejected { reason: "pre-evaluation disabled".into() }
        };
        let rho = match &pre {
            PreCost::Accepted { terms, .. } => Some(*terms),
            PreCost::Rejected { .. } => None,
        };
        if pre.flops().is_some_and(|f| f < se) {
            out.p.push(m.id);
        } else {
            out.s.push(m.id);
        }
        out.monomials.push(MonomialCost {
            id: m.id,
            expr: m.expr.to_string(),
            k: m.k,
            n: m.n,
            iota: increase_factor(m.n, m.k),
            rho,
            theta_se: se,
            theta_pre: pre,
        });
    }
    Ok(out)
}

/// Scores all splits of the candidates `p`; the monomials in `s` always go to
/// sharing elimination.
pub fn enumerate_bipartitions<T: Scalar>(
    k: &ValidatedKernel<T>,
    s: &[usize],
    p: &[usize],
    cfg: &Config,
) -> Result<Vec<BipartitionCost>> {
    if p.len() > MAX_CANDIDATES {
        return Err(Error::TooManyMonomials(p.len()));
    }
    let mut out = Vec::with_capacity(1 << p.len());
    for mask in 0u32..(1u32 << p.len()) {
        let (mut b_p, mut b_s) = (Vec::new(), Vec::new());
        for (bit, &id) in p.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                b_p.push(id);
            } else {
                b_s.push(id);
            }
        }
        let pre = if b_p.is_empty() { PreCost::Accepted { flops: 0, terms: 0, memory: 0 } } else { theta_pre(k, &b_p)? };
        let memory = pre.memory();
        let mut rest: Vec<usize> = s.iter().chain(&b_s).copied().collect();
        rest.sort();
        let se = theta_se(k, &rest, Some(cfg.threshold.saturating_sub(memory)))?;
        let (theta_pre, feasible, note) = match &pre {
            PreCost::Accepted { flops, .. } => (*flops, memory <= cfg.threshold, None),
            PreCost::Rejected { reason } => (0, false, Some(reason.clone())),
        };
        let note = note.or_else(|| (!feasible).then(|| format!("needs {memory} bytes, threshold is {}", cfg.threshold)));
        out.push(BipartitionCost { b_s, b_p, theta_se: se, theta_pre, cost: se + theta_pre, memory, feasible, note });
    }
    Ok(out)
}

/// Cheapest feasible split; ties go to less pre-evaluation, then to the
/// lexicographically smaller set.
pub fn select(bs: &[BipartitionCost]) -> Option<usize> {
    (0..bs.len()).filter(|&i| bs[i].feasible).min_by(|&a, &b| {
        let (x, y) = (&bs[a], &bs[b]);
        x.cost.cmp(&y.cost).then(x.b_p.len().cmp(&y.b_p.len())).then(x.b_p.cmp(&y.b_p))
    })
}

/// Result of applying one plan.
#[derive(Clone, Debug)]
pub struct Applied<T> {
    pub kernel: Kernel<T>,
    pub preeval: Option<PreevalSummary>,
    pub sharing: Option<SeTrace>,
    pub stages: Vec<StageFlops>,
}

/// Pre-evaluates `b_p`, then runs sharing elimination on everything, within
/// the memory left by the pre-evaluated tables.
pub fn apply_plan<T: Scalar>(k: &ValidatedKernel<T>, b_p: &[usize], cfg: &Config) -> Result<Applied<T>> {
    let mut stages = vec![StageFlops { stage: "input".into(), flops: flop_count(k.kernel()) }];
    let (kernel, preeval, memory) = if b_p.is_empty() {
        (k.kernel().clone(), None, 0)
    } else {
        let memory = theta_pre(k, b_p)?.memory();
        let out = preevaluate(k, b_p)?;
        stages.push(StageFlops { stage: "preeval".into(), flops: flop_count(&out.kernel) });
        (out.kernel, Some(out.summary), memory)
    };
    let budget = Some(cfg.threshold.saturating_sub(memory));
    match eliminate(&kernel, &SeOptions { budget }) {
        Ok(se) => {
            stages.extend(se.stages.into_iter().skip(1));
            Ok(Applied { kernel: se.kernel, preeval, sharing: Some(se.trace), stages })
        }
        Err(Error::NotFemNest(_)) => Ok(Applied { kernel, preeval, sharing: None, stages }),
        Err(e) => Err(e),
    }
}

/// Optimized kernel with the report of how it was chosen.
#[derive(Clone, Debug)]
pub struct Optimized<T> {
    pub kernel: Kernel<T>,
    pub report: CostReport,
    pub preeval: Option<PreevalSummary>,
    pub sharing: Option<SeTrace>,
    pub stages: Vec<StageFlops>,
}

/// Chooses the cheapest feasible plan and applies it.
pub fn optimize<T: Scalar>(k: &ValidatedKernel<T>, cfg: &Config) -> Result<Optimized<T>> {
    let tri = triage(k, cfg)?;
    let bipartitions = enumerate_bipartitions(k, &tri.s, &tri.p, cfg)?;
    let chosen = select(&bipartitions);
    let b_p = chosen.map(|i| bipartitions[i].b_p.clone()).unwrap_or_default();
    let applied = apply_plan(k, &b_p, cfg)?;
    let report = CostReport {
        threshold: cfg.threshold,
        base_flops: base_flops(k),
        monomials: tri.monomials,
        s: tri.s,
        p: tri.p,
        bipartitions,
        chosen,
    };
    Ok(Optimized { kernel: applied.kernel, report, preeval: applied.preeval, sharing: applied.sharing, stages: applied.stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_kernel, validate_fem_nest};

    fn poisson() -> ValidatedKernel<f64> {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../kernels/poisson.json")).unwrap();
        validate_fem_nest(&parse_kernel(&text).unwrap()).unwrap()
    }

    #[test]
    fn prediction_matches_applied_plan() {
        let k = poisson();
        let out = optimize(&k, &Config::default()).unwrap();
        let chosen = out.report.chosen().unwrap();
        assert_eq!(flop_count(&out.kernel), out.report.base_flops + chosen.cost);
    }

    #[test]
    fn empty_candidate_set_has_one_split() {
        let k = poisson();
        let bs = enumerate_bipartitions(&k, &[0], &[], &Config::default()).unwrap();
        assert_eq!(bs.len(), 1);
        assert!(bs[0].b_p.is_empty() && bs[0].feasible);
    }

    #[test]
    fn tiny_threshold_forbids_tables() {
        let k = poisson();
        let out = optimize(&k, &Config::with_threshold(1)).unwrap();
        assert!(out.preeval.is_none());
        assert!(out.report.bipartitions.iter().filter(|b| !b.b_p.is_empty()).all(|b| !b.feasible));
    }

    #[test]
    fn too_many_candidates() {
        let k = poisson();
        let p: Vec<usize> = (0..17).collect();
        assert_eq!(enumerate_bipartitions(&k, &[], &p, &Config::default()), Err(Error::TooManyMonomials(17)));
    }

    #[test]
    fn ties_prefer_less_preevaluation() {
        let b = |b_p: Vec<usize>, cost| BipartitionCost {
            b_s: Vec::new(),
            b_p,
            theta_se: cost,
            theta_pre: 0,
            cost,
            memory: 0,
            feasible: true,
            note: None,
        };
        assert_eq!(select(&[b(vec![0], 5), b(vec![], 5), b(vec![1], 5)]), Some(1));
        assert_eq!(select(&[b(vec![1], 5), b(vec![0], 5)]), Some(1));
    }
}

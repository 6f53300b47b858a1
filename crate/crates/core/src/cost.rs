//! Operation counts of the two strategies for a monomial set, and the memory
//! they claim.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ir::{flop_count, Kernel, LocalKind, Provenance, ValidatedKernel};
use crate::preeval::{plan_preevaluation, restrict, split_monomials, Monomial};
use crate::scalar::Scalar;
use crate::sharing::{eliminate, SeOptions};

/// Multisets of size `k` over `n` elements.
pub fn increase_factor(n: usize, k: usize) -> u64 {
    let n = n.max(1) as u128;
    let mut c: u128 = 1;
    for t in 1..=k as u128 {
        c = c * (n + t - 1) / t;
    }
    c.min(u64::MAX as u128) as u64
}

/// Cost of pre-evaluating a monomial set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PreCost {
    Accepted {
        flops: u64,
        /// Reference terms after regrouping.
        terms: usize,
        memory: usize,
    },
    Rejected {
        reason: String,
    },
}

impl PreCost {
    pub fn flops(&self) -> Option<u64> {
        match self {
            PreCost::Accepted { flops, .. } => Some(*flops),
            PreCost::Rejected { .. } => None,
        }
    }

    pub fn memory(&self) -> usize {
        match self {
            PreCost::Accepted { memory, .. } => *memory,
            PreCost::Rejected { .. } => 0,
        }
    }
}

fn reduction_extent<T: Scalar>(k: &ValidatedKernel<T>) -> Option<(String, usize)> {
    let red = k.roles.reduction.clone()?;
    let l = k.loops().into_iter().find(|l| l.index == red)?;
    Some((red, l.trips()))
}

/// Why a monomial cannot be pre-evaluated profitably, if it cannot.
pub fn rejection<T: Scalar>(k: &ValidatedKernel<T>, m: &Monomial<T>) -> Option<String> {
    let Some((red, extent)) = reduction_extent(k) else { return Some("no reduction loop".into()) };
    let iota = increase_factor(m.n, m.k);
    if iota >= extent as u64 {
        return Some(format!("increase factor {iota} is not below the {extent} iterations of `{red}`"));
    }
    None
}

/// Operations executed by the code replacing the monomials `ms` when they
/// are pre-evaluated together.
pub fn theta_pre<T: Scalar>(k: &ValidatedKernel<T>, ms: &[usize]) -> Result<PreCost> {
    let monomials = split_monomials(k)?;
    for &id in ms {
        let m = monomials.get(id).ok_or_else(|| Error::Invalid(format!("no monomial {id}")))?;
        if let Some(reason) = rejection(k, m) {
            return Ok(PreCost::Rejected { reason: format!("monomial {id}: {reason}") });
        }
    }
    match plan_preevaluation(k, ms) {
        Ok(plan) => Ok(PreCost::Accepted { flops: plan.flops(), terms: plan.rho(), memory: plan.memory_bytes(k) }),
        Err(Error::NonSeparable(why)) => Ok(PreCost::Rejected { reason: format!("not separable: {why}") }),
        Err(e) => Err(e),
    }
}

/// Operations of the kernel once every monomial is removed.
pub fn base_flops<T: Scalar>(k: &ValidatedKernel<T>) -> u64 {
    let red = k.roles.reduction.clone().unwrap_or_default();
    flop_count(&restrict(k, &red, &|_| false))
}

/// Operations spent on the monomials `ms` after sharing elimination, beyond
/// the element-level code they share with every other plan.
pub fn theta_se<T: Scalar>(k: &ValidatedKernel<T>, ms: &[usize], budget: Option<usize>) -> Result<u64> {
    if ms.is_empty() {
        return Ok(0);
    }
    let red = k.roles.reduction.clone().unwrap_or_default();
    let sub = restrict(k, &red, &|id| ms.contains(&id));
    let out = eliminate(&sub, &SeOptions { budget })?;
    Ok(flop_count(&out.kernel).saturating_sub(base_flops(k)))
}

/// Bytes of the given temporaries at eight bytes per entry. A temporary
/// dimensioned by the element index violates the element-size constraint.
pub fn memory_footprint<T: Scalar>(k: &Kernel<T>, temps: &[(String, Vec<String>)], element: Option<&str>) -> Result<usize> {
    let mut bytes = 0usize;
    for (name, dims) in temps {
        if let Some(e) = element {
            if dims.iter().any(|d| d == e) {
                return Err(Error::Constraint(format!(
                    "element-size temporaries: `{name}` is dimensioned by the element index `{e}`"
                )));
            }
        }
        let mut n = 1usize;
        for d in dims {
            n = n.saturating_mul(k.extent(d)?);
        }
        bytes = bytes.saturating_add(n.saturating_mul(8));
    }
    Ok(bytes)
}

/// Temporaries the optimizer introduced: hoisted locals and generated tables.
pub fn introduced_temporaries<T: Scalar>(k: &Kernel<T>) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<(String, Vec<String>)> = k
        .locals
        .iter()
        .filter(|(_, l)| l.kind != LocalKind::Input)
        .map(|(n, l)| (n.clone(), l.dims.clone()))
        .collect();
    out.extend(k.tables.iter().filter(|(_, t)| t.provenance != Provenance::Input).map(|(n, t)| (n.clone(), t.dims.clone())));
    out
}

/// Bytes of the introduced array temporaries; scalars live in registers.
pub fn array_footprint<T: Scalar>(k: &Kernel<T>, element: Option<&str>) -> Result<usize> {
    let arrays: Vec<(String, Vec<String>)> = introduced_temporaries(k).into_iter().filter(|(_, d)| !d.is_empty()).collect();
    memory_footprint(k, &arrays, element)
}

/// Per-monomial figures of the cost model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonomialCost {
    pub id: usize,
    pub expr: String,
    pub k: usize,
    pub n: usize,
    pub iota: u64,
    pub rho: Option<usize>,
    pub theta_se: u64,
    pub theta_pre: PreCost,
}

/// Score of one split of the candidates between the two strategies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BipartitionCost {
    /// Candidates left to sharing elimination.
    pub b_s: Vec<usize>,
    /// Candidates pre-evaluated.
    pub b_p: Vec<usize>,
    pub theta_se: u64,
    pub theta_pre: u64,
    /// `theta_se + theta_pre`.
    pub cost: u64,
    pub memory: usize,
    pub feasible: bool,
    pub note: Option<String>,
}

/// Everything the plan selection looked at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub threshold: usize,
    pub base_flops: u64,
    pub monomials: Vec<MonomialCost>,
    /// Monomials routed to sharing elimination up front.
    pub s: Vec<usize>,
    /// Candidates for pre-evaluation.
    pub p: Vec<usize>,
    pub bipartitions: Vec<BipartitionCost>,
    pub chosen: Option<usize>,
}

impl CostReport {
    pub fn chosen(&self) -> Option<&BipartitionCost> {
        self.chosen.map(|i| &self.bipartitions[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multisets(n: usize, k: usize) -> u64 {
        fn go(n: usize, k: usize, lo: usize) -> u64 {
            if k == 0 {
                return 1;
            }
            (lo..n).map(|x| go(n, k - 1, x)).sum()
        }
        go(n, k, 0)
    }

    #[test]
    fn increase_factor_counts_multisets() {
        assert_eq!(increase_factor(3, 1), 3);
        assert_eq!(increase_factor(3, 2), 6);
        assert_eq!(increase_factor(5, 0), 1);
        for n in 1..=8 {
            for k in 0..=4 {
                assert_eq!(increase_factor(n, k), multisets(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn element_sized_temporary_is_refused() {
        let mut k = Kernel::<f64>::empty();
        k.indices.insert("e".into(), 4);
        k.indices.insert("j".into(), 6);
        let ok = memory_footprint(&k, &[("t".into(), vec!["j".into(), "j".into()])], Some("e")).unwrap();
        assert_eq!(ok, 288);
        let bad = memory_footprint(&k, &[("t".into(), vec!["e".into()])], Some("e"));
        assert!(matches!(bad, Err(Error::Constraint(_))));
    }
}

//! Reduction pre-evaluation.
//!
//! Each accumulation in the nest is split into monomials. A monomial whose
//! factors separate into element data and quadrature-point tables is
//! expanded and regrouped as `sum_r gamma_r * tau_r`; every `tau_r` is then
//! summed over the quadrature loop once, ahead of the element loop, into a
//! constant table. The element loop keeps a short nest reading those tables.

mod apply;
mod monomial;
mod separate;

pub use apply::{
    isolate_reduction_terms, plan_preevaluation, preevaluate, symbolic_reduce, PlannedTable, PreevalOutcome,
    PreevalPlan, PreevalSummary, PreevalTable,
};
pub use monomial::{split_monomials, Monomial, MonomialInfo};
pub(crate) use monomial::restrict;
pub use separate::{ReferenceTerm, Separation};

#[cfg(test)]
mod tests;

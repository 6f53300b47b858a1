use crate::error::{Error, Result};
use crate::ir::{Expr, Kernel, Symbol};
use crate::rewrite::expand::expanded_terms;
use crate::rewrite::{extract_common, reassociate};
use crate::scalar::Scalar;

use super::monomial::Scope;

/// One term `gamma * tau` of a separated monomial set.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTerm<T> {
    /// Element-level factor; `1` when the term needs no scaling.
    pub gamma: Expr<T>,
    /// Quadrature and basis factor, reduced into a table.
    pub tau: Expr<T>,
    /// Monomials contributing to the term.
    pub sources: Vec<usize>,
}

/// A monomial set rewritten as `sum_r gamma_r * tau_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Separation<T> {
    pub terms: Vec<ReferenceTerm<T>>,
}

impl<T: Scalar> Separation<T> {
    /// Number of terms amenable to pre-evaluation.
    pub fn rho(&self) -> usize {
        self.terms.len()
    }

    pub fn expr(&self) -> Expr<T> {
        Expr::add(
            self.terms
                .iter()
                .map(|t| if t.gamma.is_one() { t.tau.clone() } else { Expr::mul(vec![t.gamma.clone(), t.tau.clone()]) })
                .collect(),
        )
    }
}

struct RawTerm<T> {
    source: usize,
    coef: T,
    gamma: Vec<Expr<T>>,
    tau: Vec<Expr<T>>,
}

/// Tables, constants and literals only: computable before the element loop.
fn is_static<T: Scalar>(k: &Kernel<T>, e: &Expr<T>) -> bool {
    let mut ok = true;
    e.visit_syms(&mut |s| ok &= k.constants.contains_key(&s.name));
    ok
}

fn raw_terms<T: Scalar>(k: &Kernel<T>, scope: &Scope<T>, source: usize, e: &Expr<T>) -> Result<Vec<RawTerm<T>>> {
    let is_ref = |s: &Symbol| scope.is_reference(k, s);
    for s in e.symbols() {
        if !is_ref(&s) {
            continue;
        }
        let static_table = k.tables.get(&s.name).is_some_and(|t| {
            scope.enclosing.iter().all(|c| !t.dims.contains(&c.index) && !s.has_var(&c.index))
        });
        if !static_table {
            return Err(Error::NonSeparable(format!(
                "`{s}` varies with the quadrature point but is not a reference table"
            )));
        }
    }
    let terms = expanded_terms(e, &is_ref).map_err(|err| match err {
        Error::NonDistributable(s) => Error::NonSeparable(format!("`{s}` occurs under a division or a call")),
        other => other,
    })?;
    let mut out = Vec::new();
    for factors in terms {
        let mut t = RawTerm { source, coef: T::one(), gamma: Vec::new(), tau: Vec::new() };
        for f in factors {
            match f {
                Expr::Const(c) => t.coef = t.coef * c,
                Expr::Sym(ref s) if is_ref(s) => t.tau.push(f),
                f if is_static(k, &f) => t.tau.push(f),
                f => t.gamma.push(f),
            }
        }
        t.tau.sort_by(|a, b| a.canonical_cmp(b));
        t.gamma.sort_by(|a, b| a.canonical_cmp(b));
        out.push(t);
    }
    Ok(out)
}

/// Splits a sum into a constant factor and the rest when it is one term.
fn split_const<T: Scalar>(e: Expr<T>) -> (T, Expr<T>) {
    match e {
        Expr::Const(c) => (c, Expr::one()),
        Expr::Mul(fs) => {
            let mut c = T::one();
            let mut rest = Vec::new();
            for f in fs {
                match f {
                    Expr::Const(x) => c = c * x,
                    other => rest.push(other),
                }
            }
            (c, Expr::mul(rest))
        }
        other => (T::one(), other),
    }
}

/// Groups expanded terms first by reference factor, then by element factor.
fn group<T: Scalar>(raw: Vec<RawTerm<T>>) -> Vec<ReferenceTerm<T>> {
    let mut by_tau: Vec<(String, Expr<T>, Vec<Expr<T>>, Vec<usize>)> = Vec::new();
    for t in raw {
        let tau = Expr::mul(t.tau);
        let key = tau.key();
        let g = reassociate(&Expr::mul([vec![Expr::Const(t.coef)], t.gamma].concat()));
        match by_tau.iter_mut().find(|(k, ..)| *k == key) {
            Some((_, _, gs, src)) => {
                gs.push(g);
                if !src.contains(&t.source) {
                    src.push(t.source);
                }
            }
            None => by_tau.push((key, tau, vec![g], vec![t.source])),
        }
    }
    let mut out: Vec<(String, ReferenceTerm<T>)> = Vec::new();
    for (_, tau, gs, sources) in by_tau {
        let gamma = reassociate(&Expr::add(gs));
        if gamma.is_zero() {
            continue;
        }
        let (c, gamma) = split_const(gamma);
        let tau = if c.is_one() { tau } else { reassociate(&Expr::mul(vec![Expr::Const(c), tau])) };
        let key = gamma.key();
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, t)) => {
                t.tau = reassociate(&Expr::add(vec![t.tau.clone(), tau]));
                for s in sources {
                    if !t.sources.contains(&s) {
                        t.sources.push(s);
                    }
                }
            }
            None => out.push((key, ReferenceTerm { gamma, tau, sources })),
        }
    }
    out.into_iter()
        .map(|(_, mut t)| {
            t.sources.sort();
            let common = extract_common(&t.gamma);
            if crate::ir::flops::expr_ops(&common, &Default::default())
                < crate::ir::flops::expr_ops(&t.gamma, &Default::default())
            {
                t.gamma = common;
            }
            t
        })
        .collect()
}

/// Separates the given `(id, expression)` summands of one accumulation.
pub(crate) fn separate<T: Scalar>(k: &Kernel<T>, scope: &Scope<T>, parts: &[(usize, &Expr<T>)]) -> Result<Separation<T>> {
    let mut raw = Vec::new();
    for (id, e) in parts {
        raw.extend(raw_terms(k, scope, *id, e)?);
    }
    Ok(Separation { terms: group(raw) })
}

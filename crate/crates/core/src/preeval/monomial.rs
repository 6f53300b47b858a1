use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ir::{Expr, Kernel, LoopCtx, Node, Op, Symbol, ValidatedKernel};
use crate::rewrite::reassociate;
use crate::scalar::Scalar;

/// One summand of an accumulation in the multilinear nest.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial<T> {
    pub id: usize,
    /// Position of the owning statement among the nest accumulations.
    pub statement: usize,
    pub lhs: Symbol,
    /// The summand as written.
    pub expr: Expr<T>,
    /// The summand with quadrature-level scalars replaced by their definitions.
    pub resolved: Expr<T>,
    /// Factors mixing element data with quadrature-point basis values.
    pub coefficients: Vec<Expr<T>>,
    /// Distinct basis values the coefficients expand over.
    pub basis: Vec<Symbol>,
    pub k: usize,
    pub n: usize,
}

/// Serializable summary of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonomialInfo {
    pub id: usize,
    pub statement: usize,
    pub lhs: String,
    pub expr: String,
    pub k: usize,
    pub n: usize,
}

impl<T: Scalar> Monomial<T> {
    pub fn info(&self) -> MonomialInfo {
        MonomialInfo {
            id: self.id,
            statement: self.statement,
            lhs: self.lhs.to_string(),
            expr: self.expr.to_string(),
            k: self.k,
            n: self.n,
        }
    }
}

/// Where the reduction lives and what the monomials may refer to.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Scope<T> {
    /// Loop positions from the kernel body to the body holding the reduction loop.
    pub parent: Vec<usize>,
    pub pos: usize,
    pub enclosing: Vec<LoopCtx>,
    pub reduction: LoopCtx,
    pub linear: Vec<LoopCtx>,
    /// Scalars assigned in the reduction loop outside the multilinear nest.
    pub defs: Vec<(String, Expr<T>)>,
    pub local_deps: BTreeMap<String, BTreeSet<String>>,
}

impl<T: Scalar> Scope<T> {
    pub fn new(k: &ValidatedKernel<T>) -> Result<Self> {
        let red = k.roles.reduction.clone().ok_or_else(|| Error::NotFemNest("no reduction loop to pre-evaluate".into()))?;
        let mut body = &k.body;
        let mut parent = Vec::new();
        let mut enclosing = Vec::new();
        loop {
            let (pos, l) = body
                .iter()
                .enumerate()
                .find_map(|(p, n)| match n {
                    Node::Loop(l) => Some((p, l)),
                    _ => None,
                })
                .ok_or_else(|| Error::NotFemNest(format!("reduction loop `{red}` not found")))?;
            if l.index == red {
                let mut defs = Vec::new();
                let mut inner = &l.body;
                let mut linear = Vec::new();
                for n in inner {
                    if let Node::Stmt(s) = n {
                        if s.op == Op::Assign && s.lhs.subs.is_empty() {
                            defs.push((s.lhs.name.clone(), s.rhs.clone()));
                        }
                    }
                }
                while let Some(m) = inner.iter().find_map(|n| match n {
                    Node::Loop(m) => Some(m),
                    _ => None,
                }) {
                    linear.push(LoopCtx::of(m));
                    inner = &m.body;
                }
                return Ok(Scope {
                    parent,
                    pos,
                    enclosing,
                    reduction: LoopCtx::of(l),
                    linear,
                    defs,
                    local_deps: k.local_deps(),
                });
            }
            parent.push(pos);
            enclosing.push(LoopCtx::of(l));
            body = &l.body;
        }
    }

    pub fn linear_names(&self) -> Vec<String> {
        self.linear.iter().map(|c| c.index.clone()).collect()
    }

    /// Whether the symbol varies with the quadrature point or the nest.
    pub fn is_reference(&self, kernel: &Kernel<T>, s: &Symbol) -> bool {
        let deps = kernel.deps(&Expr::Sym(s.clone()), &self.local_deps);
        deps.contains(&self.reduction.index) || self.linear.iter().any(|c| deps.contains(&c.index))
    }

    /// Replaces quadrature-level scalars by their definitions.
    pub fn resolve(&self, e: &Expr<T>) -> Expr<T> {
        let mut out = e.clone();
        for (name, rhs) in self.defs.iter().rev() {
            out = out.substitute(&|s: &Symbol| (s.subs.is_empty() && &s.name == name).then(|| rhs.clone()));
        }
        out
    }

    pub fn outer_trips(&self) -> u64 {
        self.enclosing.iter().map(|c| c.trips() as u64).product()
    }

    pub fn inner_trips(&self) -> u64 {
        self.linear.iter().map(|c| c.trips() as u64).product()
    }
}

/// Calls `f` on each accumulation into an output, in document order.
pub(crate) fn for_each_accumulation<T: Scalar>(k: &Kernel<T>, mut f: impl FnMut(&crate::ir::Statement<T>)) {
    k.visit_statements(&mut |_, s| {
        if s.op == Op::AugAdd && k.outputs.contains_key(&s.lhs.name) {
            f(s)
        }
    });
}

fn check_summand<T: Scalar>(e: &Expr<T>, k: &Kernel<T>, scope: &Scope<T>) -> Result<()> {
    let lin = scope.linear_names();
    let mut bad = None;
    fn walk<T: Scalar>(e: &Expr<T>, f: &mut impl FnMut(&Expr<T>) -> bool) {
        if f(e) {
            for c in e.children() {
                walk(c, f);
            }
        }
    }
    walk(e, &mut |n| match n {
        Expr::Div(..) | Expr::Call(..) => {
            let d = k.deps(n, &scope.local_deps);
            if bad.is_none() && lin.iter().any(|l| d.contains(l)) {
                bad = Some(n.to_string());
            }
            false
        }
        _ => true,
    });
    match bad {
        Some(b) => Err(Error::NotNormalForm(format!("`{b}` divides or calls through a multilinear index"))),
        None => Ok(()),
    }
}

/// Splits every nest accumulation into its top-level summands.
pub fn split_monomials<T: Scalar>(k: &ValidatedKernel<T>) -> Result<Vec<Monomial<T>>> {
    let scope = Scope::new(k)?;
    let mut stmts = Vec::new();
    for_each_accumulation(k, |s| stmts.push(s.clone()));
    if stmts.is_empty() {
        return Err(Error::NotNormalForm("the nest accumulates nothing".into()));
    }
    let mut out = Vec::new();
    for (si, s) in stmts.iter().enumerate() {
        for term in s.rhs.summands() {
            check_summand(&term, k, &scope)?;
            let resolved = scope.resolve(&term);
            let (coefficients, basis) = coefficients_of(k, &scope, &resolved);
            out.push(Monomial {
                id: out.len(),
                statement: si,
                lhs: s.lhs.clone(),
                expr: term,
                k: coefficients.len(),
                n: basis.len().max(1),
                resolved,
                coefficients,
                basis,
            });
        }
    }
    Ok(out)
}

/// Factors that are sums over basis values weighted by element data.
fn coefficients_of<T: Scalar>(k: &Kernel<T>, scope: &Scope<T>, e: &Expr<T>) -> (Vec<Expr<T>>, Vec<Symbol>) {
    let lin = scope.linear_names();
    let mut coefs = Vec::new();
    let mut basis: Vec<Symbol> = Vec::new();
    for f in reassociate(e).factors() {
        if !matches!(f, Expr::Add(_)) {
            continue;
        }
        let d = k.deps(&f, &scope.local_deps);
        if lin.iter().any(|l| d.contains(l)) {
            continue;
        }
        let syms = f.symbols();
        let refs: Vec<&Symbol> = syms.iter().filter(|s| scope.is_reference(k, s)).collect();
        let geo = syms.iter().any(|s| !scope.is_reference(k, s) && !k.constants.contains_key(&s.name));
        if refs.is_empty() || !geo {
            continue;
        }
        for s in refs {
            if !basis.contains(s) {
                basis.push(s.clone());
            }
        }
        coefs.push(f);
    }
    (coefs, basis)
}

/// The kernel with only the monomials accepted by `keep`. A reduction loop
/// left without accumulations is removed together with its scalars; loops
/// enclosing it stay even when empty.
pub(crate) fn restrict<T: Scalar>(k: &Kernel<T>, reduction: &str, keep: &impl Fn(usize) -> bool) -> Kernel<T> {
    fn filter<T: Scalar>(
        k: &Kernel<T>,
        body: &[Node<T>],
        reduction: &str,
        inside: bool,
        next: &mut usize,
        keep: &impl Fn(usize) -> bool,
    ) -> Vec<Node<T>> {
        let mut out = Vec::new();
        for n in body {
            match n {
                Node::Stmt(s) if s.op == Op::AugAdd && k.outputs.contains_key(&s.lhs.name) => {
                    let terms = s.rhs.summands();
                    let kept: Vec<Expr<T>> = terms
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| keep(*next + i))
                        .map(|(_, t)| t.clone())
                        .collect();
                    *next += terms.len();
                    if kept.len() == terms.len() {
                        out.push(n.clone());
                    } else if !kept.is_empty() {
                        let mut s = s.clone();
                        s.rhs = Expr::add(kept);
                        out.push(Node::Stmt(s));
                    }
                }
                Node::Stmt(_) => out.push(n.clone()),
                Node::Loop(l) => {
                    let is_red = l.index == reduction;
                    let body = filter(k, &l.body, reduction, inside || is_red, next, keep);
                    let empty = (inside && body.is_empty()) || (is_red && !accumulates(k, &body));
                    if !empty {
                        let mut l = l.clone();
                        l.body = body;
                        out.push(Node::Loop(l));
                    }
                }
            }
        }
        out
    }
    let mut out = k.clone();
    out.body = filter(k, &k.body, reduction, false, &mut 0, keep);
    out
}

fn accumulates<T: Scalar>(k: &Kernel<T>, body: &[Node<T>]) -> bool {
    body.iter().any(|n| match n {
        Node::Stmt(s) => s.op == Op::AugAdd && k.outputs.contains_key(&s.lhs.name),
        Node::Loop(l) => accumulates(k, &l.body),
    })
}

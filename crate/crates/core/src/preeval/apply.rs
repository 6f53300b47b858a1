use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ir::eval::Evaluator;
use crate::ir::flops::{expr_ops, statement_ops, FlopModel};
use crate::ir::{Expr, Kernel, Local, LocalKind, Loop, LoopClass, LoopCtx, Node, Provenance, Statement, Symbol, Table, ValidatedKernel};
use crate::scalar::Scalar;

use super::monomial::{restrict, split_monomials, Monomial, Scope};
use super::separate::{separate, Separation};

/// Table produced by reducing over the quadrature loop.
#[derive(Clone, Debug, PartialEq)]
pub struct PreevalTable<T> {
    pub name: String,
    pub table: Table<T>,
    /// Monomials the table was built from.
    pub sources: Vec<usize>,
}

/// A table the plan will fill, before any values exist.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedTable<T> {
    pub name: String,
    pub tau: Expr<T>,
    pub dims: Vec<String>,
    pub sources: Vec<usize>,
}

/// The code pre-evaluation would emit for a set of monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct PreevalPlan<T> {
    pub chosen: Vec<usize>,
    pub separations: Vec<(Symbol, Separation<T>)>,
    pub tables: Vec<PlannedTable<T>>,
    /// Element-level scalars, in definition order.
    pub scalars: Vec<(String, Expr<T>)>,
    /// Accumulations of the replacement nest.
    pub statements: Vec<Statement<T>>,
    pub(crate) scope: Scope<T>,
}

impl<T: Scalar> PreevalPlan<T> {
    /// Operations executed by the replacement code.
    pub fn flops(&self) -> u64 {
        let m = FlopModel::default();
        let scalar: u64 = self.scalars.iter().map(|(_, e)| expr_ops(e, &m)).sum();
        let inner: u64 = self.statements.iter().map(|s| statement_ops(s, &m)).sum();
        self.scope.outer_trips() * (scalar + self.scope.inner_trips() * inner)
    }

    /// Bytes of the tables, eight per entry.
    pub fn memory_bytes(&self, kernel: &Kernel<T>) -> usize {
        self.tables.iter().map(|t| t.dims.iter().map(|d| kernel.indices[d]).product::<usize>() * 8).sum()
    }

    /// Reference terms per pre-evaluated monomial set.
    pub fn rho(&self) -> usize {
        self.separations.iter().map(|(_, s)| s.rho()).sum()
    }
}

/// Summary of an applied pre-evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreevalSummary {
    pub monomials: Vec<usize>,
    pub tables: Vec<String>,
    /// Duplicate tables mapped onto an identical earlier one.
    pub deduplicated: Vec<(String, String)>,
    pub scalars: Vec<String>,
    pub reduction_removed: bool,
    pub predicted_flops: u64,
}

#[derive(Clone, Debug)]
pub struct PreevalOutcome<T> {
    pub kernel: Kernel<T>,
    pub tables: Vec<PreevalTable<T>>,
    pub summary: PreevalSummary,
}

/// Rewrites `parts` as `sum gamma * tau`, see [`Separation`].
pub fn isolate_reduction_terms<T: Scalar>(k: &ValidatedKernel<T>, m: &Monomial<T>) -> Result<Separation<T>> {
    let scope = Scope::new(k)?;
    separate(k, &scope, &[(m.id, &m.resolved)])
}

/// Plans pre-evaluation of the monomials with the given ids.
pub fn plan_preevaluation<T: Scalar>(k: &ValidatedKernel<T>, chosen: &[usize]) -> Result<PreevalPlan<T>> {
    let scope = Scope::new(k)?;
    let monomials = split_monomials(k)?;
    let chosen: BTreeSet<usize> = chosen.iter().copied().collect();
    if let Some(&bad) = chosen.iter().find(|&&id| id >= monomials.len()) {
        return Err(Error::Invalid(format!("no monomial {bad}")));
    }
    let mut plan = PreevalPlan {
        chosen: chosen.iter().copied().collect(),
        separations: Vec::new(),
        tables: Vec::new(),
        scalars: Vec::new(),
        statements: Vec::new(),
        scope: scope.clone(),
    };
    let statements: BTreeSet<usize> = monomials.iter().filter(|m| chosen.contains(&m.id)).map(|m| m.statement).collect();
    let mut counter = 0usize;
    let mut gcounter = 0usize;
    let fresh = |prefix: &str, c: &mut usize, taken: &[String]| loop {
        let name = k.fresh_name(prefix, c);
        if !taken.contains(&name) {
            break name;
        }
    };
    let mut taken: Vec<String> = Vec::new();
    let lin = scope.linear_names();
    for si in statements {
        let parts: Vec<(usize, &Expr<T>)> =
            monomials.iter().filter(|m| m.statement == si && chosen.contains(&m.id)).map(|m| (m.id, &m.resolved)).collect();
        let sep = separate(k, &scope, &parts)?;
        let lhs = monomials.iter().find(|m| m.statement == si).expect("statement has monomials").lhs.clone();
        let mut terms = Vec::new();
        for t in &sep.terms {
            let vars = t.tau.vars();
            let dims: Vec<String> = lin.iter().filter(|d| vars.contains(*d)).cloned().collect();
            let name = fresh("pre", &mut counter, &taken);
            taken.push(name.clone());
            plan.tables.push(PlannedTable { name: name.clone(), tau: t.tau.clone(), dims: dims.clone(), sources: t.sources.clone() });
            let table = Expr::Sym(Symbol::indexed(name, &dims));
            let unit = t.gamma.is_one();
            let leaf = matches!(t.gamma, Expr::Sym(_));
            let term = if dims.is_empty() {
                if unit {
                    table
                } else {
                    scalar_ref(&mut plan.scalars, Expr::mul(vec![t.gamma.clone(), table]), &mut || {
                        let n = fresh("g", &mut gcounter, &taken);
                        taken.push(n.clone());
                        n
                    })
                }
            } else if unit {
                table
            } else if leaf {
                Expr::mul(vec![t.gamma.clone(), table])
            } else {
                let g = scalar_ref(&mut plan.scalars, t.gamma.clone(), &mut || {
                    let n = fresh("g", &mut gcounter, &taken);
                    taken.push(n.clone());
                    n
                });
                Expr::mul(vec![g, table])
            };
            terms.push(term);
        }
        plan.statements.push(Statement::aug_add(lhs.clone(), Expr::add(terms)));
        plan.separations.push((lhs, sep));
    }
    Ok(plan)
}

/// Reuses an element-level scalar holding `e` or defines a new one.
fn scalar_ref<T: Scalar>(scalars: &mut Vec<(String, Expr<T>)>, e: Expr<T>, name: &mut impl FnMut() -> String) -> Expr<T> {
    let key = e.key();
    if let Some((n, _)) = scalars.iter().find(|(_, d)| d.key() == key) {
        return Expr::Sym(Symbol::scalar(n.clone()));
    }
    let n = name();
    scalars.push((n.clone(), e));
    Expr::Sym(Symbol::scalar(n))
}

/// Sums `tau` over the reduction loop for every point of the linear loops it
/// depends on, in ascending order of the reduction index.
pub fn symbolic_reduce<T: Scalar>(
    kernel: &Kernel<T>,
    tau: &Expr<T>,
    reduction: &LoopCtx,
    linear: &[LoopCtx],
) -> Result<Table<T>> {
    let ev = Evaluator::new(kernel)?;
    let vars = tau.vars();
    let lin: Vec<&LoopCtx> = linear.iter().filter(|c| vars.contains(&c.index)).collect();
    let extents: Vec<usize> = lin.iter().map(|c| kernel.extent(&c.index)).collect::<Result<_>>()?;
    let size: usize = extents.iter().product();
    let mut values = vec![T::zero(); size];
    let mut point = vec![0usize; lin.len()];
    for (flat, slot) in values.iter_mut().enumerate() {
        let mut rem = flat;
        for d in (0..lin.len()).rev() {
            point[d] = rem % extents[d];
            rem /= extents[d];
        }
        if lin.iter().zip(&point).any(|(c, &p)| p < c.start || p >= c.end) {
            continue;
        }
        let mut env: Vec<(String, usize)> = lin.iter().zip(&point).map(|(c, &p)| (c.index.clone(), p)).collect();
        env.push((reduction.index.clone(), 0));
        let last = env.len() - 1;
        let mut acc = T::zero();
        for i in reduction.start..reduction.end {
            env[last].1 = i;
            acc = acc + ev.eval(tau, &env)?;
        }
        *slot = acc;
    }
    Ok(Table { dims: lin.iter().map(|c| c.index.clone()).collect(), values, provenance: Provenance::Preevaluated })
}

fn same_table<T: Scalar>(a: &Table<T>, b: &Table<T>) -> bool {
    a.dims == b.dims && a.values.len() == b.values.len() && a.values.iter().zip(&b.values).all(|(x, y)| x.bits_eq(y))
}

fn body_at<'a, T>(body: &'a mut Vec<Node<T>>, path: &[usize]) -> &'a mut Vec<Node<T>> {
    match path.split_first() {
        None => body,
        Some((&p, rest)) => match &mut body[p] {
            Node::Loop(l) => body_at(&mut l.body, rest),
            Node::Stmt(_) => unreachable!("path leads through a statement"),
        },
    }
}

/// Replaces the chosen monomials by reductions computed ahead of time.
pub fn preevaluate<T: Scalar>(k: &ValidatedKernel<T>, chosen: &[usize]) -> Result<PreevalOutcome<T>> {
    let plan = plan_preevaluation(k, chosen)?;
    let predicted_flops = plan.flops();
    let scope = &plan.scope;
    let mut tables: Vec<PreevalTable<T>> = Vec::new();
    let mut renames: Vec<(String, String)> = Vec::new();
    for t in &plan.tables {
        let table = symbolic_reduce(k, &t.tau, &scope.reduction, &scope.linear)?;
        match tables.iter_mut().find(|p| same_table(&p.table, &table)) {
            Some(p) => {
                renames.push((t.name.clone(), p.name.clone()));
                for s in &t.sources {
                    if !p.sources.contains(s) {
                        p.sources.push(*s);
                    }
                }
            }
            None => tables.push(PreevalTable { name: t.name.clone(), table, sources: t.sources.clone() }),
        }
    }
    let rename = |e: &Expr<T>| {
        e.substitute(&|s: &Symbol| {
            renames.iter().find(|(from, _)| *from == s.name).map(|(_, to)| Expr::Sym(Symbol { name: to.clone(), subs: s.subs.clone() }))
        })
    };

    let ids: BTreeSet<usize> = plan.chosen.iter().copied().collect();
    let mut out = restrict(k, &scope.reduction.index, &|id| !ids.contains(&id));
    if ids.is_empty() {
        return Ok(PreevalOutcome {
            kernel: out,
            tables,
            summary: PreevalSummary {
                monomials: Vec::new(),
                tables: Vec::new(),
                deduplicated: Vec::new(),
                scalars: Vec::new(),
                reduction_removed: false,
                predicted_flops,
            },
        });
    }
    let mut nodes: Vec<Node<T>> =
        plan.scalars.iter().map(|(n, e)| Node::Stmt(Statement::assign(Symbol::scalar(n.clone()), rename(e)))).collect();
    let mut nest: Vec<Node<T>> = plan
        .statements
        .iter()
        .map(|s| Node::Stmt(Statement { lhs: s.lhs.clone(), op: s.op, rhs: rename(&s.rhs) }))
        .collect();
    for c in scope.linear.iter().rev() {
        nest = vec![Node::Loop(Loop {
            index: c.index.clone(),
            class: LoopClass::Linear,
            declared: false,
            start: c.start,
            end: c.end,
            hoisted: false,
            body: nest,
        })];
    }
    nodes.extend(nest);
    let body = body_at(&mut out.body, &scope.parent);
    let kept = matches!(body.get(scope.pos), Some(Node::Loop(l)) if l.index == scope.reduction.index);
    let at = if kept { scope.pos + 1 } else { scope.pos };
    body.splice(at..at, nodes);
    for p in &tables {
        out.tables.insert(p.name.clone(), p.table.clone());
    }
    for (n, _) in &plan.scalars {
        out.locals.insert(n.clone(), Local { dims: Vec::new(), kind: LocalKind::Hoisted });
    }
    Ok(PreevalOutcome {
        kernel: out,
        summary: PreevalSummary {
            monomials: plan.chosen.clone(),
            tables: tables.iter().map(|t| t.name.clone()).collect(),
            deduplicated: renames,
            scalars: plan.scalars.iter().map(|(n, _)| n.clone()).collect(),
            reduction_removed: !kept,
            predicted_flops,
        },
        tables,
    })
}

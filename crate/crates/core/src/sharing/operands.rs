use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::ir::{Expr, Symbol, ValidatedKernel};
use crate::rewrite::reassociate;
use crate::scalar::Scalar;

/// Maximal subexpression depending on exactly one linear loop.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilinearOperand<T> {
    pub expr: Expr<T>,
    /// Symbols of the operand that depend on a linear loop.
    pub symbols: BTreeSet<Symbol>,
    pub home: String,
}

/// Operands connected through shared multilinear symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct OperandPartition<T> {
    pub members: Vec<MultilinearOperand<T>>,
    pub shared: BTreeSet<Symbol>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Hoist each operand into a temporary.
    CodeMotion,
    /// Expand and factorize the multilinear symbols.
    Factorization,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StrategyChoice {
    pub strategy: Strategy,
    pub operands: usize,
    pub symbols: usize,
}

/// Operands of the nest statements, grouped into partitions.
pub fn collect_operands<T: Scalar>(kernel: &ValidatedKernel<T>) -> Vec<OperandPartition<T>> {
    let ld = kernel.local_deps();
    let rhs: Vec<Expr<T>> = kernel.nest_statements().iter().map(|s| reassociate(&s.rhs)).collect();
    let deps = |e: &Expr<T>| kernel.deps(e, &ld);
    partition(operands_in(&rhs, &kernel.roles.linear, &deps))
}

/// Operands in depth-first order, each distinct expression once.
pub(crate) fn operands_in<T: Scalar>(
    rhs: &[Expr<T>],
    linear: &[String],
    deps: &impl Fn(&Expr<T>) -> BTreeSet<String>,
) -> Vec<MultilinearOperand<T>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let lin = |e: &Expr<T>| -> Vec<String> { deps(e).into_iter().filter(|d| linear.contains(d)).collect() };
    fn walk<T: Scalar>(
        e: &Expr<T>,
        lin: &impl Fn(&Expr<T>) -> Vec<String>,
        out: &mut Vec<MultilinearOperand<T>>,
        seen: &mut HashSet<String>,
    ) {
        let d = lin(e);
        match d.len() {
            0 => {}
            1 => {
                if seen.insert(e.key()) {
                    let symbols =
                        e.symbols().into_iter().filter(|s| !lin(&Expr::Sym(s.clone())).is_empty()).collect();
                    out.push(MultilinearOperand { expr: e.clone(), symbols, home: d[0].clone() });
                }
            }
            _ => {
                for c in e.children() {
                    walk(c, lin, out, seen);
                }
            }
        }
    }
    for e in rhs {
        walk(e, &lin, &mut out, &mut seen);
    }
    out
}

/// Union of operands sharing any multilinear symbol.
pub(crate) fn partition<T: Scalar>(ops: Vec<MultilinearOperand<T>>) -> Vec<OperandPartition<T>> {
    let n = ops.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for a in 0..n {
        for b in a + 1..n {
            if !ops[a].symbols.is_disjoint(&ops[b].symbols) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut out: Vec<(usize, OperandPartition<T>)> = Vec::new();
    for (i, op) in ops.into_iter().enumerate() {
        let r = find(&mut parent, i);
        match out.iter_mut().find(|(root, _)| *root == r) {
            Some((_, p)) => {
                p.shared.extend(op.symbols.iter().cloned());
                p.members.push(op);
            }
            None => out.push((r, OperandPartition { shared: op.symbols.clone(), members: vec![op] })),
        }
    }
    out.into_iter().map(|(_, p)| p).collect()
}

/// Code motion when it needs no more products than factorization would.
pub fn strategy_select<T>(p: &OperandPartition<T>) -> StrategyChoice {
    let (operands, symbols) = (p.members.len(), p.shared.len());
    let strategy = if operands <= symbols { Strategy::CodeMotion } else { Strategy::Factorization };
    StrategyChoice { strategy, operands, symbols }
}

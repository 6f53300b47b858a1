//! Loop-nest kernels: indices, loops, statements and tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{Expr, Symbol};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Named iteration variable with its extent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Index {
    pub name: String,
    pub extent: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopClass {
    OrderFree,
    Reduction,
    Linear,
    Plain,
}

impl fmt::Display for LoopClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LoopClass::OrderFree => "order-free",
            LoopClass::Reduction => "reduction",
            LoopClass::Linear => "linear",
            LoopClass::Plain => "plain",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "=")]
    Assign,
    #[serde(rename = "+=")]
    AugAdd,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Assign => "=",
            Op::AugAdd => "+=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statement<T> {
    pub lhs: Symbol,
    pub op: Op,
    pub rhs: Expr<T>,
}

impl<T: Scalar> Statement<T> {
    pub fn assign(lhs: Symbol, rhs: Expr<T>) -> Self {
        Statement { lhs, op: Op::Assign, rhs }
    }

    pub fn aug_add(lhs: Symbol, rhs: Expr<T>) -> Self {
        Statement { lhs, op: Op::AugAdd, rhs }
    }
}

/// A loop over `[start, end)` of an index.
///
/// `hoisted` marks loops created to compute hoisted temporaries; passes that
/// look for multilinear nests skip them.
#[derive(Clone, Debug, PartialEq)]
pub struct Loop<T> {
    pub index: String,
    pub class: LoopClass,
    pub declared: bool,
    pub start: usize,
    pub end: usize,
    pub hoisted: bool,
    pub body: Vec<Node<T>>,
}

impl<T> Loop<T> {
    pub fn trips(&self) -> usize {
        self.end.saturating_sub(self.start)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node<T> {
    Loop(Loop<T>),
    Stmt(Statement<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Input,
    Hoisted,
    Preevaluated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    pub dims: Vec<String>,
    pub values: Vec<T>,
    pub provenance: Provenance,
}

/// Kind of a kernel-local variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalKind {
    /// Declared by the input kernel.
    Input,
    /// Introduced by code motion or sharing elimination.
    Hoisted,
    /// Loop-local scalar shared by several temporaries of one loop.
    Shared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Local {
    pub dims: Vec<String>,
    pub kind: LocalKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    pub indices: BTreeMap<String, usize>,
    pub tables: BTreeMap<String, Table<T>>,
    pub constants: BTreeMap<String, Expr<T>>,
    pub locals: BTreeMap<String, Local>,
    pub outputs: BTreeMap<String, Vec<String>>,
    pub body: Vec<Node<T>>,
}

/// Loop context seen from a statement: index and iteration range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopCtx {
    pub index: String,
    pub class: LoopClass,
    pub start: usize,
    pub end: usize,
    pub hoisted: bool,
}

impl LoopCtx {
    pub fn of<T>(l: &Loop<T>) -> Self {
        LoopCtx { index: l.index.clone(), class: l.class, start: l.start, end: l.end, hoisted: l.hoisted }
    }

    pub fn trips(&self) -> usize {
        self.end.saturating_sub(self.start)
    }
}

impl<T: Scalar> Kernel<T> {
    pub fn empty() -> Self {
        Kernel {
            indices: BTreeMap::new(),
            tables: BTreeMap::new(),
            constants: BTreeMap::new(),
            locals: BTreeMap::new(),
            outputs: BTreeMap::new(),
            body: Vec::new(),
        }
    }

    pub fn extent(&self, index: &str) -> Result<usize> {
        self.indices.get(index).copied().ok_or_else(|| Error::Invalid(format!("unknown index `{index}`")))
    }

    /// Dimensions of any array-like name: table, output or local.
    pub fn dims_of(&self, name: &str) -> Option<&[String]> {
        if let Some(t) = self.tables.get(name) {
            Some(&t.dims)
        } else if let Some(d) = self.outputs.get(name) {
            Some(d)
        } else {
            self.locals.get(name).map(|l| l.dims.as_slice())
        }
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.tables.contains_key(name)
            || self.constants.contains_key(name)
            || self.locals.contains_key(name)
            || self.outputs.contains_key(name)
            || self.indices.contains_key(name)
    }

    /// First name `prefix{n}` not used by anything in the kernel.
    pub fn fresh_name(&self, prefix: &str, counter: &mut usize) -> String {
        loop {
            let name = format!("{prefix}{}", *counter);
            *counter += 1;
            if !self.is_declared(&name) {
                return name;
            }
        }
    }

    /// Visits statements with their enclosing loop contexts.
    pub fn visit_statements(&self, f: &mut impl FnMut(&[LoopCtx], &Statement<T>)) {
        fn go<T>(body: &[Node<T>], stack: &mut Vec<LoopCtx>, f: &mut impl FnMut(&[LoopCtx], &Statement<T>)) {
            for n in body {
                match n {
                    Node::Stmt(s) => f(stack, s),
                    Node::Loop(l) => {
                        stack.push(LoopCtx::of(l));
                        go(&l.body, stack, f);
                        stack.pop();
                    }
                }
            }
        }
        go(&self.body, &mut Vec::new(), f);
    }

    /// All loops in pre-order.
    pub fn loops(&self) -> Vec<&Loop<T>> {
        fn go<'a, T>(body: &'a [Node<T>], out: &mut Vec<&'a Loop<T>>) {
            for n in body {
                if let Node::Loop(l) = n {
                    out.push(l);
                    go(&l.body, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.body, &mut out);
        out
    }

    /// Extra dependencies of locals: the loops enclosing their definitions.
    pub fn local_deps(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        self.visit_statements(&mut |stack, s| {
            if self.outputs.contains_key(&s.lhs.name) {
                return;
            }
            let e = out.entry(s.lhs.name.clone()).or_default();
            e.extend(stack.iter().map(|c| c.index.clone()));
            e.extend(s.lhs.vars().map(str::to_string));
        });
        out
    }

    /// Effective dependencies of an expression on loop indices.
    pub fn deps(&self, expr: &Expr<T>, local_deps: &BTreeMap<String, BTreeSet<String>>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        expr.visit_syms(&mut |s| {
            out.extend(s.vars().map(str::to_string));
            if let Some(extra) = local_deps.get(&s.name) {
                out.extend(extra.iter().cloned());
            }
        });
        out
    }
}

/// Effective dependencies of one symbol.
pub fn symbol_deps(s: &Symbol, local_deps: &BTreeMap<String, BTreeSet<String>>) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = s.vars().map(str::to_string).collect();
    if let Some(extra) = local_deps.get(&s.name) {
        out.extend(extra.iter().cloned());
    }
    out
}

impl<T: Scalar> fmt::Display for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go<T: Scalar>(body: &[Node<T>], depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let pad = "  ".repeat(depth);
            for n in body {
                match n {
                    Node::Stmt(s) => writeln!(f, "{pad}{} {} {}", s.lhs, s.op, s.rhs)?,
                    Node::Loop(l) => {
                        writeln!(f, "{pad}for {} in {}..{} ({}):", l.index, l.start, l.end, l.class)?;
                        go(&l.body, depth + 1, f)?;
                    }
                }
            }
            Ok(())
        }
        go(&self.body, 0, f)
    }
}

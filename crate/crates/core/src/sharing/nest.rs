use crate::ir::{Kernel, Loop, LoopClass, LoopCtx, Node, Op, Statement};
use crate::scalar::Scalar;

/// A multilinear nest located in the loop tree.
#[derive(Clone, Debug)]
pub(crate) struct Nest<T> {
    /// Positions leading to the body that holds the nest root.
    pub parent: Vec<usize>,
    pub pos: usize,
    pub enclosing: Vec<LoopCtx>,
    pub linear: Vec<LoopCtx>,
    pub stmts: Vec<Statement<T>>,
}

impl<T> Nest<T> {
    pub fn linear_names(&self) -> Vec<String> {
        self.linear.iter().map(|c| c.index.clone()).collect()
    }

    pub fn reduction(&self) -> Option<&LoopCtx> {
        self.enclosing.iter().rev().find(|c| c.class == LoopClass::Reduction && !c.hoisted)
    }
}

fn accumulations<T: Scalar>(k: &Kernel<T>, body: &[Node<T>]) -> Option<Vec<Statement<T>>> {
    let mut out = Vec::new();
    for n in body {
        match n {
            Node::Stmt(s) if s.op == Op::AugAdd && k.outputs.contains_key(&s.lhs.name) => out.push(s.clone()),
            _ => return None,
        }
    }
    (!out.is_empty()).then_some(out)
}

fn is_linear<T>(l: &Loop<T>) -> bool {
    l.class == LoopClass::Linear && !l.hoisted
}

/// The linear loops and innermost statements when `l` roots a nest. Scalar
/// definitions may precede the inner loop of a bilinear nest.
fn as_nest<T: Scalar>(k: &Kernel<T>, l: &Loop<T>) -> Option<(Vec<LoopCtx>, Vec<Statement<T>>)> {
    if !is_linear(l) {
        return None;
    }
    if let Some(stmts) = accumulations(k, &l.body) {
        return Some((vec![LoopCtx::of(l)], stmts));
    }
    let (last, lead) = l.body.split_last()?;
    let Node::Loop(m) = last else { return None };
    let lead_ok = lead.iter().all(|n| matches!(n, Node::Stmt(s) if s.op == Op::Assign && s.lhs.subs.is_empty()));
    if !lead_ok || !is_linear(m) {
        return None;
    }
    let stmts = accumulations(k, &m.body)?;
    Some((vec![LoopCtx::of(l), LoopCtx::of(m)], stmts))
}

/// Nests in document order, outside hoisted loops.
pub(crate) fn find_nests<T: Scalar>(k: &Kernel<T>) -> Vec<Nest<T>> {
    fn walk<T: Scalar>(
        k: &Kernel<T>,
        body: &[Node<T>],
        path: &mut Vec<usize>,
        encl: &mut Vec<LoopCtx>,
        out: &mut Vec<Nest<T>>,
    ) {
        for (pos, n) in body.iter().enumerate() {
            let Node::Loop(l) = n else { continue };
            if l.hoisted {
                continue;
            }
            if let Some((linear, stmts)) = as_nest(k, l) {
                out.push(Nest { parent: path.clone(), pos, enclosing: encl.clone(), linear, stmts });
                continue;
            }
            path.push(pos);
            encl.push(LoopCtx::of(l));
            walk(k, &l.body, path, encl, out);
            encl.pop();
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(k, &k.body, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// The body reached by following loop positions from the kernel body.
pub(crate) fn body_mut<'a, T>(body: &'a mut Vec<Node<T>>, path: &[usize]) -> &'a mut Vec<Node<T>> {
    match path.split_first() {
        None => body,
        Some((&p, rest)) => match &mut body[p] {
            Node::Loop(l) => body_mut(&mut l.body, rest),
            Node::Stmt(_) => panic!("path leads through a statement"),
        },
    }
}

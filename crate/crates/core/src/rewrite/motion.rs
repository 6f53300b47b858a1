//! Generalized loop-invariant code motion.
//!
//! A subexpression invariant in some enclosing loop is moved in front of the
//! outermost loop it can leave, into a temporary carrying the inner loop
//! indices it still depends on. Temporaries are computed in their own loops
//! (marked `hoisted`). Sums and products are searched for invariant operand
//! groups as well, so `det*W[i]*f(k)*g(j)` hoists `det*W[i]` and then the
//! `k`-dependent part.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::reassociate::reassociate;
use crate::ir::{Expr, Kernel, Local, LocalKind, Loop, LoopClass, LoopCtx, Node, Statement, Symbol};
use crate::scalar::Scalar;

/// A temporary introduced by hoisting.
#[derive(Clone, Debug, PartialEq)]
pub struct HoistedTemp<T> {
    pub name: String,
    /// Number of enclosing loops at the definition site.
    pub level: usize,
    pub expr: Expr<T>,
    pub dims: Vec<String>,
}

/// Loop seen while walking the tree.
#[derive(Clone, Debug)]
pub struct Frame {
    pub ctx: LoopCtx,
    pub id: usize,
    pub real: bool,
    pub path: Vec<usize>,
}

/// How a statement is treated by a motion pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Skip,
    /// Hoist every invariant subexpression.
    Full,
    /// Statement of a temporary's loop: hoist compound and element-level
    /// coefficient parts, keep table reads inline and share repeated inline
    /// products within the loop.
    Coefficient,
}

#[derive(Clone, Debug)]
struct Pending<T> {
    name: String,
    expr: Expr<T>,
    anchor: usize,
    dims: Vec<LoopCtx>,
}

#[derive(Clone, Debug)]
struct Placement {
    p: usize,
    dims: Vec<usize>,
    execs: u128,
}

/// Stateful hoisting engine shared by the rewrite passes.
pub struct Hoister<T> {
    extents: BTreeMap<String, usize>,
    local_deps: BTreeMap<String, BTreeSet<String>>,
    pending: Vec<Pending<T>>,
    memo: HashMap<String, String>,
    taken: BTreeSet<String>,
    counter: usize,
    prefix: String,
    next_id: usize,
    budget: Option<usize>,
    pub locals: BTreeMap<String, Local>,
    pub temps: Vec<HoistedTemp<T>>,
}

fn product(it: impl Iterator<Item = usize>) -> u128 {
    it.fold(1u128, |a, b| a * b as u128)
}

impl<T: Scalar> Hoister<T> {
    pub fn new(kernel: &Kernel<T>, prefix: &str) -> Self {
        let mut taken: BTreeSet<String> = BTreeSet::new();
        taken.extend(kernel.indices.keys().cloned());
        taken.extend(kernel.tables.keys().cloned());
        taken.extend(kernel.constants.keys().cloned());
        taken.extend(kernel.locals.keys().cloned());
        taken.extend(kernel.outputs.keys().cloned());
        Hoister {
            extents: kernel.indices.clone(),
            local_deps: kernel.local_deps(),
            pending: Vec::new(),
            memo: HashMap::new(),
            taken,
            counter: 0,
            prefix: prefix.to_string(),
            next_id: 0,
            budget: None,
            locals: BTreeMap::new(),
            temps: Vec::new(),
        }
    }

    /// Limits the bytes of array temporaries this hoister may create.
    pub fn with_budget(mut self, bytes: Option<usize>) -> Self {
        self.budget = bytes;
        self
    }

    pub fn with_counter(mut self, counter: usize) -> Self {
        self.counter = counter;
        self
    }

    pub fn counter(&self) -> usize {
        self.counter
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn fresh(&mut self) -> String {
        loop {
            let name = format!("{}{}", self.prefix, self.counter);
            self.counter += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    /// Reserves a name chosen elsewhere.
    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_string());
    }

    pub fn set_local_deps(&mut self, name: &str, deps: BTreeSet<String>) {
        self.local_deps.insert(name.to_string(), deps);
    }

    pub fn deps(&self, e: &Expr<T>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        e.visit_syms(&mut |s| {
            out.extend(s.vars().map(str::to_string));
            if let Some(extra) = self.local_deps.get(&s.name) {
                out.extend(extra.iter().cloned());
            }
        });
        out
    }

    fn frame(&mut self, l: &Loop<T>, path: Vec<usize>) -> Frame {
        self.next_id += 1;
        Frame { ctx: LoopCtx::of(l), id: self.next_id, real: true, path }
    }

    fn bytes(&self, dims: &[LoopCtx]) -> usize {
        dims.iter().map(|d| self.extents.get(&d.index).copied().unwrap_or(d.end)).product::<usize>() * 8
    }

    fn placement(&self, deps: &BTreeSet<String>, stack: &[Frame], max_p: usize) -> Option<Placement> {
        let n = stack.len();
        let current = product(stack.iter().map(|f| f.ctx.trips()));
        let mut best: Option<(Placement, (u128, bool, usize, usize))> = None;
        for p in 0..n.min(max_p.saturating_add(1)) {
            let dims: Vec<usize> = (p..n).filter(|&q| deps.contains(&stack[q].ctx.index)).collect();
            if dims.iter().any(|&q| stack[q].ctx.class == LoopClass::OrderFree) {
                continue;
            }
            let execs = product(stack[..p].iter().map(|f| f.ctx.trips())) * product(dims.iter().map(|&q| stack[q].ctx.trips()));
            if execs >= current {
                continue;
            }
            let ctxs: Vec<LoopCtx> = dims.iter().map(|&q| stack[q].ctx.clone()).collect();
            let mem = if dims.is_empty() { 0 } else { self.bytes(&ctxs) };
            if let Some(b) = self.budget {
                if mem > b {
                    continue;
                }
            }
            let f = &stack[p];
            let preheader = f.real
                && f.ctx.class == LoopClass::Linear
                && !f.ctx.hoisted
                && p > 0
                && (stack[p - 1].ctx.class != LoopClass::Linear || stack[p - 1].ctx.hoisted);
            let score = (execs, !preheader, mem, p);
            if best.as_ref().is_none_or(|(_, s)| score < *s) {
                best = Some((Placement { p, dims, execs }, score));
            }
        }
        best.map(|(pl, _)| pl)
    }

    /// Generic code motion over an expression evaluated under `stack`.
    pub fn rewrite(&mut self, e: &Expr<T>, stack: &[Frame], max_p: usize) -> Expr<T> {
        if matches!(e, Expr::Const(_) | Expr::Sym(_)) {
            return e.clone();
        }
        if let Some(pl) = self.placement(&self.deps(e), stack, max_p) {
            return self.hoist(e, stack, pl);
        }
        match e {
            Expr::Add(v) | Expr::Mul(v) => {
                let is_add = matches!(e, Expr::Add(_));
                let rebuilt = self.group(v, is_add, stack, max_p);
                if is_add {
                    Expr::add(rebuilt)
                } else {
                    Expr::mul(rebuilt)
                }
            }
            Expr::Div(a, b) => Expr::div(self.rewrite(a, stack, max_p), self.rewrite(b, stack, max_p)),
            Expr::Call(n, v) => Expr::Call(n.clone(), v.iter().map(|c| self.rewrite(c, stack, max_p)).collect()),
            _ => unreachable!(),
        }
    }

    fn group(&mut self, v: &[Expr<T>], is_add: bool, stack: &[Frame], max_p: usize) -> Vec<Expr<T>> {
        let current = product(stack.iter().map(|f| f.ctx.trips()));
        let mut scored: Vec<(u128, &Expr<T>)> = v
            .iter()
            .map(|c| (self.placement(&self.deps(c), stack, max_p).map_or(current, |p| p.execs), c))
            .collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.canonical_cmp(b.1)));
        let mut union = BTreeSet::new();
        let mut best: Option<(usize, Placement)> = None;
        for (r, (_, c)) in scored.iter().enumerate() {
            union.extend(self.deps(c));
            if r + 1 >= 2 && r + 1 < scored.len() {
                match self.placement(&union, stack, max_p) {
                    Some(pl) => best = Some((r + 1, pl)),
                    None => break,
                }
            }
        }
        match best {
            Some((r, pl)) => {
                let members: Vec<Expr<T>> = scored[..r].iter().map(|(_, c)| (*c).clone()).collect();
                let node = reassociate(&if is_add { Expr::Add(members) } else { Expr::Mul(members) });
                let mut out = vec![self.hoist(&node, stack, pl)];
                for (_, c) in &scored[r..] {
                    out.push(self.rewrite(c, stack, max_p));
                }
                out
            }
            None => v.iter().map(|c| self.rewrite(c, stack, max_p)).collect(),
        }
    }

    fn hoist(&mut self, e: &Expr<T>, stack: &[Frame], pl: Placement) -> Expr<T> {
        let anchor = stack[pl.p].id;
        let dims: Vec<LoopCtx> = pl.dims.iter().map(|&q| stack[q].ctx.clone()).collect();
        let dim_names: Vec<String> = dims.iter().map(|d| d.index.clone()).collect();
        let key = format!("{anchor}|{}|{}", dim_names.join(","), e.key());
        if let Some(name) = self.memo.get(&key) {
            return Expr::Sym(Symbol::indexed(name, &dim_names));
        }
        let name = self.fresh();
        if !dims.is_empty() {
            let mem = self.bytes(&dims);
            if let Some(b) = self.budget.as_mut() {
                *b -= mem;
            }
        }
        let mut def_stack: Vec<Frame> = stack[..pl.p].to_vec();
        for d in &dims {
            def_stack.push(Frame { ctx: d.clone(), id: anchor, real: false, path: Vec::new() });
        }
        let def = self.rewrite(e, &def_stack, pl.p);
        let mut deps: BTreeSet<String> = stack[..pl.p].iter().map(|f| f.ctx.index.clone()).collect();
        deps.extend(dim_names.iter().cloned());
        self.local_deps.insert(name.clone(), deps);
        self.memo.insert(key, name.clone());
        self.locals.insert(name.clone(), Local { dims: dim_names.clone(), kind: LocalKind::Hoisted });
        self.temps.push(HoistedTemp { name: name.clone(), level: pl.p, expr: def.clone(), dims: dim_names.clone() });
        self.pending.push(Pending { name: name.clone(), expr: def, anchor, dims });
        Expr::Sym(Symbol::indexed(&name, &dim_names))
    }

    /// Hoists `e` as a whole when that saves executions, else rewrites it.
    pub fn hoist_whole(&mut self, e: &Expr<T>, stack: &[Frame], max_p: usize) -> Expr<T> {
        if matches!(e, Expr::Const(_) | Expr::Sym(_)) {
            return e.clone();
        }
        match self.placement(&self.deps(e), stack, max_p) {
            Some(pl) => self.hoist(e, stack, pl),
            None => self.rewrite(e, stack, max_p),
        }
    }

    /// Definitions anchored in front of loop `id`, as tree nodes.
    fn take(&mut self, id: usize) -> Vec<Node<T>> {
        let (mine, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending).into_iter().partition(|d| d.anchor == id);
        self.pending = rest;
        materialize(mine)
    }

    /// Rebuilds `body`, applying `mode` to each statement.
    pub fn process(
        &mut self,
        body: Vec<Node<T>>,
        stack: &mut Vec<Frame>,
        path: &mut Vec<usize>,
        mode: &impl Fn(&[Frame], &Statement<T>) -> Mode,
    ) -> Vec<Node<T>> {
        let mut out = Vec::new();
        let coefficient_loop = stack.last().is_some_and(|f| f.ctx.hoisted);
        let mut coefficient_stmts = Vec::new();
        for (pos, node) in body.into_iter().enumerate() {
            path.push(pos);
            match node {
                Node::Stmt(mut s) => match mode(stack, &s) {
                    Mode::Skip => out.push(Node::Stmt(s)),
                    Mode::Full => {
                        s.rhs = self.rewrite(&reassociate(&s.rhs), stack, usize::MAX);
                        out.push(Node::Stmt(s));
                    }
                    Mode::Coefficient => {
                        s.rhs = self.coefficient(&reassociate(&s.rhs), stack);
                        if coefficient_loop {
                            coefficient_stmts.push(out.len());
                        }
                        out.push(Node::Stmt(s));
                    }
                },
                Node::Loop(mut l) => {
                    let f = self.frame(&l, path.clone());
                    let id = f.id;
                    stack.push(f);
                    l.body = self.process(std::mem::take(&mut l.body), stack, path, mode);
                    stack.pop();
                    out.extend(self.take(id));
                    out.push(Node::Loop(l));
                }
            }
            path.pop();
        }
        if coefficient_stmts.len() >= 2 {
            out = self.share_inline(out, stack);
        }
        out
    }

    fn coefficient(&mut self, e: &Expr<T>, stack: &[Frame]) -> Expr<T> {
        let Some(inner) = stack.last() else { return e.clone() };
        let idx = inner.ctx.index.clone();
        let outer: BTreeSet<String> =
            stack.iter().filter(|f| f.ctx.class == LoopClass::OrderFree).map(|f| f.ctx.index.clone()).collect();
        let terms: Vec<Expr<T>> = e
            .summands()
            .iter()
            .map(|t| {
                let mut keep = Vec::new();
                let mut invariant = Vec::new();
                let mut element = Vec::new();
                let mut compound = false;
                for f in t.factors() {
                    let d = self.deps(&f);
                    if d.contains(&idx) {
                        keep.push(f);
                        continue;
                    }
                    compound |= !matches!(f, Expr::Sym(_) | Expr::Const(_));
                    if matches!(f, Expr::Sym(_)) && d.is_subset(&outer) {
                        element.push(f.clone());
                    }
                    invariant.push(f);
                }
                if compound {
                    let g = reassociate(&Expr::mul(invariant));
                    keep.push(self.hoist_whole(&g, stack, usize::MAX));
                } else if element.len() >= 2 {
                    invariant.retain(|f| !element.contains(f));
                    keep.extend(invariant);
                    let g = reassociate(&Expr::mul(element));
                    keep.push(self.hoist_whole(&g, stack, usize::MAX));
                } else {
                    keep.extend(invariant);
                }
                reassociate(&Expr::mul(keep))
            })
            .collect();
        Expr::add(terms)
    }

    /// Shares products of loop-invariant table reads repeated across the
    /// statements of one temporary loop through a loop-local scalar.
    fn share_inline(&mut self, body: Vec<Node<T>>, stack: &[Frame]) -> Vec<Node<T>> {
        let idx = stack.last().map(|f| f.ctx.index.clone()).unwrap_or_default();
        let invariant_part = |h: &Self, t: &Expr<T>| -> Vec<Expr<T>> {
            t.factors().into_iter().filter(|f| matches!(f, Expr::Sym(_)) && !h.deps(f).contains(&idx)).collect()
        };
        let mut counts: BTreeMap<String, (usize, Vec<Expr<T>>)> = BTreeMap::new();
        for n in &body {
            if let Node::Stmt(s) = n {
                for t in s.rhs.summands() {
                    let part = invariant_part(self, &t);
                    if part.len() >= 2 {
                        let key = reassociate(&Expr::mul(part.clone())).key();
                        counts.entry(key).or_insert((0, part)).0 += 1;
                    }
                }
            }
        }
        let shared: Vec<(String, Vec<Expr<T>>)> =
            counts.into_iter().filter(|(_, (c, _))| *c >= 2).map(|(k, (_, p))| (k, p)).collect();
        if shared.is_empty() {
            return body;
        }
        let mut defs = Vec::new();
        let mut names: BTreeMap<String, String> = BTreeMap::new();
        for (key, part) in &shared {
            let name = self.fresh();
            let mut deps: BTreeSet<String> = stack.iter().map(|f| f.ctx.index.clone()).collect();
            deps.extend(self.deps(&Expr::mul(part.clone())));
            self.local_deps.insert(name.clone(), deps);
            self.locals.insert(name.clone(), Local { dims: Vec::new(), kind: LocalKind::Shared });
            defs.push(Node::Stmt(Statement::assign(Symbol::scalar(name.clone()), reassociate(&Expr::mul(part.clone())))));
            names.insert(key.clone(), name);
        }
        let mut out = defs;
        for n in body {
            match n {
                Node::Stmt(mut s) => {
                    let terms: Vec<Expr<T>> = s
                        .rhs
                        .summands()
                        .into_iter()
                        .map(|t| {
                            let part = invariant_part(self, &t);
                            let key = reassociate(&Expr::mul(part.clone())).key();
                            match names.get(&key) {
                                Some(name) if part.len() >= 2 => {
                                    let mut fs = t.factors();
                                    for p in &part {
                                        let pos = fs.iter().position(|f| f == p).expect("factor present");
                                        fs.remove(pos);
                                    }
                                    fs.push(Expr::Sym(Symbol::scalar(name.clone())));
                                    reassociate(&Expr::mul(fs))
                                }
                                _ => t,
                            }
                        })
                        .collect();
                    s.rhs = Expr::add(terms);
                    out.push(Node::Stmt(s));
                }
                other => out.push(other),
            }
        }
        out
    }

    /// Moves the created temporaries into the kernel declarations.
    pub fn finish(self, kernel: &mut Kernel<T>) -> Vec<HoistedTemp<T>> {
        kernel.locals.extend(self.locals);
        self.temps
    }
}

fn same_dims(a: &[LoopCtx], b: &[LoopCtx]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.index == y.index && x.start == y.start && x.end == y.end)
}

fn materialize<T: Scalar>(defs: Vec<Pending<T>>) -> Vec<Node<T>> {
    struct Block<T> {
        dims: Vec<LoopCtx>,
        defs: Vec<Pending<T>>,
    }
    let mut blocks: Vec<Block<T>> = Vec::new();
    for d in defs {
        match blocks.iter_mut().find(|b| !b.dims.is_empty() && same_dims(&b.dims, &d.dims)) {
            Some(b) => b.defs.push(d),
            None => blocks.push(Block { dims: d.dims.clone(), defs: vec![d] }),
        }
    }
    let mut order = Vec::new();
    let mut done = vec![false; blocks.len()];
    let defined: Vec<BTreeSet<String>> = blocks.iter().map(|b| b.defs.iter().map(|d| d.name.clone()).collect()).collect();
    while order.len() < blocks.len() {
        let ready = (0..blocks.len()).find(|&i| {
            !done[i]
                && (0..blocks.len()).all(|j| {
                    j == i || done[j] || !blocks[i].defs.iter().any(|d| defined[j].iter().any(|n| d.expr.mentions(n)))
                })
        });
        let i = ready.unwrap_or_else(|| (0..blocks.len()).find(|&i| !done[i]).unwrap());
        done[i] = true;
        order.push(i);
    }
    let mut slots: Vec<Option<Block<T>>> = blocks.into_iter().map(Some).collect();
    let mut out = Vec::new();
    for i in order {
        let b = slots[i].take().unwrap();
        let names: Vec<String> = b.dims.iter().map(|d| d.index.clone()).collect();
        let mut inner: Vec<Node<T>> = b
            .defs
            .into_iter()
            .map(|d| Node::Stmt(Statement::assign(Symbol::indexed(d.name, &names), d.expr)))
            .collect();
        for d in b.dims.iter().rev() {
            inner = vec![Node::Loop(Loop {
                index: d.index.clone(),
                class: LoopClass::Linear,
                declared: false,
                start: d.start,
                end: d.end,
                hoisted: true,
                body: inner,
            })];
        }
        out.extend(inner);
    }
    out
}

/// Hoists every loop-invariant subexpression of the kernel.
pub fn code_motion<T: Scalar>(kernel: &Kernel<T>) -> Kernel<T> {
    code_motion_with(kernel, &|stack: &[Frame], _: &Statement<T>| {
        if stack.iter().any(|f| f.ctx.hoisted) {
            Mode::Skip
        } else {
            Mode::Full
        }
    })
}

pub fn code_motion_with<T: Scalar>(kernel: &Kernel<T>, mode: &impl Fn(&[Frame], &Statement<T>) -> Mode) -> Kernel<T> {
    let mut h = Hoister::new(kernel, "t");
    let mut out = kernel.clone();
    out.body = h.process(kernel.body.clone(), &mut Vec::new(), &mut Vec::new(), mode);
    h.finish(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{evaluate, flop_count, parse_kernel};
    use serde_json::json;

    fn fig2() -> Kernel<f64> {
        let doc = json!({
            "indices": {"i": 3, "j": 4},
            "loops": [{"index": "i"}, {"index": "j"}],
            "tables": {
                "b": {"dims": ["j"], "values": [1.0, 2.0, 3.0, 4.0]},
                "c": {"dims": ["i"], "values": [0.5, -1.0, 2.0]},
                "d": {"dims": ["i"], "values": [1.5, 0.25, -3.0]}
            },
            "statements": [{"level": 2, "lhs": "A[i][j]", "op": "+=", "rhs": ["*", "b[j]", ["+", "c[i]", "d[i]"]]}],
            "outputs": {"A": ["i", "j"]}
        });
        parse_kernel(&doc.to_string()).unwrap()
    }

    #[test]
    fn hoists_sum_above_inner_loop() {
        let k = fig2();
        let m = code_motion(&k);
        assert_eq!(evaluate(&k).unwrap(), evaluate(&m).unwrap());
        let Node::Loop(i) = &m.body[0] else { panic!() };
        assert_eq!(i.index, "i");
        assert!(matches!(&i.body[0], Node::Stmt(s) if s.lhs.to_string() == "t0" && s.rhs.key() == "(+ c[i] d[i])"));
        let Node::Loop(j) = &i.body[1] else { panic!() };
        let Node::Stmt(s) = &j.body[0] else { panic!() };
        assert_eq!(s.rhs.key(), "(* b[j] t0)");
        assert_eq!(flop_count(&m), 3 + 3 * 4 * 2);
    }

    #[test]
    fn nothing_invariant_means_unchanged() {
        let doc = json!({
            "indices": {"j": 3},
            "loops": [{"index": "j"}],
            "tables": {"b": {"dims": ["j"], "values": [1.0, 2.0, 3.0]}, "c": {"dims": ["j"], "values": [1.0, 2.0, 3.0]}},
            "statements": [{"level": 1, "lhs": "V[j]", "op": "+=", "rhs": ["*", "b[j]", "c[j]"]}],
            "outputs": {"V": ["j"]}
        });
        let k: Kernel<f64> = parse_kernel(&doc.to_string()).unwrap();
        assert_eq!(code_motion(&k), k);
    }

    #[test]
    fn test_side_operand_becomes_preheader_array() {
        let doc = json!({
            "indices": {"i": 2, "j": 3, "k": 3},
            "loops": [{"index": "i"}, {"index": "j"}, {"index": "k"}],
            "tables": {
                "a": {"dims": ["i", "j"], "values": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]},
                "b": {"dims": ["i", "j"], "values": [6.0, 5.0, 4.0, 3.0, 2.0, 1.0]},
                "v": {"dims": ["k"], "values": [1.0, -1.0, 0.5]}
            },
            "constants": {"z0": 0.5, "z2": 2.0},
            "statements": [{"level": 3, "lhs": "Y[j][k]", "op": "+=",
                "rhs": ["*", "v[k]", ["+", ["*", "z0", "a[i][j]"], ["*", "z2", "b[i][j]"]]]}],
            "outputs": {"Y": ["j", "k"]}
        });
        let k: Kernel<f64> = parse_kernel(&doc.to_string()).unwrap();
        let m = code_motion(&k);
        let Node::Loop(i) = &m.body[0] else { panic!() };
        let Node::Loop(tj) = &i.body[0] else { panic!() };
        assert!(tj.hoisted);
        assert_eq!(tj.index, "j");
        assert_eq!(m.locals["t0"].dims, vec!["j".to_string()]);
        let a = evaluate(&k).unwrap();
        let b = evaluate(&m).unwrap();
        assert!(crate::ir::eval::relative_error(&a, &b) < 1e-14);
        assert!(flop_count(&m) < flop_count(&k));
    }

    #[test]
    fn element_loop_never_dimensions_a_temporary() {
        let doc = json!({
            "indices": {"e": 3, "i": 2, "j": 2},
            "loops": [{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}],
            "tables": {
                "W": {"dims": ["i"], "values": [1.0, 2.0]},
                "B": {"dims": ["i", "j"], "values": [1.0, 2.0, 3.0, 4.0]},
                "g": {"dims": ["e"], "values": [1.0, 2.0, 3.0]}
            },
            "statements": [{"level": 3, "lhs": "V[e][j]", "op": "+=", "rhs": ["*", "g[e]", "W[i]", "B[i][j]"]}],
            "outputs": {"V": ["e", "j"]}
        });
        let k: Kernel<f64> = parse_kernel(&doc.to_string()).unwrap();
        let m = code_motion(&k);
        for l in m.locals.values() {
            assert!(!l.dims.contains(&"e".to_string()));
        }
        assert_eq!(evaluate(&k).unwrap(), evaluate(&m).unwrap());
    }
}

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::graph::{merge_vertices, MergeDecision, SharingGraph, Vertex};
use super::ilp::{solve_ilp, IlpSolution};
use super::nest::{body_mut, find_nests, Nest};
use super::operands::{operands_in, partition, strategy_select, OperandPartition, Strategy, StrategyChoice};
use crate::error::{Error, Result};
use crate::ir::kernel::symbol_deps;
use crate::ir::{
    flop_count, Expr, Kernel, Local, LocalKind, Loop, LoopClass, Node, Op, Statement, Symbol, ValidatedKernel,
};
use crate::rewrite::factorize::symbols_where;
use crate::rewrite::motion::{code_motion_with, Frame, Hoister, Mode};
use crate::rewrite::{expand_with, factorize_syms, reassociate};
use crate::scalar::Scalar;

/// Tuning of a sharing elimination run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeOptions {
    /// Bytes available to array temporaries; scalars are not counted.
    pub budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageFlops {
    pub stage: String,
    pub flops: u64,
}

impl StageFlops {
    fn new(stage: impl Into<String>, flops: u64) -> Self {
        StageFlops { stage: stage.into(), flops }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionTrace {
    pub operands: Vec<String>,
    pub symbols: Vec<String>,
    pub choice: StrategyChoice,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlipTrace {
    pub partition: usize,
    pub flops_factorized: Option<u64>,
    pub flops_hoisted: Option<u64>,
    pub kept: Strategy,
}

/// Decisions taken on one nest.
#[derive(Clone, Debug, Default, Serialize)]
pub struct NestTrace {
    pub linear: Vec<String>,
    pub partitions: Vec<PartitionTrace>,
    pub flips: Vec<FlipTrace>,
    pub graph: SharingGraph,
    pub merged: SharingGraph,
    pub merges: Vec<MergeDecision>,
    pub ilp: Option<IlpSolution>,
    pub selected: Vec<String>,
    pub stages: Vec<StageFlops>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SeTrace {
    pub nests: Vec<NestTrace>,
}

#[derive(Clone, Debug)]
pub struct SeOutcome<T> {
    pub kernel: Kernel<T>,
    pub trace: SeTrace,
    /// Flop count of the whole kernel after each step.
    pub stages: Vec<StageFlops>,
}

#[derive(Clone, Debug)]
struct Temp<T> {
    name: String,
    home: String,
    def: Expr<T>,
}

#[derive(Clone, Debug)]
struct Step1<T> {
    temps: Vec<Temp<T>>,
    rhs: Vec<Expr<T>>,
    counter: usize,
}

#[derive(Clone, Debug)]
struct Term<T> {
    atoms: Vec<Symbol>,
    coef: Expr<T>,
}

struct Analysis<'k, T> {
    kernel: &'k Kernel<T>,
    nest: Nest<T>,
    rhs: Vec<Expr<T>>,
    partitions: Vec<OperandPartition<T>>,
    ld: BTreeMap<String, BTreeSet<String>>,
    opts: &'k SeOptions,
}

fn norm(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl<'k, T: Scalar> Analysis<'k, T> {
    fn new(kernel: &'k Kernel<T>, nest: Nest<T>, opts: &'k SeOptions) -> Self {
        let ld = kernel.local_deps();
        let rhs: Vec<Expr<T>> = nest.stmts.iter().map(|s| reassociate(&s.rhs)).collect();
        let deps = |e: &Expr<T>| kernel.deps(e, &ld);
        let partitions = partition(operands_in(&rhs, &nest.linear_names(), &deps));
        Analysis { kernel, nest, rhs, partitions, ld, opts }
    }

    fn homes(&self, s: &Symbol, temps: &[Temp<T>]) -> Vec<String> {
        if let Some(t) = temps.iter().find(|t| t.name == s.name) {
            return vec![t.home.clone()];
        }
        let d = symbol_deps(s, &self.ld);
        self.nest.linear_names().into_iter().filter(|l| d.contains(l)).collect()
    }

    /// Hoists the operands of code-motion partitions into temporaries.
    fn step1(&self, strategies: &[Strategy]) -> Step1<T> {
        let mut h = Hoister::new(self.kernel, "t");
        let mut temps = Vec::new();
        let mut subst: HashMap<String, Symbol> = HashMap::new();
        if self.nest.linear.len() == 2 {
            for (p, s) in self.partitions.iter().zip(strategies) {
                if *s != Strategy::CodeMotion {
                    continue;
                }
                for m in &p.members {
                    if matches!(m.expr, Expr::Sym(_)) {
                        continue;
                    }
                    let name = h.fresh();
                    subst.insert(m.expr.key(), Symbol::indexed(&name, &[&m.home]));
                    temps.push(Temp { name, home: m.home.clone(), def: m.expr.clone() });
                }
            }
        }
        let rhs = self
            .rhs
            .iter()
            .map(|e| reassociate(&e.rewrite(&mut |n| subst.get(&n.key()).map(|s| Expr::Sym(s.clone())))))
            .collect();
        Step1 { temps, rhs, counter: h.counter() }
    }

    /// Statements expanded over multilinear symbols and temporaries.
    fn terms(&self, s1: &Step1<T>) -> Result<Vec<Vec<Term<T>>>> {
        let is_atom = |s: &Symbol| !self.homes(s, &s1.temps).is_empty();
        let mut out = Vec::new();
        for rhs in &s1.rhs {
            let x = expand_with(rhs, &is_atom)?;
            let terms = x
                .summands()
                .into_iter()
                .map(|t| {
                    let (atoms, rest): (Vec<_>, Vec<_>) =
                        t.factors().into_iter().partition(|f| matches!(f, Expr::Sym(s) if is_atom(s)));
                    let atoms = atoms.into_iter().filter_map(|a| a.as_sym().cloned()).collect();
                    Term { atoms, coef: reassociate(&Expr::mul(rest)) }
                })
                .collect();
            out.push(terms);
        }
        Ok(out)
    }

    fn edge_of(&self, t: &Term<T>, s1: &Step1<T>) -> Option<(Symbol, Symbol)> {
        if t.atoms.len() != 2 {
            return None;
        }
        let (ha, hb) = (self.homes(&t.atoms[0], &s1.temps), self.homes(&t.atoms[1], &s1.temps));
        (ha.len() == 1 && hb.len() == 1 && ha != hb).then(|| (t.atoms[0].clone(), t.atoms[1].clone()))
    }

    fn graph(&self, s1: &Step1<T>, terms: &[Vec<Term<T>>]) -> SharingGraph {
        let mut inst: BTreeSet<(Symbol, usize)> = BTreeSet::new();
        for (st, ts) in terms.iter().enumerate() {
            for t in ts {
                for a in &t.atoms {
                    inst.insert((a.clone(), st));
                }
            }
        }
        let order: Vec<(Symbol, usize)> = inst.into_iter().collect();
        let pos = |s: &Symbol, st: usize| order.iter().position(|(x, y)| x == s && *y == st).expect("instance");
        let mut edges = BTreeSet::new();
        for (st, ts) in terms.iter().enumerate() {
            for t in ts {
                if let Some((a, b)) = self.edge_of(t, s1) {
                    edges.insert(norm(pos(&a, st), pos(&b, st)));
                }
            }
        }
        SharingGraph {
            vertices: order.iter().map(|(s, st)| Vertex { symbol: s.to_string(), instances: vec![*st] }).collect(),
            edges: edges.into_iter().collect(),
        }
    }

    /// Builds the transformed kernel: temporaries, new statements, code
    /// motion.
    fn finish(&self, s1: &Step1<T>, full: Option<(&[Vec<Term<T>>], &SharingGraph)>) -> (Kernel<T>, Option<IlpSolution>) {
        let nest = &self.nest;
        let lin = nest.linear_names();
        let mut h = Hoister::new(self.kernel, "t").with_counter(s1.counter);
        for t in &s1.temps {
            h.reserve(&t.name);
        }
        let mut temps: Vec<Option<Temp<T>>> = s1.temps.iter().cloned().map(Some).collect();
        let step1_idx: HashMap<String, usize> = s1.temps.iter().enumerate().map(|(i, t)| (t.name.clone(), i)).collect();
        let (mut new_rhs, ilp) = match full {
            None => (s1.rhs.clone(), None),
            Some((terms, g)) => {
                let ilp = solve_ilp(g);
                let mut uses: HashMap<String, usize> = HashMap::new();
                for t in terms.iter().flatten() {
                    for a in &t.atoms {
                        *uses.entry(a.name.clone()).or_default() += 1;
                    }
                }
                let single_use = |name: &str| step1_idx.contains_key(name) && uses.get(name) == Some(&1);
                let mut rhs_out = Vec::new();
                for (st, ts) in terms.iter().enumerate() {
                    let mut claims: BTreeMap<usize, (Symbol, Vec<(Symbol, Expr<T>)>)> = BTreeMap::new();
                    let mut rest = Vec::new();
                    for t in ts {
                        let edge = self.edge_of(t, s1).and_then(|(a, b)| {
                            let va = g.vertex_of(&a.to_string(), st)?;
                            let vb = g.vertex_of(&b.to_string(), st)?;
                            g.edges.contains(&norm(va, vb)).then_some((a, b, va, vb))
                        });
                        match edge {
                            Some((a, b, va, vb)) => {
                                let (c, o, vc) = if ilp.y(va, vb) { (a, b, va) } else { (b, a, vb) };
                                claims.entry(vc).or_insert_with(|| (c, Vec::new())).1.push((o, t.coef.clone()));
                            }
                            None => {
                                let mut f: Vec<Expr<T>> = t.atoms.iter().cloned().map(Expr::Sym).collect();
                                f.push(t.coef.clone());
                                rest.push(Expr::mul(f));
                            }
                        }
                    }
                    let mut out_terms = Vec::new();
                    for (_, (c, list)) in claims {
                        let home = self.homes(&list[0].0, &s1.temps)[0].clone();
                        let reuse = list.len() == 1 && single_use(&list[0].0.name);
                        let csym = if reuse {
                            let (o, coef) = &list[0];
                            let t = temps[step1_idx[&o.name]].as_mut().expect("temporary kept");
                            t.def = reassociate(&Expr::mul(vec![coef.clone(), t.def.clone()]));
                            o.clone()
                        } else {
                            let mut parts = Vec::new();
                            for (o, coef) in list {
                                let inner = if single_use(&o.name) {
                                    temps[step1_idx[&o.name]].take().expect("temporary kept").def
                                } else {
                                    Expr::Sym(o)
                                };
                                parts.push(Expr::mul(vec![coef, inner]));
                            }
                            let name = h.fresh();
                            let def = reassociate(&Expr::add(parts));
                            temps.push(Some(Temp { name: name.clone(), home: home.clone(), def }));
                            Symbol::indexed(name, &[home])
                        };
                        out_terms.push(Expr::mul(vec![Expr::Sym(c), Expr::Sym(csym)]));
                    }
                    out_terms.extend(rest);
                    rhs_out.push(reassociate(&Expr::add(out_terms)));
                }
                (rhs_out, Some(ilp))
            }
        };
        let temps: Vec<Temp<T>> = temps.into_iter().flatten().collect();
        let extent = |i: &str| self.kernel.indices.get(i).copied().unwrap_or(0);
        let bytes: usize = temps.iter().map(|t| extent(&t.home) * 8).sum();
        let tight = self.opts.budget.is_some_and(|b| bytes > b);
        let (arrays, scalars, inlined): (Vec<Temp<T>>, Vec<Temp<T>>, Vec<Temp<T>>) = if tight {
            let (outer, inner): (Vec<_>, Vec<_>) = temps.into_iter().partition(|t| lin.len() == 2 && t.home == lin[0]);
            (Vec::new(), outer, inner)
        } else {
            (temps, Vec::new(), Vec::new())
        };
        let array_bytes: usize = arrays.iter().map(|t| extent(&t.home) * 8).sum();
        let mut h = h.with_budget(self.opts.budget.map(|b| b.saturating_sub(array_bytes)));

        let inline_all = |e: &Expr<T>| -> Expr<T> {
            let mut cur = e.clone();
            for _ in 0..=inlined.len() {
                cur = cur.substitute(&|s| inlined.iter().find(|t| t.name == s.name).map(|t| t.def.clone()));
            }
            cur = cur.substitute(&|s| {
                scalars.iter().find(|t| t.name == s.name).map(|t| Expr::Sym(Symbol::scalar(t.name.clone())))
            });
            reassociate(&cur)
        };
        if tight {
            new_rhs = new_rhs.iter().map(&inline_all).collect();
        }
        let scalar_defs: Vec<(String, Expr<T>)> = scalars.iter().map(|t| (t.name.clone(), inline_all(&t.def))).collect();

        let mut k = self.kernel.clone();
        let encl: BTreeSet<String> = nest.enclosing.iter().map(|c| c.index.clone()).collect();
        for t in &arrays {
            k.locals.insert(t.name.clone(), Local { dims: vec![t.home.clone()], kind: LocalKind::Hoisted });
            let mut d = encl.clone();
            d.insert(t.home.clone());
            h.set_local_deps(&t.name, d);
        }
        for (name, _) in &scalar_defs {
            k.locals.insert(name.clone(), Local { dims: Vec::new(), kind: LocalKind::Hoisted });
            let mut d = encl.clone();
            d.insert(lin[0].clone());
            h.set_local_deps(name, d);
        }
        let parent = body_mut(&mut k.body, &nest.parent);
        {
            let Node::Loop(root) = &mut parent[nest.pos] else { unreachable!("nest root is a loop") };
            let inner: &mut Vec<Node<T>> = if lin.len() == 2 {
                match root.body.last_mut() {
                    Some(Node::Loop(m)) => &mut m.body,
                    _ => unreachable!("bilinear nest has an inner loop"),
                }
            } else {
                &mut root.body
            };
            for (node, (stmt, rhs)) in inner.iter_mut().zip(nest.stmts.iter().zip(new_rhs)) {
                *node = Node::Stmt(Statement { lhs: stmt.lhs.clone(), op: stmt.op, rhs });
            }
            for (n, (name, def)) in scalar_defs.iter().enumerate() {
                root.body.insert(n, Node::Stmt(Statement::assign(Symbol::scalar(name.clone()), def.clone())));
            }
        }
        let mut loops = Vec::new();
        for ctx in &nest.linear {
            let defs: Vec<Node<T>> = arrays
                .iter()
                .filter(|t| t.home == ctx.index)
                .map(|t| Node::Stmt(Statement::assign(Symbol::indexed(t.name.clone(), &[&t.home]), t.def.clone())))
                .collect();
            if !defs.is_empty() {
                loops.push(Node::Loop(Loop {
                    index: ctx.index.clone(),
                    class: LoopClass::Linear,
                    declared: false,
                    start: ctx.start,
                    end: ctx.end,
                    hoisted: true,
                    body: defs,
                }));
            }
        }
        let n_loops = loops.len();
        parent.splice(nest.pos..nest.pos, loops);
        let mut root_path = nest.parent.clone();
        root_path.push(nest.pos + n_loops);
        let names: BTreeSet<String> =
            arrays.iter().map(|t| t.name.clone()).chain(scalar_defs.iter().map(|(n, _)| n.clone())).collect();
        let mode = |stack: &[Frame], s: &Statement<T>| {
            if names.contains(&s.lhs.name) {
                Mode::Coefficient
            } else if stack.iter().any(|f| f.path == root_path) {
                Mode::Full
            } else {
                Mode::Skip
            }
        };
        let body = std::mem::take(&mut k.body);
        k.body = h.process(body, &mut Vec::new(), &mut Vec::new(), &mode);
        h.finish(&mut k);
        (k, ilp)
    }

    fn synthesize(&self, s1: &Step1<T>, terms: &[Vec<Term<T>>]) -> (SharingGraph, SharingGraph, Vec<MergeDecision>, Kernel<T>, IlpSolution) {
        let graph = self.graph(s1, terms);
        let (merged, merges) = merge_vertices(&graph, |g| flop_count(&self.finish(s1, Some((terms, g))).0));
        let (k, ilp) = self.finish(s1, Some((terms, &merged)));
        (graph, merged, merges, k, ilp.expect("full synthesis solves the model"))
    }

    fn full_flops(&self, strategies: &[Strategy]) -> Option<u64> {
        let s1 = self.step1(strategies);
        let terms = self.terms(&s1).ok()?;
        Some(flop_count(&self.synthesize(&s1, &terms).3))
    }
}

fn rhs_of<T: Scalar>(k: &Kernel<T>, name: &str) -> Option<Expr<T>> {
    let mut out = None;
    k.visit_statements(&mut |_, s| {
        if s.lhs.name == name && s.op == Op::Assign {
            out = Some(s.rhs.clone());
        }
    });
    out
}

fn with_rhs<T: Scalar>(k: &Kernel<T>, name: &str, rhs: &Expr<T>) -> Kernel<T> {
    fn go<T: Scalar>(body: &mut [Node<T>], name: &str, rhs: &Expr<T>) {
        for n in body {
            match n {
                Node::Stmt(s) if s.lhs.name == name && s.op == Op::Assign => s.rhs = rhs.clone(),
                Node::Loop(l) => go(&mut l.body, name, rhs),
                _ => {}
            }
        }
    }
    let mut k = k.clone();
    go(&mut k.body, name, rhs);
    k
}

/// Reduction-level scalars: keep code motion or factorize one symbol class,
/// whichever is cheaper.
fn reschedule<T: Scalar>(k: Kernel<T>, nest: &Nest<T>, before: &Kernel<T>, notes: &mut Vec<String>) -> Kernel<T> {
    let Some(red) = nest.reduction().map(|c| c.index.clone()) else { return k };
    let mut cands = Vec::new();
    k.visit_statements(&mut |stack, s| {
        let at_red = stack.last().is_some_and(|c| c.index == red && !c.hoisted);
        let fresh = !before.locals.contains_key(&s.lhs.name)
            && k.locals.get(&s.lhs.name).is_some_and(|l| l.kind == LocalKind::Hoisted && l.dims.is_empty());
        if at_red && s.op == Op::Assign && fresh {
            cands.push(s.lhs.name.clone());
        }
    });
    let mut best = k;
    let mut fb = flop_count(&best);
    for name in cands {
        let Some(rhs) = rhs_of(&best, &name) else { continue };
        let ld = best.local_deps();
        let mut classes: Vec<String> = Vec::new();
        for s in rhs.symbols() {
            if symbol_deps(&s, &ld).contains(&red) && !classes.contains(&s.name) {
                classes.push(s.name.clone());
            }
        }
        for class in classes {
            let pred = |s: &Symbol| s.name == class;
            let Ok(x) = expand_with(&rhs, &pred) else { continue };
            let v = factorize_syms(&x, &symbols_where(&x, pred));
            let target = name.clone();
            let kv = code_motion_with(&with_rhs(&best, &name, &v), &|_: &[Frame], s: &Statement<T>| {
                if s.lhs.name == target {
                    Mode::Full
                } else {
                    Mode::Skip
                }
            });
            let fv = flop_count(&kv);
            if fv < fb {
                notes.push(format!("`{name}` factorized over `{class}`: {fb} -> {fv} flops"));
                best = kv;
                fb = fv;
            }
        }
    }
    best
}

fn process_nest<T: Scalar>(kernel: &Kernel<T>, nest: Nest<T>, opts: &SeOptions) -> (Kernel<T>, NestTrace) {
    let an = Analysis::new(kernel, nest, opts);
    let choices: Vec<StrategyChoice> = an.partitions.iter().map(strategy_select).collect();
    let mut tr = NestTrace {
        linear: an.nest.linear_names(),
        partitions: an
            .partitions
            .iter()
            .zip(&choices)
            .map(|(p, c)| PartitionTrace {
                operands: p.members.iter().map(|m| m.expr.to_string()).collect(),
                symbols: p.shared.iter().map(|s| s.to_string()).collect(),
                choice: *c,
            })
            .collect(),
        ..Default::default()
    };
    let f0 = flop_count(kernel);
    tr.stages.push(StageFlops::new("input", f0));
    let mut strategies: Vec<Strategy> = choices.iter().map(|c| c.strategy).collect();

    let s1 = an.step1(&strategies);
    let (mut best, _) = an.finish(&s1, None);
    let mut f1 = flop_count(&best);
    if f1 > f0 {
        tr.notes.push(format!("operand hoisting would raise flops {f0} -> {f1}; kept input"));
        best = kernel.clone();
        f1 = f0;
    }
    tr.stages.push(StageFlops::new("step1", f1));

    for p in 0..strategies.len() {
        if strategies[p] != Strategy::Factorization {
            continue;
        }
        let factorized = an.full_flops(&strategies);
        let mut alt = strategies.clone();
        alt[p] = Strategy::CodeMotion;
        let hoisted = an.full_flops(&alt);
        let kept = if hoisted.unwrap_or(u64::MAX) <= factorized.unwrap_or(u64::MAX) {
            strategies = alt;
            Strategy::CodeMotion
        } else {
            Strategy::Factorization
        };
        tr.flips.push(FlipTrace { partition: p, flops_factorized: factorized, flops_hoisted: hoisted, kept });
    }
    tr.stages.push(StageFlops::new("step2", f1));

    let s1 = an.step1(&strategies);
    match an.terms(&s1) {
        Ok(terms) => {
            let (graph, merged, merges, k5, ilp) = an.synthesize(&s1, &terms);
            tr.selected = ilp.selected().iter().map(|&v| merged.vertices[v].symbol.clone()).collect();
            tr.graph = graph;
            tr.merged = merged;
            tr.merges = merges;
            tr.ilp = Some(ilp);
            tr.stages.push(StageFlops::new("step3", f1));
            tr.stages.push(StageFlops::new("step4", f1));
            let f5 = flop_count(&k5);
            if f5 <= f1 {
                best = k5;
            } else {
                tr.notes.push(format!("factorized form costs {f5} > {f1} flops; kept code motion form"));
            }
        }
        Err(e) => {
            tr.notes.push(format!("expansion skipped: {e}"));
            tr.stages.push(StageFlops::new("step3", f1));
            tr.stages.push(StageFlops::new("step4", f1));
        }
    }
    tr.stages.push(StageFlops::new("step5", flop_count(&best)));

    let best = reschedule(best, &an.nest, kernel, &mut tr.notes);
    tr.stages.push(StageFlops::new("step6", flop_count(&best)));
    (best, tr)
}

/// Runs sharing elimination on every multilinear nest of the kernel.
pub fn eliminate<T: Scalar>(kernel: &Kernel<T>, opts: &SeOptions) -> Result<SeOutcome<T>> {
    let n = find_nests(kernel).len();
    if n == 0 {
        return Err(Error::NotFemNest("no multilinear loop nest found".into()));
    }
    let mut k = kernel.clone();
    let mut trace = SeTrace::default();
    let mut stages = vec![StageFlops::new("input", flop_count(kernel))];
    for idx in 0..n {
        let nest = find_nests(&k).into_iter().nth(idx).expect("nests are preserved");
        let (next, nt) = process_nest(&k, nest, opts);
        for s in nt.stages.iter().skip(1) {
            let stage = if n == 1 { s.stage.clone() } else { format!("nest{idx}.{}", s.stage) };
            stages.push(StageFlops::new(stage, s.flops));
        }
        k = next;
        trace.nests.push(nt);
    }
    Ok(SeOutcome { kernel: k, trace, stages })
}

/// Sharing elimination with default options.
pub fn sharing_elimination<T: Scalar>(kernel: &ValidatedKernel<T>) -> Result<Kernel<T>> {
    Ok(eliminate(kernel.kernel(), &SeOptions::default())?.kernel)
}

/// Sharing graph of the first nest, after operand hoisting.
pub fn build_sharing_graph<T: Scalar>(kernel: &ValidatedKernel<T>) -> Result<SharingGraph> {
    let out = eliminate(kernel.kernel(), &SeOptions::default())?;
    Ok(out.trace.nests.into_iter().next().map(|n| n.graph).unwrap_or_default())
}

//! JSON kernel documents.
//!
//! Two equivalent layouts are accepted. The spine layout lists `loops`
//! outermost first and `statements` tagged with their loop depth; a loop opens
//! at the first statement deeper than the current depth and closes at the
//! first shallower one. The tree layout gives an explicit `body`, which is
//! also what the optimizer writes back (it may contain several loops per
//! level, split ranges and hoisted temporaries).
//!
//! Right-hand sides use prefix arrays: `["+", a, b]`, `["*", a, b]`,
//! `["/", a, b]`, `["-", a]`, `["-", a, b]`, or `["sqrt", a]` for calls.
//! Strings are symbols such as `"B[i][0]"`; numbers are literals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::expr::{is_ident, Expr, Subscript, Symbol};
use super::kernel::{Kernel, Local, LocalKind, Loop, LoopClass, Node, Op, Provenance, Statement, Table};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelDoc {
    indices: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loops: Option<Vec<LoopDoc>>,
    #[serde(default)]
    tables: BTreeMap<String, TableDoc>,
    #[serde(default)]
    constants: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    locals: Option<BTreeMap<String, LocalDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    statements: Option<Vec<StmtDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<Vec<NodeDoc>>,
    outputs: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopDoc {
    index: String,
    #[serde(default)]
    class: Option<LoopClass>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    dims: Vec<String>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalDoc {
    dims: Vec<String>,
    kind: LocalKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StmtDoc {
    level: usize,
    lhs: String,
    op: Op,
    rhs: Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum NodeDoc {
    Loop(LoopNodeDoc),
    Stmt(StmtNodeDoc),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopNodeDoc {
    index: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<LoopClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end: Option<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    declared: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    hoisted: bool,
    body: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StmtNodeDoc {
    lhs: String,
    op: Op,
    rhs: Value,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Parses a prefix-notation expression.
pub fn parse_expr<T: Scalar>(v: &Value) -> Result<Expr<T>> {
    match v {
        Value::Number(n) => {
            let f = n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}")))?;
            Ok(Expr::Const(T::lit(f)))
        }
        Value::String(s) => Ok(Expr::Sym(Symbol::parse(s)?)),
        Value::Array(items) => {
            let (head, rest) = items.split_first().ok_or_else(|| Error::Parse("empty expression array".into()))?;
            let op = head.as_str().ok_or_else(|| Error::Parse(format!("operator must be a string, got {head}")))?;
            let args = rest.iter().map(parse_expr).collect::<Result<Vec<Expr<T>>>>()?;
            if args.is_empty() {
                return Err(Error::Parse(format!("operator `{op}` without operands")));
            }
            let neg = |e: Expr<T>| Expr::Mul(vec![Expr::num(-1.0), e]);
            match op {
                "+" => Ok(Expr::add(args)),
                "*" => Ok(Expr::mul(args)),
                "/" => match <[Expr<T>; 2]>::try_from(args) {
                    Ok([a, b]) => Ok(Expr::div(a, b)),
                    Err(_) => Err(Error::Parse("`/` takes two operands".into())),
                },
                "-" => {
                    let mut it = args.into_iter();
                    let first = it.next().unwrap();
                    let rest: Vec<_> = it.map(neg).collect();
                    if rest.is_empty() {
                        Ok(neg(first))
                    } else {
                        Ok(Expr::add(std::iter::once(first).chain(rest).collect()))
                    }
                }
                name if is_ident(name) => Ok(Expr::Call(name.to_string(), args)),
                other => Err(Error::Parse(format!("unknown operator `{other}`"))),
            }
        }
        other => Err(Error::Parse(format!("unexpected expression {other}"))),
    }
}

/// Serializes an expression to prefix notation.
pub fn expr_to_json<T: Scalar>(e: &Expr<T>) -> Value {
    let list = |head: &str, v: &[Expr<T>]| {
        let mut out = vec![Value::String(head.to_string())];
        out.extend(v.iter().map(expr_to_json));
        Value::Array(out)
    };
    match e {
        Expr::Const(c) => serde_json::Number::from_f64(c.approx()).map(Value::Number).unwrap_or(Value::Null),
        Expr::Sym(s) => Value::String(s.to_string()),
        Expr::Add(v) => list("+", v),
        Expr::Mul(v) => list("*", v),
        Expr::Div(a, b) => Value::Array(vec!["/".into(), expr_to_json(a), expr_to_json(b)]),
        Expr::Call(n, v) => list(n, v),
    }
}

/// Parses a kernel document.
pub fn parse_kernel<T: Scalar>(text: &str) -> Result<Kernel<T>> {
    let doc: KernelDoc = serde_json::from_str(text)?;
    build(doc)
}

fn build<T: Scalar>(doc: KernelDoc) -> Result<Kernel<T>> {
    let mut k = Kernel::<T>::empty();
    for (name, &ext) in &doc.indices {
        if !is_ident(name) {
            return Err(Error::Parse(format!("bad index name `{name}`")));
        }
        if ext == 0 {
            return Err(Error::Invalid(format!("index `{name}` has extent 0")));
        }
        k.indices.insert(name.clone(), ext);
    }
    for (name, t) in doc.tables {
        let size = t.dims.iter().try_fold(1usize, |a, d| Ok::<_, Error>(a * k.extent(d)?))?;
        if t.values.len() != size {
            return Err(Error::Invalid(format!("table `{name}` has {} values, expected {size}", t.values.len())));
        }
        let values = t.values.iter().map(|v| T::lit(*v)).collect();
        k.tables.insert(name, Table { dims: t.dims, values, provenance: t.provenance.unwrap_or(Provenance::Input) });
    }
    for (name, v) in doc.constants {
        k.constants.insert(name, parse_expr(&v)?);
    }
    for (name, dims) in doc.outputs {
        for d in &dims {
            k.extent(d)?;
        }
        k.outputs.insert(name, dims);
    }
    k.body = match (doc.loops, doc.statements, doc.body) {
        (Some(loops), Some(stmts), None) => spine_body(&k, &loops, stmts)?,
        (None, None, Some(body)) => body.into_iter().map(|n| tree_node(&k, n)).collect::<Result<_>>()?,
        _ => return Err(Error::Parse("give either `loops` with `statements`, or `body`".into())),
    };
    match doc.locals {
        Some(locals) => {
            for (name, l) in locals {
                k.locals.insert(name, Local { dims: l.dims, kind: l.kind });
            }
        }
        None => infer_locals(&mut k)?,
    }
    check_names(&k)?;
    super::classify::infer_classes(&mut k);
    Ok(k)
}

fn parse_stmt<T: Scalar>(lhs: &str, op: Op, rhs: &Value) -> Result<Statement<T>> {
    Ok(Statement { lhs: Symbol::parse(lhs)?, op, rhs: parse_expr(rhs)? })
}

fn new_loop<T: Scalar>(k: &Kernel<T>, index: &str, class: Option<LoopClass>) -> Result<Loop<T>> {
    let ext = k.extent(index)?;
    Ok(Loop {
        index: index.to_string(),
        class: class.unwrap_or(LoopClass::Plain),
        declared: class.is_some(),
        start: 0,
        end: ext,
        hoisted: false,
        body: Vec::new(),
    })
}

fn spine_body<T: Scalar>(k: &Kernel<T>, loops: &[LoopDoc], stmts: Vec<StmtDoc>) -> Result<Vec<Node<T>>> {
    let mut seen = std::collections::BTreeSet::new();
    for l in loops {
        if !seen.insert(l.index.as_str()) {
            return Err(Error::Invalid(format!("loop `{}` listed twice", l.index)));
        }
    }
    let mut stack: Vec<Loop<T>> = Vec::new();
    let mut top: Vec<Node<T>> = Vec::new();
    let mut opened = 0usize;
    fn close<T>(stack: &mut Vec<Loop<T>>, top: &mut Vec<Node<T>>) {
        let l = stack.pop().unwrap();
        match stack.last_mut() {
            Some(p) => p.body.push(Node::Loop(l)),
            None => top.push(Node::Loop(l)),
        }
    }
    for s in stmts {
        if s.level > loops.len() {
            return Err(Error::Invalid(format!("statement `{}` at level {} but only {} loops", s.lhs, s.level, loops.len())));
        }
        while stack.len() > s.level {
            close(&mut stack, &mut top);
        }
        if stack.len() < s.level {
            if opened > stack.len() {
                return Err(Error::Invalid(format!(
                    "statement `{}` re-enters loop `{}` after it was closed",
                    s.lhs,
                    loops[stack.len()].index
                )));
            }
            while stack.len() < s.level {
                let d = &loops[stack.len()];
                stack.push(new_loop(k, &d.index, d.class)?);
                opened += 1;
            }
        }
        let st = parse_stmt(&s.lhs, s.op, &s.rhs)?;
        match stack.last_mut() {
            Some(l) => l.body.push(Node::Stmt(st)),
            None => top.push(Node::Stmt(st)),
        }
    }
    while !stack.is_empty() {
        close(&mut stack, &mut top);
    }
    if opened < loops.len() {
        return Err(Error::Invalid(format!("loop `{}` contains no statements", loops[opened].index)));
    }
    Ok(top)
}

fn tree_node<T: Scalar>(k: &Kernel<T>, n: NodeDoc) -> Result<Node<T>> {
    Ok(match n {
        NodeDoc::Stmt(s) => Node::Stmt(parse_stmt(&s.lhs, s.op, &s.rhs)?),
        NodeDoc::Loop(l) => {
            let mut lp = new_loop(k, &l.index, l.class)?;
            lp.start = l.start.unwrap_or(0);
            lp.end = l.end.unwrap_or(lp.end);
            if lp.start > lp.end || lp.end > k.extent(&l.index)? {
                return Err(Error::Invalid(format!("loop `{}` range {}..{} out of bounds", l.index, lp.start, lp.end)));
            }
            lp.declared = l.declared;
            lp.hoisted = l.hoisted;
            lp.body = l.body.into_iter().map(|c| tree_node(k, c)).collect::<Result<_>>()?;
            Node::Loop(lp)
        }
    })
}

fn infer_locals<T: Scalar>(k: &mut Kernel<T>) -> Result<()> {
    let mut found: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut err = None;
    k.visit_statements(&mut |_, s| {
        if k.outputs.contains_key(&s.lhs.name) {
            return;
        }
        let mut dims = Vec::new();
        for sub in &s.lhs.subs {
            match sub {
                Subscript::Var(v) => dims.push(v.clone()),
                Subscript::Fixed(_) => err = Some(Error::Invalid(format!("local `{}` written at a fixed position", s.lhs))),
            }
        }
        if let Some(prev) = found.get(&s.lhs.name) {
            if prev != &dims {
                err = Some(Error::Invalid(format!("local `{}` written with differing shapes", s.lhs.name)));
            }
        }
        found.insert(s.lhs.name.clone(), dims);
    });
    if let Some(e) = err {
        return Err(e);
    }
    for (name, dims) in found {
        if k.tables.contains_key(&name) || k.constants.contains_key(&name) {
            return Err(Error::Invalid(format!("statement assigns to read-only `{name}`")));
        }
        k.locals.insert(name, Local { dims, kind: LocalKind::Input });
    }
    Ok(())
}

fn check_names<T: Scalar>(k: &Kernel<T>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    let groups: [Vec<&String>; 5] = [
        k.indices.keys().collect(),
        k.tables.keys().collect(),
        k.constants.keys().collect(),
        k.locals.keys().collect(),
        k.outputs.keys().collect(),
    ];
    for name in groups.iter().flatten() {
        if !seen.insert(name.as_str()) {
            return Err(Error::Invalid(format!("name `{name}` declared twice")));
        }
    }
    for (name, e) in &k.constants {
        let mut bad = None;
        e.visit_syms(&mut |s| {
            if !s.subs.is_empty() || !k.constants.contains_key(&s.name) {
                bad = Some(s.clone());
            }
        });
        if let Some(s) = bad {
            return Err(Error::Invalid(format!("constant `{name}` refers to `{s}`, which is not a constant")));
        }
    }
    let mut bad = None;
    k.visit_statements(&mut |stack, s| {
        let bound = |x: &str| stack.iter().any(|c| c.index == x);
        let mut check = |sym: &Symbol| {
            if bad.is_some() {
                return;
            }
            let dims = if k.constants.contains_key(&sym.name) { Some(&[][..]) } else { k.dims_of(&sym.name) };
            match dims {
                None => bad = Some(format!("unknown symbol `{sym}`")),
                Some(d) if d.len() != sym.subs.len() => {
                    bad = Some(format!("`{sym}` has {} subscripts, expected {}", sym.subs.len(), d.len()))
                }
                Some(_) => {
                    for v in sym.vars() {
                        if !bound(v) {
                            bad = Some(format!("`{sym}` uses index `{v}` outside its loop"));
                        }
                    }
                }
            }
        };
        check(&s.lhs);
        s.rhs.visit_syms(&mut check);
    });
    match bad {
        Some(m) => Err(Error::Invalid(m)),
        None => Ok(()),
    }
}

/// Serializes a kernel in the tree layout.
pub fn kernel_to_json<T: Scalar>(k: &Kernel<T>) -> Value {
    fn node<T: Scalar>(n: &Node<T>) -> NodeDoc {
        match n {
            Node::Stmt(s) => NodeDoc::Stmt(StmtNodeDoc { lhs: s.lhs.to_string(), op: s.op, rhs: expr_to_json(&s.rhs) }),
            Node::Loop(l) => NodeDoc::Loop(LoopNodeDoc {
                index: l.index.clone(),
                class: Some(l.class),
                start: Some(l.start),
                end: Some(l.end),
                declared: l.declared,
                hoisted: l.hoisted,
                body: l.body.iter().map(node).collect(),
            }),
        }
    }
    let doc = KernelDoc {
        indices: k.indices.clone(),
        loops: None,
        tables: k
            .tables
            .iter()
            .map(|(n, t)| {
                (
                    n.clone(),
                    TableDoc {
                        dims: t.dims.clone(),
                        values: t.values.iter().map(Scalar::approx).collect(),
                        provenance: Some(t.provenance),
                    },
                )
            })
            .collect(),
        constants: k.constants.iter().map(|(n, e)| (n.clone(), expr_to_json(e))).collect(),
        locals: Some(k.locals.iter().map(|(n, l)| (n.clone(), LocalDoc { dims: l.dims.clone(), kind: l.kind })).collect()),
        statements: None,
        body: Some(k.body.iter().map(node).collect()),
        outputs: k.outputs.clone(),
    };
    serde_json::to_value(doc).expect("kernel documents serialize")
}

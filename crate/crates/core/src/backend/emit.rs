//! C code generation.
//!
//! Kernels are lowered to a small C syntax tree first. Array accesses carry
//! an affine offset over loop counters only, so split loops never need
//! index arrays; [`CFunction::indirection_free`] checks this on the tree.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::ir::eval::constant_values;
use crate::ir::{Expr, Kernel, Node, Op, Provenance, Subscript, Symbol};
use crate::scalar::Scalar;

/// Row-major offset `constant + sum(stride * counter)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offset {
    pub terms: Vec<(usize, String)>,
    pub constant: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CExpr {
    Lit(String),
    Var(String),
    Elem { array: String, offset: Offset },
    Add(Vec<CExpr>),
    Mul(Vec<CExpr>),
    Div(Box<CExpr>, Box<CExpr>),
    Call(String, Vec<CExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CStmt {
    Assign { target: CExpr, accumulate: bool, value: CExpr },
    For { counter: String, start: usize, end: usize, body: Vec<CStmt> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CParam {
    pub name: String,
    pub output: bool,
}

/// A lowered kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct CFunction {
    pub name: String,
    pub params: Vec<CParam>,
    /// Constant tables baked into the source.
    pub statics: Vec<(String, Vec<String>)>,
    pub constants: Vec<(String, String)>,
    pub scalars: Vec<String>,
    /// Zero-initialized stack arrays with their lengths.
    pub arrays: Vec<(String, usize)>,
    pub body: Vec<CStmt>,
}

impl CFunction {
    /// Whether every array offset is built from enclosing loop counters.
    pub fn indirection_free(&self) -> bool {
        fn expr(e: &CExpr, counters: &[String]) -> bool {
            match e {
                CExpr::Lit(_) | CExpr::Var(_) => true,
                CExpr::Elem { offset, .. } => offset.terms.iter().all(|(_, v)| counters.contains(v)),
                CExpr::Add(v) | CExpr::Mul(v) | CExpr::Call(_, v) => v.iter().all(|c| expr(c, counters)),
                CExpr::Div(a, b) => expr(a, counters) && expr(b, counters),
            }
        }
        fn body(b: &[CStmt], counters: &mut Vec<String>) -> bool {
            b.iter().all(|s| match s {
                CStmt::Assign { target, value, .. } => expr(target, counters) && expr(value, counters),
                CStmt::For { counter, body: inner, .. } => {
                    counters.push(counter.clone());
                    let ok = body(inner, counters);
                    counters.pop();
                    ok
                }
            })
        }
        body(&self.body, &mut Vec::new())
    }

    /// Loop bounds in pre-order.
    pub fn loop_bounds(&self) -> Vec<(String, usize, usize)> {
        fn go(b: &[CStmt], out: &mut Vec<(String, usize, usize)>) {
            for s in b {
                if let CStmt::For { counter, start, end, body } = s {
                    out.push((counter.clone(), *start, *end));
                    go(body, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.body, &mut out);
        out
    }

    fn uses_math(&self) -> bool {
        fn expr(e: &CExpr) -> bool {
            match e {
                CExpr::Call(..) => true,
                CExpr::Add(v) | CExpr::Mul(v) => v.iter().any(expr),
                CExpr::Div(a, b) => expr(a) || expr(b),
                _ => false,
            }
        }
        fn body(b: &[CStmt]) -> bool {
            b.iter().any(|s| match s {
                CStmt::Assign { value, .. } => expr(value),
                CStmt::For { body: inner, .. } => body(inner),
            })
        }
        body(&self.body)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.uses_math() {
            out.push_str("#include <math.h>\n\n");
        }
        for (name, values) in &self.statics {
            let _ = writeln!(out, "static const double {name}[{}] = {{", values.len());
            for chunk in values.chunks(4) {
                let _ = writeln!(out, "  {},", chunk.join(", "));
            }
            out.push_str("};\n\n");
        }
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| if p.output { format!("double *restrict {}", p.name) } else { format!("const double *restrict {}", p.name) })
            .collect();
        let params = if params.is_empty() { "void".to_string() } else { params.join(", ") };
        let _ = writeln!(out, "void {}({params})\n{{", self.name);
        for (name, v) in &self.constants {
            let _ = writeln!(out, "  const double {name} = {v};");
        }
        for name in &self.scalars {
            let _ = writeln!(out, "  double {name} = 0.0;");
        }
        for (name, len) in &self.arrays {
            let _ = writeln!(out, "  double {name}[{len}] = {{0}};");
        }
        render_body(&self.body, 1, &mut out);
        out.push_str("}\n");
        out
    }
}

fn render_offset(o: &Offset) -> String {
    let mut parts: Vec<String> = o
        .terms
        .iter()
        .map(|(s, v)| if *s == 1 { v.clone() } else { format!("{s} * {v}") })
        .collect();
    if o.constant != 0 || parts.is_empty() {
        parts.push(o.constant.to_string());
    }
    parts.join(" + ")
}

/// Binding strength: sums 1, products 2, atoms 3.
fn level(e: &CExpr) -> u8 {
    match e {
        CExpr::Add(_) => 1,
        CExpr::Mul(_) | CExpr::Div(..) => 2,
        CExpr::Lit(s) if s.starts_with('-') => 1,
        _ => 3,
    }
}

fn render_expr(e: &CExpr) -> String {
    let wrap = |c: &CExpr, min: u8| {
        let s = render_expr(c);
        if level(c) < min {
            format!("({s})")
        } else {
            s
        }
    };
    match e {
        CExpr::Lit(s) | CExpr::Var(s) => s.clone(),
        CExpr::Elem { array, offset } => format!("{array}[{}]", render_offset(offset)),
        CExpr::Add(v) => v.iter().enumerate().map(|(i, c)| wrap(c, if i == 0 { 1 } else { 2 })).collect::<Vec<_>>().join(" + "),
        CExpr::Mul(v) => v.iter().map(|c| wrap(c, 2)).collect::<Vec<_>>().join(" * "),
        CExpr::Div(a, b) => format!("{} / {}", wrap(a, 2), wrap(b, 3)),
        CExpr::Call(n, v) => format!("{n}({})", v.iter().map(render_expr).collect::<Vec<_>>().join(", ")),
    }
}

fn render_body(b: &[CStmt], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for s in b {
        match s {
            CStmt::Assign { target, accumulate, value } => {
                let op = if *accumulate { "+=" } else { "=" };
                let _ = writeln!(out, "{pad}{} {op} {};", render_expr(target), render_expr(value));
            }
            CStmt::For { counter, start, end, body } => {
                let _ = writeln!(out, "{pad}for (int {counter} = {start}; {counter} < {end}; ++{counter})\n{pad}{{");
                render_body(body, depth + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

struct Lower<'a, T> {
    k: &'a Kernel<T>,
}

impl<T: Scalar> Lower<'_, T> {
    fn offset(&self, s: &Symbol, dims: &[String]) -> Result<Offset> {
        if dims.len() != s.subs.len() {
            return Err(Error::Invalid(format!("`{s}` has {} subscripts, expected {}", s.subs.len(), dims.len())));
        }
        let ext: Vec<usize> = dims.iter().map(|d| self.k.extent(d)).collect::<Result<_>>()?;
        let mut off = Offset { terms: Vec::new(), constant: 0 };
        for (p, sub) in s.subs.iter().enumerate() {
            let stride: usize = ext[p + 1..].iter().product();
            match sub {
                Subscript::Fixed(n) => off.constant += n * stride,
                Subscript::Var(v) => off.terms.push((stride, v.clone())),
            }
        }
        Ok(off)
    }

    fn sym(&self, s: &Symbol) -> Result<CExpr> {
        match self.k.dims_of(&s.name) {
            Some(dims) if !dims.is_empty() => Ok(CExpr::Elem { array: s.name.clone(), offset: self.offset(s, dims)? }),
            Some(_) if self.k.outputs.contains_key(&s.name) || self.k.tables.contains_key(&s.name) => {
                Ok(CExpr::Elem { array: s.name.clone(), offset: Offset { terms: Vec::new(), constant: 0 } })
            }
            _ => Ok(CExpr::Var(s.name.clone())),
        }
    }

    fn expr(&self, e: &Expr<T>) -> Result<CExpr> {
        Ok(match e {
            Expr::Const(c) => CExpr::Lit(c.c_literal()),
            Expr::Sym(s) => self.sym(s)?,
            Expr::Add(v) => CExpr::Add(v.iter().map(|c| self.expr(c)).collect::<Result<_>>()?),
            Expr::Mul(v) => CExpr::Mul(v.iter().map(|c| self.expr(c)).collect::<Result<_>>()?),
            Expr::Div(a, b) => CExpr::Div(Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Call(n, v) => CExpr::Call(c_call(n).to_string(), v.iter().map(|c| self.expr(c)).collect::<Result<_>>()?),
        })
    }

    fn body(&self, b: &[Node<T>]) -> Result<Vec<CStmt>> {
        b.iter()
            .map(|n| match n {
                Node::Stmt(s) => {
                    let value = match &s.rhs {
                        Expr::Add(v) if v.is_empty() => CExpr::Lit("0.0".into()),
                        Expr::Mul(v) if v.is_empty() => CExpr::Lit("1.0".into()),
                        e => self.expr(e)?,
                    };
                    Ok(CStmt::Assign { target: self.sym(&s.lhs)?, accumulate: s.op == Op::AugAdd, value })
                }
                Node::Loop(l) => Ok(CStmt::For { counter: l.index.clone(), start: l.start, end: l.end, body: self.body(&l.body)? }),
            })
            .collect()
    }
}

fn c_call(name: &str) -> &str {
    match name {
        "abs" => "fabs",
        "min" => "fmin",
        "max" => "fmax",
        n => n,
    }
}

/// Lowers a kernel to the C syntax tree. Outputs are accumulated into and
/// must be zeroed by the caller.
pub fn lower<T: Scalar>(k: &Kernel<T>) -> Result<CFunction> {
    let lw = Lower { k };
    let mut params: Vec<CParam> = k.outputs.keys().map(|n| CParam { name: n.clone(), output: true }).collect();
    let mut statics = Vec::new();
    for (name, t) in &k.tables {
        if t.provenance == Provenance::Input {
            params.push(CParam { name: name.clone(), output: false });
        } else {
            statics.push((name.clone(), t.values.iter().map(Scalar::c_literal).collect()));
        }
    }
    let values = constant_values(k)?;
    let used: BTreeSet<String> = {
        let mut u = BTreeSet::new();
        k.visit_statements(&mut |_, s| s.rhs.visit_syms(&mut |x| {
            u.insert(x.name.clone());
        }));
        u
    };
    let constants = values.iter().filter(|(n, _)| used.contains(*n)).map(|(n, v)| (n.clone(), v.c_literal())).collect();
    let mut scalars = Vec::new();
    let mut arrays = Vec::new();
    for (name, l) in &k.locals {
        if l.dims.is_empty() {
            scalars.push(name.clone());
        } else {
            let len = l.dims.iter().try_fold(1usize, |a, d| Ok::<_, Error>(a * k.extent(d)?))?;
            arrays.push((name.clone(), len));
        }
    }
    Ok(CFunction { name: "kernel".into(), params, statics, constants, scalars, arrays, body: lw.body(&k.body)? })
}

/// C source of a kernel.
pub fn emit_c<T: Scalar>(k: &Kernel<T>) -> Result<String> {
    Ok(lower(k)?.render())
}

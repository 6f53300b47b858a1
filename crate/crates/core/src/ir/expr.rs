//! Expression trees over indexed symbols.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One subscript of a symbol: a loop variable or a fixed position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subscript {
    Var(String),
    Fixed(usize),
}

impl fmt::Display for Subscript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subscript::Var(v) => write!(f, "{v}"),
            Subscript::Fixed(n) => write!(f, "{n}"),
        }
    }
}

/// A named scalar or array element such as `B[i][0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub name: String,
    pub subs: Vec<Subscript>,
}

impl Symbol {
    pub fn scalar(name: impl Into<String>) -> Self {
        Symbol { name: name.into(), subs: Vec::new() }
    }

    pub fn indexed<S: AsRef<str>>(name: impl Into<String>, vars: &[S]) -> Self {
        Symbol {
            name: name.into(),
            subs: vars.iter().map(|v| Subscript::Var(v.as_ref().to_string())).collect(),
        }
    }

    /// Loop variables appearing in the subscripts.
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.subs.iter().filter_map(|s| match s {
            Subscript::Var(v) => Some(v.as_str()),
            Subscript::Fixed(_) => None,
        })
    }

    pub fn has_var(&self, var: &str) -> bool {
        self.vars().any(|v| v == var)
    }

    /// Parses `name`, `name[i]`, `name[i][0]`, ...
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Parse(format!("malformed symbol `{text}`"));
        let (name, mut rest) = match text.find('[') {
            Some(p) => (&text[..p], &text[p..]),
            None => (text, ""),
        };
        if !is_ident(name) {
            return Err(bad());
        }
        let mut subs = Vec::new();
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            let inner = rest[1..close].trim();
            if let Ok(n) = inner.parse::<usize>() {
                subs.push(Subscript::Fixed(n));
            } else if is_ident(inner) {
                subs.push(Subscript::Var(inner.to_string()));
            } else {
                return Err(bad());
            }
            rest = &rest[close + 1..];
        }
        Ok(Symbol { name: name.to_string(), subs })
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for s in &self.subs {
            write!(f, "[{s}]")?;
        }
        Ok(())
    }
}

/// Expression tree node.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr<T> {
    Const(T),
    Sym(Symbol),
    Add(Vec<Expr<T>>),
    Mul(Vec<Expr<T>>),
    Div(Box<Expr<T>>, Box<Expr<T>>),
    Call(String, Vec<Expr<T>>),
}

impl<T: Scalar> Expr<T> {
    pub fn num(v: f64) -> Self {
        Expr::Const(T::lit(v))
    }

    pub fn zero() -> Self {
        Expr::Const(T::zero())
    }

    pub fn one() -> Self {
        Expr::Const(T::one())
    }

    pub fn sym(s: Symbol) -> Self {
        Expr::Sym(s)
    }

    /// Parses a symbol spelled as text.
    pub fn var(text: &str) -> Self {
        Expr::Sym(Symbol::parse(text).expect("valid symbol text"))
    }

    /// Sum that collapses trivial arities.
    pub fn add(mut terms: Vec<Expr<T>>) -> Self {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.pop().unwrap(),
            _ => Expr::Add(terms),
        }
    }

    /// Product that collapses trivial arities.
    pub fn mul(mut factors: Vec<Expr<T>>) -> Self {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.pop().unwrap(),
            _ => Expr::Mul(factors),
        }
    }

    pub fn div(num: Expr<T>, den: Expr<T>) -> Self {
        Expr::Div(Box::new(num), Box::new(den))
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    pub fn as_sym(&self) -> Option<&Symbol> {
        match self {
            Expr::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Children of interior nodes.
    pub fn children(&self) -> Vec<&Expr<T>> {
        match self {
            Expr::Const(_) | Expr::Sym(_) => Vec::new(),
            Expr::Add(v) | Expr::Mul(v) | Expr::Call(_, v) => v.iter().collect(),
            Expr::Div(a, b) => vec![a.as_ref(), b.as_ref()],
        }
    }

    /// Canonical text: equal keys mean structurally identical trees.
    pub fn key(&self) -> String {
        let mut out = String::new();
        self.write_key(&mut out);
        out
    }

    fn write_key(&self, out: &mut String) {
        match self {
            Expr::Const(c) => {
                out.push('#');
                out.push_str(&c.key());
            }
            Expr::Sym(s) => out.push_str(&s.to_string()),
            Expr::Add(v) | Expr::Mul(v) => {
                out.push_str(if matches!(self, Expr::Add(_)) { "(+" } else { "(*" });
                for c in v {
                    out.push(' ');
                    c.write_key(out);
                }
                out.push(')');
            }
            Expr::Div(a, b) => {
                out.push_str("(/ ");
                a.write_key(out);
                out.push(' ');
                b.write_key(out);
                out.push(')');
            }
            Expr::Call(name, v) => {
                out.push('(');
                out.push_str(name);
                for c in v {
                    out.push(' ');
                    c.write_key(out);
                }
                out.push(')');
            }
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Sym(_) => 1,
            Expr::Mul(_) => 2,
            Expr::Add(_) => 3,
            Expr::Div(..) => 4,
            Expr::Call(..) => 5,
        }
    }

    /// Deterministic operand order: constants, symbols, then compound nodes.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| match (self, other) {
            (Expr::Sym(a), Expr::Sym(b)) => a.cmp(b),
            _ => self.key().cmp(&other.key()),
        })
    }

    /// Loop variables named in subscripts anywhere in the tree.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_syms(&mut |s| out.extend(s.vars().map(str::to_string)));
        out
    }

    pub fn visit_syms(&self, f: &mut impl FnMut(&Symbol)) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => f(s),
            _ => {
                for c in self.children() {
                    c.visit_syms(f);
                }
            }
        }
    }

    /// Distinct symbols in first-visit order.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out: Vec<Symbol> = Vec::new();
        self.visit_syms(&mut |s| {
            if !out.contains(s) {
                out.push(s.clone());
            }
        });
        out
    }

    pub fn mentions(&self, name: &str) -> bool {
        let mut hit = false;
        self.visit_syms(&mut |s| hit |= s.name == name);
        hit
    }

    pub fn contains(&self, pred: &impl Fn(&Symbol) -> bool) -> bool {
        let mut hit = false;
        self.visit_syms(&mut |s| hit |= pred(s));
        hit
    }

    /// Rebuilds the tree bottom-up, letting `f` replace any node.
    pub fn rewrite(&self, f: &mut impl FnMut(&Expr<T>) -> Option<Expr<T>>) -> Expr<T> {
        if let Some(r) = f(self) {
            return r;
        }
        match self {
            Expr::Const(_) | Expr::Sym(_) => self.clone(),
            Expr::Add(v) => Expr::Add(v.iter().map(|c| c.rewrite(f)).collect()),
            Expr::Mul(v) => Expr::Mul(v.iter().map(|c| c.rewrite(f)).collect()),
            Expr::Div(a, b) => Expr::Div(Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::Call(n, v) => Expr::Call(n.clone(), v.iter().map(|c| c.rewrite(f)).collect()),
        }
    }

    /// Replaces every occurrence of symbols matched by `f`.
    pub fn substitute(&self, f: &impl Fn(&Symbol) -> Option<Expr<T>>) -> Expr<T> {
        self.rewrite(&mut |e| match e {
            Expr::Sym(s) => f(s),
            _ => None,
        })
    }

    /// Renames a loop variable in every subscript.
    pub fn rename_var(&self, from: &str, to: &Subscript) -> Expr<T> {
        self.substitute(&|s| {
            if s.has_var(from) {
                let mut s = s.clone();
                for sub in s.subs.iter_mut() {
                    if matches!(sub, Subscript::Var(v) if v == from) {
                        *sub = to.clone();
                    }
                }
                Some(Expr::Sym(s))
            } else {
                None
            }
        })
    }

    /// Top-level summands (a non-sum is a single summand).
    pub fn summands(&self) -> Vec<Expr<T>> {
        match self {
            Expr::Add(v) => v.clone(),
            e if e.is_zero() => Vec::new(),
            e => vec![e.clone()],
        }
    }

    /// Top-level factors (a non-product is a single factor).
    pub fn factors(&self) -> Vec<Expr<T>> {
        match self {
            Expr::Mul(v) => v.clone(),
            e => vec![e.clone()],
        }
    }
}

fn needs_parens<T>(child: &Expr<T>, parent_mul: bool) -> bool {
    match child {
        Expr::Add(_) => true,
        Expr::Div(..) => parent_mul,
        _ => false,
    }
}

impl<T: Scalar> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < T::zero() {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Add(v) => {
                for (n, c) in v.iter().enumerate() {
                    if n > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Expr::Mul(v) => {
                for (n, c) in v.iter().enumerate() {
                    if n > 0 {
                        write!(f, "*")?;
                    }
                    if needs_parens(c, true) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Expr::Div(a, b) => {
                let wrap = |e: &Expr<T>| !matches!(e, Expr::Const(_) | Expr::Sym(_) | Expr::Call(..));
                if wrap(a) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, "/")?;
                if wrap(b) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Call(n, v) => {
                write!(f, "{n}(")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

//! Direct interpreter for kernels.

use std::collections::BTreeMap;

use super::expr::{Expr, Subscript, Symbol};
use super::kernel::{Kernel, Node, Op};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Evaluates kernel expressions against its tables and a mutable store.
pub struct Evaluator<'k, T> {
    kernel: &'k Kernel<T>,
    consts: BTreeMap<String, T>,
    store: BTreeMap<String, Vec<T>>,
}

impl<'k, T: Scalar> Evaluator<'k, T> {
    pub fn new(kernel: &'k Kernel<T>) -> Result<Self> {
        let consts = constant_values(kernel)?;
        let mut store = BTreeMap::new();
        for (name, dims) in &kernel.outputs {
            store.insert(name.clone(), vec![T::zero(); size_of(kernel, dims)?]);
        }
        for (name, local) in &kernel.locals {
            store.insert(name.clone(), vec![T::zero(); size_of(kernel, &local.dims)?]);
        }
        Ok(Evaluator { kernel, consts, store })
    }

    fn offset(&self, s: &Symbol, dims: &[String], env: &[(String, usize)]) -> Result<usize> {
        if dims.len() != s.subs.len() {
            return Err(Error::Invalid(format!("`{s}` has {} subscripts, expected {}", s.subs.len(), dims.len())));
        }
        let mut off = 0usize;
        for (sub, dim) in s.subs.iter().zip(dims) {
            let ext = self.kernel.extent(dim)?;
            let v = match sub {
                Subscript::Fixed(n) => *n,
                Subscript::Var(x) => lookup(env, x).ok_or_else(|| Error::Invalid(format!("index `{x}` unbound in `{s}`")))?,
            };
            if v >= ext {
                return Err(Error::Invalid(format!("subscript {v} out of range in `{s}`")));
            }
            off = off * ext + v;
        }
        Ok(off)
    }

    fn read(&self, s: &Symbol, env: &[(String, usize)]) -> Result<T> {
        if s.subs.is_empty() {
            if let Some(c) = self.consts.get(&s.name) {
                return Ok(c.clone());
            }
        }
        if let Some(t) = self.kernel.tables.get(&s.name) {
            let off = self.offset(s, &t.dims, env)?;
            return Ok(t.values[off].clone());
        }
        if let (Some(dims), Some(vals)) = (self.kernel.dims_of(&s.name), self.store.get(&s.name)) {
            let off = self.offset(s, dims, env)?;
            return Ok(vals[off].clone());
        }
        Err(Error::Invalid(format!("unknown symbol `{s}`")))
    }

    pub fn eval(&self, e: &Expr<T>, env: &[(String, usize)]) -> Result<T> {
        Ok(match e {
            Expr::Const(c) => c.clone(),
            Expr::Sym(s) => self.read(s, env)?,
            Expr::Add(v) => {
                let mut acc = T::zero();
                for c in v {
                    acc = acc + self.eval(c, env)?;
                }
                acc
            }
            Expr::Mul(v) => {
                let mut acc = T::one();
                for c in v {
                    acc = acc * self.eval(c, env)?;
                }
                acc
            }
            Expr::Div(a, b) => self.eval(a, env)? / self.eval(b, env)?,
            Expr::Call(n, v) => {
                let args = v.iter().map(|c| self.eval(c, env)).collect::<Result<Vec<_>>>()?;
                T::call(n, &args).ok_or_else(|| Error::Unsupported(format!("call `{n}`")))?
            }
        })
    }

    fn run(&mut self, body: &[Node<T>], env: &mut Vec<(String, usize)>) -> Result<()> {
        for n in body {
            match n {
                Node::Stmt(s) => {
                    let v = self.eval(&s.rhs, env)?;
                    let dims = self
                        .kernel
                        .dims_of(&s.lhs.name)
                        .ok_or_else(|| Error::Invalid(format!("assignment to undeclared `{}`", s.lhs)))?
                        .to_vec();
                    let off = self.offset(&s.lhs, &dims, env)?;
                    let slot = &mut self.store.get_mut(&s.lhs.name).expect("declared storage")[off];
                    *slot = match s.op {
                        Op::Assign => v,
                        Op::AugAdd => slot.clone() + v,
                    };
                }
                Node::Loop(l) => {
                    for x in l.start..l.end {
                        env.push((l.index.clone(), x));
                        self.run(&l.body, env)?;
                        env.pop();
                    }
                }
            }
        }
        Ok(())
    }
}

fn lookup(env: &[(String, usize)], x: &str) -> Option<usize> {
    env.iter().rev().find(|(n, _)| n == x).map(|(_, v)| *v)
}

fn size_of<T: Scalar>(kernel: &Kernel<T>, dims: &[String]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, d| Ok(acc * kernel.extent(d)?))
}

/// Numeric values of all named constants.
pub fn constant_values<T: Scalar>(kernel: &Kernel<T>) -> Result<BTreeMap<String, T>> {
    fn value<T: Scalar>(
        k: &Kernel<T>,
        name: &str,
        done: &mut BTreeMap<String, T>,
        active: &mut Vec<String>,
    ) -> Result<T> {
        if let Some(v) = done.get(name) {
            return Ok(v.clone());
        }
        if active.iter().any(|a| a == name) {
            return Err(Error::Invalid(format!("constant `{name}` is defined in terms of itself")));
        }
        let expr = k.constants.get(name).ok_or_else(|| Error::Invalid(format!("unknown constant `{name}`")))?;
        active.push(name.to_string());
        let mut deps = Vec::new();
        expr.visit_syms(&mut |s| deps.push(s.clone()));
        for s in &deps {
            if !s.subs.is_empty() {
                return Err(Error::Invalid(format!("constant `{name}` refers to array element `{s}`")));
            }
            value(k, &s.name, done, active)?;
        }
        let ev = ConstEval { values: done };
        let v = ev.eval(expr)?;
        active.pop();
        done.insert(name.to_string(), v.clone());
        Ok(v)
    }
    let mut done = BTreeMap::new();
    for name in kernel.constants.keys() {
        value(kernel, name, &mut done, &mut Vec::new())?;
    }
    Ok(done)
}

struct ConstEval<'a, T> {
    values: &'a BTreeMap<String, T>,
}

impl<T: Scalar> ConstEval<'_, T> {
    fn eval(&self, e: &Expr<T>) -> Result<T> {
        Ok(match e {
            Expr::Const(c) => c.clone(),
            Expr::Sym(s) => self.values[&s.name].clone(),
            Expr::Add(v) => v.iter().try_fold(T::zero(), |a, c| Ok::<_, Error>(a + self.eval(c)?))?,
            Expr::Mul(v) => v.iter().try_fold(T::one(), |a, c| Ok::<_, Error>(a * self.eval(c)?))?,
            Expr::Div(a, b) => self.eval(a)? / self.eval(b)?,
            Expr::Call(n, v) => {
                let args = v.iter().map(|c| self.eval(c)).collect::<Result<Vec<_>>>()?;
                T::call(n, &args).ok_or_else(|| Error::Unsupported(format!("call `{n}`")))?
            }
        })
    }
}

/// Runs the kernel and returns every output array (row-major).
pub fn evaluate<T: Scalar>(kernel: &Kernel<T>) -> Result<BTreeMap<String, Vec<T>>> {
    let mut ev = Evaluator::new(kernel)?;
    ev.run(&kernel.body, &mut Vec::new())?;
    let mut out = BTreeMap::new();
    for name in kernel.outputs.keys() {
        out.insert(name.clone(), ev.store.remove(name).unwrap_or_default());
    }
    Ok(out)
}

/// Largest entrywise difference relative to the reference magnitude.
pub fn relative_error(reference: &BTreeMap<String, Vec<f64>>, other: &BTreeMap<String, Vec<f64>>) -> f64 {
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for (name, r) in reference {
        let Some(o) = other.get(name) else { return f64::INFINITY };
        if o.len() != r.len() {
            return f64::INFINITY;
        }
        for (a, b) in r.iter().zip(o) {
            scale = scale.max(a.abs());
            let d = (a - b).abs();
            if d.is_nan() {
                return f64::INFINITY;
            }
            diff = diff.max(d);
        }
    }
    if other.len() != reference.len() {
        return f64::INFINITY;
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

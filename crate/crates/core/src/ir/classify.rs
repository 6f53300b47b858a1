//! Loop classification and validation of the element integration nest shape.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Deref;

use serde::Serialize;

use super::expr::{Expr, Symbol};
use super::kernel::{symbol_deps, Kernel, Loop, LoopClass, Node, Op, Statement};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Degree of `e` in the symbols selected by `pred`; `None` when unbounded
/// (the symbol sits under a division denominator or a call).
pub fn degree<T: Scalar>(e: &Expr<T>, pred: &impl Fn(&Symbol) -> bool) -> Option<u32> {
    match e {
        Expr::Const(_) => Some(0),
        Expr::Sym(s) => Some(u32::from(pred(s))),
        Expr::Add(v) => v.iter().try_fold(0, |acc, c| degree(c, pred).map(|d| acc.max(d))),
        Expr::Mul(v) => v.iter().try_fold(0, |acc, c| degree(c, pred).map(|d| acc + d)),
        Expr::Div(a, b) => match degree(b, pred)? {
            0 => degree(a, pred),
            _ => None,
        },
        Expr::Call(_, v) => {
            for c in v {
                if degree(c, pred)? != 0 {
                    return None;
                }
            }
            Some(0)
        }
    }
}

fn body_statements<T>(body: &[Node<T>], out: &mut Vec<Statement<T>>)
where
    T: Clone,
{
    for n in body {
        match n {
            Node::Stmt(s) => out.push(s.clone()),
            Node::Loop(l) => body_statements(&l.body, out),
        }
    }
}

fn is_reduction<T: Scalar>(l: &Loop<T>, stmts: &[Statement<T>]) -> bool {
    stmts.iter().any(|s| s.op == Op::AugAdd) && stmts.iter().all(|s| !s.lhs.has_var(&l.index))
}

fn is_affine<T: Scalar>(l: &Loop<T>, stmts: &[Statement<T>], local_deps: &BTreeMap<String, BTreeSet<String>>) -> bool {
    stmts.iter().all(|s| {
        s.rhs.symbols().iter().filter(|sym| symbol_deps(sym, local_deps).contains(&l.index)).all(|target| {
            let pred = |x: &Symbol| x == target;
            matches!(degree(&s.rhs, &pred), Some(0 | 1))
        })
    })
}

fn classify_body<T: Scalar>(l: &Loop<T>, local_deps: &BTreeMap<String, BTreeSet<String>>) -> LoopClass {
    let mut stmts = Vec::new();
    body_statements(&l.body, &mut stmts);
    if is_reduction(l, &stmts) {
        LoopClass::Reduction
    } else if is_affine(l, &stmts, local_deps) {
        LoopClass::Linear
    } else {
        LoopClass::Plain
    }
}

/// Infers the class of the first loop over `index`.
///
/// Reductions are recognized before linearity since a quadrature loop is
/// usually affine in its tables as well. Order-free loops are never inferred.
pub fn classify_loop<T: Scalar>(kernel: &Kernel<T>, index: &str) -> Result<LoopClass> {
    let l = kernel
        .loops()
        .into_iter()
        .find(|l| l.index == index)
        .ok_or_else(|| Error::UnknownLoop(index.to_string()))?;
    Ok(classify_body(l, &kernel.local_deps()))
}

/// Fills in the class of every loop whose class was not declared.
pub fn infer_classes<T: Scalar>(kernel: &mut Kernel<T>) {
    fn go<T: Scalar>(body: &mut [Node<T>], deps: &BTreeMap<String, BTreeSet<String>>) {
        for n in body {
            if let Node::Loop(l) = n {
                if !l.declared && !l.hoisted {
                    l.class = classify_body(l, deps);
                }
                go(&mut l.body, deps);
            }
        }
    }
    let deps = kernel.local_deps();
    go(&mut kernel.body, &deps);
}

/// True iff the named loops form a perfect nest of linear loops.
pub fn is_multilinear<T: Scalar>(kernel: &Kernel<T>, loops: &[&str]) -> bool {
    let Some(first) = loops.first() else { return false };
    let Some(mut cur) = kernel.loops().into_iter().find(|l| l.index == *first) else { return false };
    let deps = kernel.local_deps();
    for (n, idx) in loops.iter().enumerate() {
        if cur.index != *idx || classify_body(cur, &deps) != LoopClass::Linear {
            return false;
        }
        if n + 1 == loops.len() {
            return cur.body.iter().all(|c| matches!(c, Node::Stmt(_)));
        }
        match cur.body.as_slice() {
            [Node::Loop(next)] => cur = next,
            _ => return false,
        }
    }
    true
}

/// A kernel confirmed to have the element integration nest shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedKernel<T> {
    kernel: Kernel<T>,
    pub roles: NestRoles,
}

/// Roles of the loops of a validated nest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NestRoles {
    pub element: Option<String>,
    pub reduction: Option<String>,
    pub linear: Vec<String>,
    pub arity: usize,
    /// Whether the reduction loop body is exactly the multilinear nest.
    pub reduction_perfect: Option<bool>,
}

impl<T> Deref for ValidatedKernel<T> {
    type Target = Kernel<T>;

    fn deref(&self) -> &Kernel<T> {
        &self.kernel
    }
}

impl<T: Scalar> ValidatedKernel<T> {
    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn into_kernel(self) -> Kernel<T> {
        self.kernel
    }

    /// Statements of the innermost block.
    pub fn nest_statements(&self) -> Vec<&Statement<T>> {
        let mut body = &self.kernel.body;
        loop {
            let loops: Vec<&Loop<T>> = body
                .iter()
                .filter_map(|n| match n {
                    Node::Loop(l) => Some(l),
                    _ => None,
                })
                .collect();
            match loops.first() {
                Some(l) => body = &l.body,
                None => {
                    return body
                        .iter()
                        .filter_map(|n| match n {
                            Node::Stmt(s) => Some(s),
                            _ => None,
                        })
                        .collect()
                }
            }
        }
    }
}

fn not_fem(msg: impl Into<String>) -> Error {
    Error::NotFemNest(msg.into())
}

/// Checks the element, reduction and multilinear loop shape.
pub fn validate_fem_nest<T: Scalar>(kernel: &Kernel<T>) -> Result<ValidatedKernel<T>> {
    let deps = kernel.local_deps();
    let mut roles = NestRoles { element: None, reduction: None, linear: Vec::new(), arity: 0, reduction_perfect: None };
    let mut body = &kernel.body;
    let mut depth = 0usize;
    let innermost = loop {
        let loops: Vec<&Loop<T>> = body
            .iter()
            .filter_map(|n| match n {
                Node::Loop(l) => Some(l),
                _ => None,
            })
            .collect();
        if loops.is_empty() {
            if depth == 0 {
                return Err(not_fem("the kernel has no loops"));
            }
            break body;
        }
        if loops.len() > 1 {
            return Err(not_fem(format!(
                "nest shape: level {depth} holds {} loops, expected a single loop nest",
                loops.len()
            )));
        }
        let l = loops[0];
        let inferred = classify_body(l, &deps);
        if l.declared && l.class != LoopClass::OrderFree && l.class != inferred {
            return Err(not_fem(format!("loop `{}` is declared {} but classifies as {}", l.index, l.class, inferred)));
        }
        if !roles.linear.is_empty() {
            if body.len() != 1 {
                return Err(not_fem(format!("multilinear nest: loop `{}` is not perfectly nested", l.index)));
            }
            if inferred != LoopClass::Linear {
                return Err(not_fem(format!("multilinear nest: loop `{}` is {}, not linear", l.index, inferred)));
            }
            roles.linear.push(l.index.clone());
        } else if l.declared && l.class == LoopClass::OrderFree {
            if depth != 0 {
                return Err(not_fem(format!("order-free loop `{}` must be outermost", l.index)));
            }
            roles.element = Some(l.index.clone());
        } else if inferred == LoopClass::Reduction && roles.reduction.is_none() {
            roles.reduction = Some(l.index.clone());
            roles.reduction_perfect = Some(l.body.len() == 1);
        } else if inferred == LoopClass::Linear {
            roles.linear.push(l.index.clone());
        } else {
            return Err(not_fem(format!(
                "loop `{}` classifies as {}; an element nest needs reduction then linear loops",
                l.index, inferred
            )));
        }
        body = &l.body;
        depth += 1;
    };
    if roles.linear.is_empty() {
        return Err(not_fem("no multilinear nest: at least one linear loop is required"));
    }
    roles.arity = roles.linear.len();
    if roles.arity > 2 {
        return Err(not_fem(format!("multilinear nest of arity {} (only linear and bilinear forms)", roles.arity)));
    }
    let stmts: Vec<&Statement<T>> = innermost
        .iter()
        .filter_map(|n| match n {
            Node::Stmt(s) => Some(s),
            _ => None,
        })
        .collect();
    for s in &stmts {
        if s.op != Op::AugAdd || !kernel.outputs.contains_key(&s.lhs.name) {
            return Err(not_fem(format!("innermost statement `{} {} ...` must accumulate into an output", s.lhs, s.op)));
        }
    }
    check_independent(&stmts)?;
    Ok(ValidatedKernel { kernel: kernel.clone(), roles })
}

/// Rejects read-after-write, write-after-read and conflicting writes.
fn check_independent<T: Scalar>(stmts: &[&Statement<T>]) -> Result<()> {
    for (a, sa) in stmts.iter().enumerate() {
        for sb in &stmts[a + 1..] {
            if sb.rhs.mentions(&sa.lhs.name) {
                return Err(not_fem(format!(
                    "independent basic block: `{}` reads `{}` written earlier in the block",
                    sb.lhs, sa.lhs.name
                )));
            }
            if sa.rhs.mentions(&sb.lhs.name) {
                return Err(not_fem(format!(
                    "independent basic block: `{}` overwrites `{}` read earlier in the block",
                    sb.lhs, sb.lhs.name
                )));
            }
            if sa.lhs == sb.lhs && (sa.op == Op::Assign || sb.op == Op::Assign) {
                return Err(not_fem(format!("independent basic block: `{}` written twice", sa.lhs)));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::json::parse_kernel;
    use serde_json::json;

    fn kernel(loops: serde_json::Value, stmts: serde_json::Value) -> Kernel<f64> {
        let doc = json!({
            "indices": {"e": 2, "i": 3, "j": 3, "k": 3},
            "loops": loops,
            "tables": {
                "W": {"dims": ["i"], "values": [1.0, 2.0, 3.0]},
                "b": {"dims": ["i", "j"], "values": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]},
                "c": {"dims": ["i", "k"], "values": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]},
                "u": {"dims": ["j"], "values": [1.0, 2.0, 3.0]},
                "v": {"dims": ["k"], "values": [1.0, 2.0, 3.0]},
                "w": {"dims": ["k"], "values": [1.0, 2.0, 3.0]},
                "d": {"dims": ["j", "k"], "values": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]},
                "detJ": {"dims": ["e"], "values": [1.0, 2.0]}
            },
            "statements": stmts,
            "outputs": {"A": ["e", "j", "k"], "Y": ["j", "k"], "V": ["j"]}
        });
        parse_kernel(&doc.to_string()).unwrap()
    }

    fn jk() -> serde_json::Value {
        json!([{"index": "j"}, {"index": "k"}])
    }

    #[test]
    fn outer_product_loops_are_linear() {
        let k = kernel(jk(), json!([{"level": 2, "lhs": "Y[j][k]", "op": "+=", "rhs": ["*", "u[j]", "v[k]"]}]));
        assert_eq!(classify_loop(&k, "j").unwrap(), LoopClass::Linear);
        assert_eq!(classify_loop(&k, "k").unwrap(), LoopClass::Linear);
    }

    #[test]
    fn quadrature_loop_is_a_reduction() {
        let k = kernel(
            json!([{"index": "i"}, {"index": "j"}, {"index": "k"}]),
            json!([{"level": 3, "lhs": "Y[j][k]", "op": "+=", "rhs": ["*", "W[i]", "b[i][j]", "c[i][k]"]}]),
        );
        assert_eq!(classify_loop(&k, "i").unwrap(), LoopClass::Reduction);
    }

    #[test]
    fn quadratic_use_is_plain() {
        let k = kernel(
            json!([{"index": "j"}]),
            json!([{"level": 1, "lhs": "V[j]", "op": "+=", "rhs": ["*", "u[j]", "u[j]"]}]),
        );
        assert_eq!(classify_loop(&k, "j").unwrap(), LoopClass::Plain);
        assert!(matches!(classify_loop(&k, "q"), Err(Error::UnknownLoop(_))));
    }

    #[test]
    fn division_by_indexed_symbol_is_plain() {
        let k = kernel(
            json!([{"index": "j"}]),
            json!([{"level": 1, "lhs": "V[j]", "op": "+=", "rhs": ["/", 1.0, "u[j]"]}]),
        );
        assert_eq!(classify_loop(&k, "j").unwrap(), LoopClass::Plain);
    }

    #[test]
    fn multilinear_nests() {
        let k = kernel(jk(), json!([{"level": 2, "lhs": "Y[j][k]", "op": "+=", "rhs": ["*", "u[j]", "d[j][k]", "v[k]", "w[k]"]}]));
        assert!(is_multilinear(&k, &["j", "k"]));
        let k = kernel(jk(), json!([{"level": 2, "lhs": "Y[j][k]", "op": "+=", "rhs": ["+", ["*", "u[j]", "v[k]"], ["*", "v[k]", "v[k]"]]}]));
        assert!(!is_multilinear(&k, &["j", "k"]));
    }

    #[test]
    fn bilinear_nest_validates() {
        let k = kernel(
            json!([{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}, {"index": "k"}]),
            json!([
                {"level": 1, "lhs": "det", "op": "=", "rhs": "detJ[e]"},
                {"level": 4, "lhs": "A[e][j][k]", "op": "+=", "rhs": ["*", "det", "W[i]", "b[i][j]", "c[i][k]"]}
            ]),
        );
        let v = validate_fem_nest(&k).unwrap();
        assert_eq!(v.roles.arity, 2);
        assert_eq!(v.roles.element.as_deref(), Some("e"));
        assert_eq!(v.roles.reduction.as_deref(), Some("i"));
        assert_eq!(v.roles.reduction_perfect, Some(true));
        assert!(is_multilinear(&k, &["j", "k"]));
    }

    #[test]
    fn linear_form_has_arity_one() {
        let k = kernel(
            json!([{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}]),
            json!([{"level": 3, "lhs": "V[j]", "op": "+=", "rhs": ["*", "detJ[e]", "W[i]", "b[i][j]"]}]),
        );
        assert_eq!(validate_fem_nest(&k).unwrap().roles.arity, 1);
    }

    #[test]
    fn read_after_write_in_block_rejected() {
        let k = kernel(
            jk(),
            json!([
                {"level": 2, "lhs": "Y[j][k]", "op": "+=", "rhs": ["*", "u[j]", "v[k]"]},
                {"level": 2, "lhs": "A[0][j][k]", "op": "+=", "rhs": ["*", "Y[j][k]", "v[k]"]}
            ]),
        );
        let err = validate_fem_nest(&k).unwrap_err();
        assert!(matches!(&err, Error::NotFemNest(m) if m.contains("independent basic block")));
    }

    #[test]
    fn misdeclared_linear_loop_rejected() {
        let k = kernel(
            json!([{"index": "j", "class": "linear"}]),
            json!([{"level": 1, "lhs": "V[j]", "op": "+=", "rhs": ["*", "u[j]", "u[j]"]}]),
        );
        assert!(validate_fem_nest(&k).is_err());
    }
}

//! Exact floating point operation counts.

use super::expr::Expr;
use super::kernel::{Kernel, Node, Op, Statement};
use crate::scalar::Scalar;

/// Cost assigned to each operator kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlopModel {
    pub call_cost: u64,
}

impl Default for FlopModel {
    fn default() -> Self {
        FlopModel { call_cost: 1 }
    }
}

/// Operators evaluated by one execution of an expression.
pub fn expr_ops<T: Scalar>(e: &Expr<T>, model: &FlopModel) -> u64 {
    match e {
        Expr::Const(_) | Expr::Sym(_) => 0,
        Expr::Add(v) | Expr::Mul(v) => {
            v.len().saturating_sub(1) as u64 + v.iter().map(|c| expr_ops(c, model)).sum::<u64>()
        }
        Expr::Div(a, b) => 1 + expr_ops(a, model) + expr_ops(b, model),
        Expr::Call(_, v) => model.call_cost + v.iter().map(|c| expr_ops(c, model)).sum::<u64>(),
    }
}

/// Operators of a statement, counting the accumulation of `+=`.
pub fn statement_ops<T: Scalar>(s: &Statement<T>, model: &FlopModel) -> u64 {
    expr_ops(&s.rhs, model) + u64::from(s.op == Op::AugAdd)
}

pub fn body_flops<T: Scalar>(body: &[Node<T>], model: &FlopModel) -> u64 {
    body.iter()
        .map(|n| match n {
            Node::Stmt(s) => statement_ops(s, model),
            Node::Loop(l) => l.trips() as u64 * body_flops(&l.body, model),
        })
        .sum()
}

/// Total operations executed by the kernel with the default model.
pub fn flop_count<T: Scalar>(kernel: &Kernel<T>) -> u64 {
    flop_count_with(kernel, &FlopModel::default())
}

pub fn flop_count_with<T: Scalar>(kernel: &Kernel<T>, model: &FlopModel) -> u64 {
    body_flops(&kernel.body, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::expr::Symbol;

    #[test]
    fn single_statement_outside_loops() {
        let mut k = Kernel::<f64>::empty();
        let rhs = Expr::Add(vec![Expr::Mul(vec![Expr::var("a"), Expr::var("b")]), Expr::var("c")]);
        k.body.push(Node::Stmt(Statement::assign(Symbol::scalar("x"), rhs)));
        assert_eq!(flop_count(&k), 2);
    }

    #[test]
    fn calls_use_model_cost() {
        let e: Expr<f64> = Expr::Call("sqrt".into(), vec![Expr::Add(vec![Expr::var("a"), Expr::var("b")])]);
        assert_eq!(expr_ops(&e, &FlopModel::default()), 2);
        assert_eq!(expr_ops(&e, &FlopModel { call_cost: 10 }), 11);
    }
}

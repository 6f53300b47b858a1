use crate::ir::Expr;
use crate::scalar::Scalar;

/// Canonical form: flattened sums and products, sorted operands, folded
/// constants.
pub fn reassociate<T: Scalar>(e: &Expr<T>) -> Expr<T> {
    match e {
        Expr::Const(_) | Expr::Sym(_) => e.clone(),
        Expr::Add(v) => {
            let mut terms = Vec::new();
            let mut c = T::zero();
            for t in v.iter().map(reassociate) {
                match t {
                    Expr::Add(inner) => terms.extend(inner),
                    Expr::Const(x) => c = c + x,
                    other => terms.push(other),
                }
            }
            let mut terms: Vec<_> = terms
                .into_iter()
                .filter_map(|t| match t {
                    Expr::Const(x) => {
                        c = c.clone() + x;
                        None
                    }
                    other => Some(other),
                })
                .collect();
            if !c.is_zero() {
                terms.push(Expr::Const(c));
            }
            terms.sort_by(|a, b| a.canonical_cmp(b));
            Expr::add(terms)
        }
        Expr::Mul(v) => {
            let mut factors = Vec::new();
            let mut c = T::one();
            for f in v.iter().map(reassociate) {
                match f {
                    Expr::Mul(inner) => {
                        for g in inner {
                            match g {
                                Expr::Const(x) => c = c * x,
                                other => factors.push(other),
                            }
                        }
                    }
                    Expr::Const(x) => c = c * x,
                    other => factors.push(other),
                }
            }
            if c.is_zero() {
                return Expr::Const(c);
            }
            if !c.is_one() {
                factors.push(Expr::Const(c));
            }
            factors.sort_by(|a, b| a.canonical_cmp(b));
            Expr::mul(factors)
        }
        Expr::Div(a, b) => {
            let (a, b) = (reassociate(a), reassociate(b));
            match (&a, &b) {
                (_, d) if d.is_one() => a,
                (Expr::Const(x), Expr::Const(y)) if !y.is_zero() => Expr::Const(x.clone() / y.clone()),
                _ => Expr::div(a, b),
            }
        }
        Expr::Call(n, v) => {
            let args: Vec<_> = v.iter().map(reassociate).collect();
            let consts: Option<Vec<T>> = args
                .iter()
                .map(|a| match a {
                    Expr::Const(x) => Some(x.clone()),
                    _ => None,
                })
                .collect();
            match consts.and_then(|c| T::call(n, &c)) {
                Some(v) => Expr::Const(v),
                None => Expr::Call(n.clone(), args),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type E = Expr<f64>;

    #[test]
    fn flattens_nested_products() {
        let e = E::Mul(vec![E::Mul(vec![E::var("b"), E::var("a")]), E::var("c")]);
        assert_eq!(reassociate(&e).key(), "(* a b c)");
    }

    #[test]
    fn folds_constants() {
        let e = E::Mul(vec![E::num(2.0), E::num(3.0), E::var("x")]);
        assert_eq!(reassociate(&e).key(), "(* #6.0 x)");
        let e = E::Add(vec![E::num(1.0), E::var("x"), E::num(-1.0)]);
        assert_eq!(reassociate(&e).key(), "x");
        let e = E::Mul(vec![E::num(0.0), E::var("x")]);
        assert!(reassociate(&e).is_zero());
    }

    #[test]
    fn sorts_into_syntactic_identity() {
        let e = E::Add(vec![E::Mul(vec![E::var("b"), E::var("a")]), E::Mul(vec![E::var("a"), E::var("b")])]);
        let r = reassociate(&e);
        assert_eq!(r.key(), "(+ (* a b) (* a b))");
        let E::Add(v) = r else { panic!() };
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn folds_constant_calls_and_unit_division() {
        let e = E::Call("sqrt".into(), vec![E::num(9.0)]);
        assert_eq!(reassociate(&e), E::num(3.0));
        let e = E::div(E::var("x"), E::num(1.0));
        assert_eq!(reassociate(&e), E::var("x"));
    }
}

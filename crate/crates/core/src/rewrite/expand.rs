use std::collections::{BTreeMap, BTreeSet};

use super::reassociate::reassociate;
use crate::error::{Error, Result};
use crate::ir::flops::{expr_ops, FlopModel};
use crate::ir::{Expr, Symbol};
use crate::scalar::Scalar;

/// Matches a symbol against target names, given either bare (`b`) or with
/// subscripts (`b[i][j]`).
pub fn target_matcher(targets: &BTreeSet<String>) -> impl Fn(&Symbol) -> bool + '_ {
    move |s: &Symbol| targets.contains(&s.name) || targets.contains(&s.to_string())
}

/// Distributes products over sums until every target symbol sits in a
/// top-level summand whose other factors are target-free.
pub fn expand<T: Scalar>(e: &Expr<T>, targets: &BTreeSet<String>) -> Result<Expr<T>> {
    expand_with(e, &target_matcher(targets))
}

pub fn expand_with<T: Scalar>(e: &Expr<T>, is_target: &impl Fn(&Symbol) -> bool) -> Result<Expr<T>> {
    let terms = expanded_terms(e, is_target)?;
    let mut groups: BTreeMap<String, (Vec<Expr<T>>, Vec<Expr<T>>)> = BTreeMap::new();
    for factors in terms {
        let (mut tg, rest): (Vec<_>, Vec<_>) =
            factors.into_iter().partition(|f| matches!(f, Expr::Sym(s) if is_target(s)));
        tg.sort_by(|a, b| a.canonical_cmp(b));
        let key = tg.iter().map(Expr::key).collect::<Vec<_>>().join("*");
        let entry = groups.entry(key).or_insert_with(|| (tg, Vec::new()));
        entry.1.push(Expr::mul(rest));
    }
    let mut out = Vec::new();
    for (_, (tg, coefs)) in groups {
        let coef = reassociate(&Expr::add(coefs));
        if coef.is_zero() {
            continue;
        }
        let mut factors = tg;
        factors.push(coef);
        out.push(reassociate(&Expr::mul(factors)));
    }
    Ok(reassociate(&Expr::add(out)))
}

/// Fully distributed terms as factor lists; target-free subtrees stay whole.
pub fn expanded_terms<T: Scalar>(e: &Expr<T>, is_target: &impl Fn(&Symbol) -> bool) -> Result<Vec<Vec<Expr<T>>>> {
    if !e.contains(is_target) {
        return Ok(vec![vec![e.clone()]]);
    }
    match e {
        Expr::Const(_) | Expr::Sym(_) => Ok(vec![vec![e.clone()]]),
        Expr::Add(v) => {
            let mut out = Vec::new();
            for c in v {
                out.extend(expanded_terms(c, is_target)?);
            }
            Ok(out)
        }
        Expr::Mul(v) => {
            let mut acc: Vec<Vec<Expr<T>>> = vec![Vec::new()];
            for c in v {
                let ts = expanded_terms(c, is_target)?;
                let mut next = Vec::with_capacity(acc.len() * ts.len());
                for a in &acc {
                    for t in &ts {
                        let mut f = a.clone();
                        f.extend(t.iter().cloned());
                        next.push(f);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
        Expr::Div(a, b) => {
            if let Some(s) = first_target(b, is_target) {
                return Err(Error::NonDistributable(s.to_string()));
            }
            let inv = Expr::div(Expr::one(), (**b).clone());
            let mut out = expanded_terms(a, is_target)?;
            for t in out.iter_mut() {
                t.push(inv.clone());
            }
            Ok(out)
        }
        Expr::Call(..) => {
            let s = first_target(e, is_target).expect("contains a target");
            Err(Error::NonDistributable(s.to_string()))
        }
    }
}

fn first_target<T: Scalar>(e: &Expr<T>, is_target: &impl Fn(&Symbol) -> bool) -> Option<Symbol> {
    e.symbols().into_iter().find(|s| is_target(s))
}

/// Multiplications added by expanding `e` over the targets.
pub fn expansion_cost<T: Scalar>(e: &Expr<T>, targets: &BTreeSet<String>) -> Result<u64> {
    let model = FlopModel::default();
    let before = expr_ops(e, &model);
    let after = expr_ops(&expand(e, targets)?, &model);
    Ok(after.saturating_sub(before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::eval::Evaluator;
    use crate::ir::Kernel;

    type E = Expr<f64>;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn eval_at(e: &E, vals: &[(&str, f64)]) -> f64 {
        let mut k = Kernel::<f64>::empty();
        for (n, v) in vals {
            k.constants.insert(n.to_string(), E::num(*v));
        }
        Evaluator::new(&k).unwrap().eval(e, &[]).unwrap()
    }

    #[test]
    fn square_of_two_term_sum() {
        let p = E::Add(vec![
            E::Mul(vec![E::var("a"), E::var("v0")]),
            E::Mul(vec![E::var("b"), E::var("v1")]),
        ]);
        let e = E::Mul(vec![p.clone(), p]);
        let x = expand(&e, &set(&["v0", "v1"])).unwrap();
        let E::Add(terms) = &x else { panic!("{x}") };
        assert_eq!(terms.len(), 3);
        let mixed = terms.iter().find(|t| t.mentions("v0") && t.mentions("v1")).unwrap();
        assert!(mixed.factors().iter().any(|f| f.key() == "(+ (* a b) (* a b))"), "{mixed}");
        let vals = [("a", 1.5), ("b", -0.5), ("v0", 2.0), ("v1", 3.0)];
        assert_eq!(eval_at(&e, &vals), eval_at(&x, &vals));
    }

    #[test]
    fn distributes_over_target_sum() {
        let e = E::Mul(vec![E::var("c"), E::Add(vec![E::var("x"), E::var("y")])]);
        let x = expand(&e, &set(&["x"])).unwrap();
        assert_eq!(x.key(), "(+ (* c x) (* c y))");
    }

    #[test]
    fn square_with_constant() {
        let p = E::Add(vec![E::var("x"), E::num(1.0)]);
        let e = E::Mul(vec![p.clone(), p]);
        let x = expand(&e, &set(&["x"])).unwrap();
        assert_eq!(x.summands().len(), 3);
        for v in [-2.0, 0.0, 3.0] {
            assert_eq!(eval_at(&e, &[("x", v)]), eval_at(&x, &[("x", v)]));
        }
    }

    #[test]
    fn non_target_sums_stay_whole() {
        let e = E::Mul(vec![E::var("x"), E::Add(vec![E::var("a"), E::var("b")])]);
        let x = expand(&e, &set(&["x"])).unwrap();
        assert_eq!(x.key(), "(* x (+ a b))");
    }

    #[test]
    fn division_by_target_rejected() {
        let e = E::div(E::var("a"), E::Add(vec![E::var("x"), E::var("b")]));
        assert_eq!(expand(&e, &set(&["x"])), Err(Error::NonDistributable("x".into())));
        let e = E::Call("sqrt".into(), vec![E::var("x")]);
        assert!(expand(&e, &set(&["x"])).is_err());
    }

    #[test]
    fn expansion_cost_counts_new_products() {
        let e = E::Mul(vec![E::var("c"), E::Add(vec![E::var("x"), E::var("y")])]);
        assert_eq!(expansion_cost(&e, &set(&["x", "y"])).unwrap(), 1);
    }
}

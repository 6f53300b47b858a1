use std::collections::BTreeSet;

use super::reassociate::reassociate;
use crate::ir::{Expr, Symbol};
use crate::scalar::Scalar;

/// Collects each target across the summands of a sum of products, left to
/// right; coefficients are factorized recursively for the remaining targets.
pub fn factorize<T: Scalar>(e: &Expr<T>, targets: &[String]) -> Expr<T> {
    let mut syms: Vec<Symbol> = Vec::new();
    let all = e.symbols();
    for t in targets {
        for s in &all {
            if (&s.name == t || &s.to_string() == t) && !syms.contains(s) {
                syms.push(s.clone());
            }
        }
    }
    factorize_syms(e, &syms)
}

pub fn factorize_syms<T: Scalar>(e: &Expr<T>, targets: &[Symbol]) -> Expr<T> {
    reassociate(&collect(reassociate(e).summands(), targets))
}

fn strip_one<T: Scalar>(term: &Expr<T>, t: &Symbol) -> Option<Expr<T>> {
    let mut factors = term.factors();
    let pos = factors.iter().position(|f| matches!(f, Expr::Sym(s) if s == t))?;
    factors.remove(pos);
    Some(Expr::mul(factors))
}

fn collect<T: Scalar>(summands: Vec<Expr<T>>, targets: &[Symbol]) -> Expr<T> {
    let Some((t, rest)) = targets.split_first() else { return Expr::add(summands) };
    let mut coef = Vec::new();
    let mut others = Vec::new();
    for s in &summands {
        match strip_one(s, t) {
            Some(c) => coef.push(c),
            None => others.push(s.clone()),
        }
    }
    if coef.len() < 2 {
        return collect(summands, rest);
    }
    let inner = collect(reassociate(&Expr::add(coef)).summands(), rest);
    let mut out = vec![Expr::Mul(vec![Expr::Sym(t.clone()), inner])];
    if !others.is_empty() {
        out.push(collect(others, rest));
    }
    Expr::add(out)
}

/// Factors common to every summand, pulled out: `g*(r1 + r2 + ...)`.
pub fn extract_common<T: Scalar>(e: &Expr<T>) -> Expr<T> {
    let e = reassociate(e);
    let summands = e.summands();
    if summands.len() < 2 {
        return e;
    }
    let mut common: Vec<Expr<T>> = summands[0].factors().into_iter().filter(|f| !f.is_const()).collect();
    for s in &summands[1..] {
        let mut fs = s.factors();
        common.retain(|c| match fs.iter().position(|f| f == c) {
            Some(p) => {
                fs.remove(p);
                true
            }
            None => false,
        });
    }
    if common.is_empty() {
        return e;
    }
    let rests: Vec<Expr<T>> = summands
        .iter()
        .map(|s| {
            let mut fs = s.factors();
            for c in &common {
                let p = fs.iter().position(|f| f == c).expect("common factor present");
                fs.remove(p);
            }
            Expr::mul(fs)
        })
        .collect();
    let mut factors = common;
    factors.push(extract_common(&Expr::add(rests)));
    reassociate(&Expr::mul(factors))
}

/// Distinct symbols selected by `pred`, in first-visit order.
pub fn symbols_where<T: Scalar>(e: &Expr<T>, pred: impl Fn(&Symbol) -> bool) -> Vec<Symbol> {
    let mut seen = BTreeSet::new();
    e.symbols().into_iter().filter(|s| pred(s) && seen.insert(s.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    type E = Expr<f64>;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn shared_test_function_is_collected() {
        let e = E::Add(vec![
            E::Mul(vec![E::var("b[j]"), E::var("c[i]")]),
            E::Mul(vec![E::var("b[j]"), E::var("d[i]")]),
        ]);
        let f = factorize(&e, &names(&["b[j]"]));
        assert_eq!(f.key(), "(* b[j] (+ c[i] d[i]))");
    }

    #[test]
    fn common_symbol_factorized() {
        let e = E::Add(vec![E::Mul(vec![E::var("x"), E::var("a")]), E::Mul(vec![E::var("y"), E::var("a")])]);
        assert_eq!(factorize(&e, &names(&["a"])).key(), "(* a (+ x y))");
    }

    #[test]
    fn single_occurrence_left_alone() {
        let e = E::Add(vec![E::Mul(vec![E::var("t0"), E::var("t2")]), E::Mul(vec![E::var("t1"), E::var("t3")])]);
        assert_eq!(factorize(&e, &names(&["t0"])).key(), "(+ (* t0 t2) (* t1 t3))");
    }

    #[test]
    fn absent_targets_leave_expression() {
        let e = E::Mul(vec![E::var("x"), E::var("y")]);
        assert_eq!(factorize(&e, &names(&["q"])).key(), "(* x y)");
    }

    #[test]
    fn common_factors_extracted() {
        let e = E::Add(vec![
            E::Mul(vec![E::var("det"), E::var("W"), E::var("z0"), E::var("z0")]),
            E::Mul(vec![E::var("det"), E::var("W"), E::var("z1"), E::var("z1")]),
        ]);
        assert_eq!(extract_common(&e).key(), "(* W det (+ (* z0 z0) (* z1 z1)))");
    }
}

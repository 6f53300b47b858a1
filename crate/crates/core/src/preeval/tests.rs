use serde_json::json;

use super::*;
use crate::ir::eval::relative_error;
use crate::ir::{evaluate, flop_count, parse_kernel, validate_fem_nest, Expr, LoopCtx, ValidatedKernel};
use crate::Error;

fn validated(doc: serde_json::Value) -> ValidatedKernel<f64> {
    validate_fem_nest(&parse_kernel(&doc.to_string()).unwrap()).unwrap()
}

fn basis(i: usize, j: usize, seed: f64) -> Vec<f64> {
    (0..i * j).map(|n| ((n as f64 + 1.0) * seed).sin()).collect()
}

/// `A[e][j][k] += f * B[i][j] * B[i][k] * W[i] * det` with `f` a coefficient
/// over three basis values.
fn coefficient_mass(quad: usize) -> ValidatedKernel<f64> {
    validated(json!({
        "indices": {"e": 2, "i": quad, "j": 3, "k": 3, "n": 3},
        "loops": [{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}, {"index": "k"}],
        "tables": {
            "B": {"dims": ["i", "j"], "values": basis(quad, 3, 0.7)},
            "W": {"dims": ["i"], "values": basis(quad, 1, 0.3)},
            "F": {"dims": ["e", "n"], "values": [1.0, 2.0, 3.0, -1.0, 0.5, 2.5]},
            "D": {"dims": ["e"], "values": [0.5, 2.0]}
        },
        "statements": [{"level": 4, "lhs": "A[e][j][k]", "op": "+=", "rhs": ["*", "B[i][j]", "B[i][k]", "W[i]", "D[e]",
            ["+", ["*", "F[e][0]", "B[i][0]"], ["*", "F[e][1]", "B[i][1]"], ["*", "F[e][2]", "B[i][2]"]]]}],
        "outputs": {"A": ["e", "j", "k"]}
    }))
}

fn plain_mass() -> ValidatedKernel<f64> {
    validated(json!({
        "indices": {"e": 3, "i": 4, "j": 3, "k": 3},
        "loops": [{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}, {"index": "k"}],
        "tables": {
            "B": {"dims": ["i", "j"], "values": basis(4, 3, 0.9)},
            "W": {"dims": ["i"], "values": basis(4, 1, 0.4)},
            "D": {"dims": ["e"], "values": [0.5, 2.0, -1.5]}
        },
        "statements": [{"level": 4, "lhs": "A[e][j][k]", "op": "+=", "rhs": ["*", "B[i][j]", "B[i][k]", "W[i]", "D[e]"]}],
        "outputs": {"A": ["e", "j", "k"]}
    }))
}

fn poisson() -> ValidatedKernel<f64> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../kernels/poisson.json")).unwrap();
    validate_fem_nest(&parse_kernel(&text).unwrap()).unwrap()
}

fn equivalent(a: &crate::ir::Kernel<f64>, b: &crate::ir::Kernel<f64>) -> f64 {
    relative_error(&evaluate(a).unwrap(), &evaluate(b).unwrap())
}

#[test]
fn mass_monomial_reduces_to_one_scaled_table() {
    let k = plain_mass();
    let out = preevaluate(&k, &[0]).unwrap();
    assert_eq!(out.tables.len(), 1);
    assert!(out.summary.reduction_removed);
    let stmts: Vec<String> = {
        let mut v = Vec::new();
        out.kernel.visit_statements(&mut |_, s| v.push(s.rhs.to_string()));
        v
    };
    assert_eq!(stmts.len(), 1);
    assert!(stmts[0].contains("D[e]*pre0[j][k]") || stmts[0].contains("pre0[j][k]*D[e]"), "{}", stmts[0]);
    assert_eq!(flop_count(&out.kernel), 3 * 2 * 9);
    assert!(equivalent(&k, &out.kernel) < 1e-12);
}

#[test]
fn coefficient_expands_into_three_terms() {
    let k = coefficient_mass(6);
    let ms = split_monomials(&k).unwrap();
    assert_eq!((ms[0].k, ms[0].n), (1, 3));
    let sep = isolate_reduction_terms(&k, &ms[0]).unwrap();
    assert_eq!(sep.rho(), 3);
    let out = preevaluate(&k, &[0]).unwrap();
    assert_eq!(out.tables.len(), 3);
    assert!(equivalent(&k, &out.kernel) < 1e-12);
}

#[test]
fn poisson_needs_three_reference_tables() {
    let k = poisson();
    let ms = split_monomials(&k).unwrap();
    assert_eq!(ms.len(), 1);
    assert_eq!(ms[0].k, 0);
    assert_eq!(isolate_reduction_terms(&k, &ms[0]).unwrap().rho(), 3);
    let out = preevaluate(&k, &[0]).unwrap();
    assert!(equivalent(&k, &out.kernel) < 1e-12);
}

#[test]
fn predicted_flops_match_transformed_kernel() {
    for k in [plain_mass(), coefficient_mass(6), coefficient_mass(2), poisson()] {
        let plan = plan_preevaluation(&k, &[0]).unwrap();
        let residual = restrict(&k, "i", &|_| false);
        let out = preevaluate(&k, &[0]).unwrap();
        assert_eq!(flop_count(&out.kernel), flop_count(&residual) + plan.flops());
    }
}

#[test]
fn reduce_matches_unrolled_sum() {
    let k = plain_mass();
    let tau = Expr::mul(vec![Expr::var("W[i]"), Expr::var("B[i][j]"), Expr::var("B[i][k]")]);
    let ctx = |n: &str, e: usize| LoopCtx { index: n.into(), class: crate::ir::LoopClass::Linear, start: 0, end: e, hoisted: false };
    let t = symbolic_reduce(&k, &tau, &ctx("i", 4), &[ctx("j", 3), ctx("k", 3)]).unwrap();
    let b = &k.tables["B"].values;
    let w = &k.tables["W"].values;
    let mut expect = 0.0;
    for i in 0..4 {
        expect += w[i] * b[i * 3] * b[i * 3];
    }
    assert_eq!(t.values[0], expect);
    assert_eq!(t.dims, vec!["j", "k"]);
    let scalar = symbolic_reduce(&k, &Expr::var("W[i]"), &ctx("i", 4), &[ctx("j", 3)]).unwrap();
    assert!(scalar.dims.is_empty());
    assert_eq!(scalar.values.len(), 1);
}

#[test]
fn identical_tables_are_shared() {
    let k = validated(json!({
        "indices": {"e": 2, "i": 3, "j": 2, "k": 2},
        "loops": [{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}, {"index": "k"}],
        "tables": {
            "B": {"dims": ["i", "j"], "values": basis(3, 2, 0.5)},
            "C": {"dims": ["i", "j"], "values": basis(3, 2, 0.5)},
            "D": {"dims": ["e"], "values": [0.5, 2.0]},
            "G": {"dims": ["e"], "values": [1.5, -2.0]}
        },
        "statements": [{"level": 4, "lhs": "A[e][j][k]", "op": "+=",
            "rhs": ["+", ["*", "B[i][j]", "B[i][k]", "D[e]"], ["*", "C[i][j]", "C[i][k]", "G[e]"]]}],
        "outputs": {"A": ["e", "j", "k"]}
    }));
    let out = preevaluate(&k, &[0, 1]).unwrap();
    assert_eq!(out.tables.len(), 1);
    assert_eq!(out.summary.deduplicated.len(), 1);
    assert!(equivalent(&k, &out.kernel) < 1e-12);
}

#[test]
fn partial_choice_keeps_reduction_loop() {
    let k = validated(json!({
        "indices": {"e": 2, "i": 3, "j": 2, "k": 2},
        "loops": [{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}, {"index": "k"}],
        "tables": {
            "B": {"dims": ["i", "j"], "values": basis(3, 2, 0.5)},
            "X": {"dims": ["e", "i"], "values": basis(2, 3, 0.8)},
            "D": {"dims": ["e"], "values": [0.5, 2.0]}
        },
        "statements": [{"level": 4, "lhs": "A[e][j][k]", "op": "+=",
            "rhs": ["+", ["*", "B[i][j]", "B[i][k]", "D[e]"], ["*", "B[i][j]", "B[i][k]", "X[e][i]"]]}],
        "outputs": {"A": ["e", "j", "k"]}
    }));
    let ms = split_monomials(&k).unwrap();
    assert!(matches!(isolate_reduction_terms(&k, &ms[1]), Err(Error::NonSeparable(_))));
    let out = preevaluate(&k, &[0]).unwrap();
    assert!(!out.summary.reduction_removed);
    assert!(out.kernel.loops().iter().any(|l| l.index == "i"));
    assert!(equivalent(&k, &out.kernel) < 1e-12);
}

#[test]
fn empty_choice_is_identity() {
    let k = poisson();
    let out = preevaluate(&k, &[]).unwrap();
    assert_eq!(&out.kernel, k.kernel());
}

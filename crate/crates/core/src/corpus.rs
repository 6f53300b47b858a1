//! Test kernels covering the common integration shapes: mass, stiffness,
//! Helmholtz, elasticity-like vector forms, load vectors, and coefficient
//! variants. Tables are filled from a fixed seed so every build sees the same
//! numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::Result;
use crate::ir::{parse_kernel, Kernel};
use crate::scalar::Scalar;

/// One corpus entry.
#[derive(Clone, Debug)]
pub struct CorpusKernel<T> {
    pub name: &'static str,
    pub kernel: Kernel<T>,
    /// Number of linear loops.
    pub arity: usize,
    /// Whether some table carries zero column blocks.
    pub padded: bool,
}

const POISSON: &str = include_str!("../../../kernels/poisson.json");

/// Two triangles.
const COORDS: [f64; 12] = [0.0, 0.0, 1.5, 0.25, 0.2, 1.1, 1.0, 1.0, 2.0, 1.25, 0.75, 2.5];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn signed(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    fn positive(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(0.05..0.5)).collect()
    }
}

/// Places a `q x n` block at component `comp` of a `q x (ncomp * n)` table.
fn pad(block: &[f64], q: usize, n: usize, comp: usize, ncomp: usize) -> Vec<f64> {
    let mut out = vec![0.0; q * n * ncomp];
    for i in 0..q {
        for j in 0..n {
            out[i * n * ncomp + comp * n + j] = block[i * n + j];
        }
    }
    out
}

fn geometry() -> Vec<Value> {
    let s = |lhs: &str, rhs: Value| json!({"level": 1, "lhs": lhs, "op": "=", "rhs": rhs});
    vec![
        s("j00", json!(["-", "X[e][2]", "X[e][0]"])),
        s("j01", json!(["-", "X[e][4]", "X[e][0]"])),
        s("j10", json!(["-", "X[e][3]", "X[e][1]"])),
        s("j11", json!(["-", "X[e][5]", "X[e][1]"])),
        s("det", json!(["-", ["*", "j00", "j11"], ["*", "j01", "j10"]])),
        s("z0", json!(["/", "j11", "det"])),
        s("z1", json!(["/", ["-", "j01"], "det"])),
        s("z2", json!(["/", ["-", "j10"], "det"])),
        s("z3", json!(["/", "j00", "det"])),
    ]
}

/// Physical x and y derivatives of a basis function from reference tables.
fn grad(dx: &str, dy: &str, f: &str) -> (Value, Value) {
    let a = format!("{dx}[i][{f}]");
    let b = format!("{dy}[i][{f}]");
    (json!(["+", ["*", "z0", a], ["*", "z2", b]]), json!(["+", ["*", "z1", a], ["*", "z3", b]]))
}

fn dot_grad(dx: &str, dy: &str) -> Value {
    let (xk, yk) = grad(dx, dy, "k");
    let (xj, yj) = grad(dx, dy, "j");
    json!(["+", ["*", xk, xj], ["*", yk, yj]])
}

/// Coefficient interpolated from element data `F` over basis table `B`.
fn coefficient(f: &str, b: &str, n: usize) -> Value {
    let mut v = vec![json!("+")];
    for c in 0..n {
        v.push(json!(["*", format!("{f}[e][{c}]"), format!("{b}[i][{c}]")]));
    }
    Value::Array(v)
}

struct Spec {
    q: usize,
    n: usize,
    arity: usize,
    tables: Value,
    extra_indices: Vec<(&'static str, usize)>,
    rhs: Value,
}

fn build(s: Spec) -> Value {
    let mut indices = json!({"e": 2, "i": s.q, "j": s.n, "c": 6});
    if s.arity == 2 {
        indices["k"] = json!(s.n);
    }
    for (name, ext) in &s.extra_indices {
        indices[*name] = json!(ext);
    }
    let mut loops = vec![json!({"index": "e", "class": "order-free"}), json!({"index": "i"}), json!({"index": "j"})];
    let (lhs, out) = if s.arity == 2 {
        loops.push(json!({"index": "k"}));
        ("A[e][j][k]", json!(["e", "j", "k"]))
    } else {
        ("A[e][j]", json!(["e", "j"]))
    };
    let mut stmts = geometry();
    stmts.push(json!({"level": 2 + s.arity, "lhs": lhs, "op": "+=", "rhs": s.rhs}));
    let mut tables = s.tables;
    tables["X"] = json!({"dims": ["e", "c"], "values": COORDS});
    json!({"indices": indices, "loops": loops, "tables": tables, "statements": stmts, "outputs": {"A": out}})
}

fn mass(g: &mut Gen, q: usize, n: usize) -> Value {
    build(Spec {
        q,
        n,
        arity: 2,
        tables: json!({"B": {"dims": ["i", "j"], "values": g.signed(q * n)}, "W": {"dims": ["i"], "values": g.positive(q)}}),
        extra_indices: vec![],
        rhs: json!(["*", "B[i][j]", "B[i][k]", "W[i]", "det"]),
    })
}

fn weighted_mass(g: &mut Gen, q: usize, n: usize, coeffs: usize) -> Value {
    let mut rhs = vec![json!("*"), json!("B[i][j]"), json!("B[i][k]"), json!("W[i]"), json!("det")];
    let mut tables = json!({"B": {"dims": ["i", "j"], "values": g.signed(q * n)}, "W": {"dims": ["i"], "values": g.positive(q)}});
    for (c, name) in ["F", "G"].iter().take(coeffs).enumerate() {
        tables[*name] = json!({"dims": ["e", "n"], "values": g.signed(2 * 3)});
        tables[format!("P{c}")] = json!({"dims": ["i", "n"], "values": g.signed(q * 3)});
        rhs.push(coefficient(name, &format!("P{c}"), 3));
    }
    build(Spec { q, n, arity: 2, tables, extra_indices: vec![("n", 3)], rhs: Value::Array(rhs) })
}

fn stiffness_tables(g: &mut Gen, q: usize, n: usize) -> Value {
    json!({
        "a": {"dims": ["i", "j"], "values": g.signed(q * n)},
        "b": {"dims": ["i", "j"], "values": g.signed(q * n)},
        "W": {"dims": ["i"], "values": g.positive(q)}
    })
}

fn helmholtz(g: &mut Gen, q: usize, n: usize) -> Value {
    let mut tables = stiffness_tables(g, q, n);
    tables["B"] = json!({"dims": ["i", "j"], "values": g.signed(q * n)});
    let rhs = json!(["*", ["+", dot_grad("a", "b"), ["*", -4.0, "B[i][j]", "B[i][k]"]], "det", "W[i]"]);
    build(Spec { q, n, arity: 2, tables, extra_indices: vec![], rhs })
}

fn coefficient_poisson(g: &mut Gen, q: usize, n: usize) -> Value {
    let mut tables = stiffness_tables(g, q, n);
    tables["K"] = json!({"dims": ["e", "n"], "values": g.signed(6)});
    tables["P"] = json!({"dims": ["i", "n"], "values": g.signed(q * 3)});
    let rhs = json!(["*", dot_grad("a", "b"), coefficient("K", "P", 3), "det", "W[i]"]);
    build(Spec { q, n, arity: 2, tables, extra_indices: vec![("n", 3)], rhs })
}

fn advection(g: &mut Gen, q: usize, n: usize) -> Value {
    let mut tables = stiffness_tables(g, q, n);
    tables["B"] = json!({"dims": ["i", "j"], "values": g.signed(q * n)});
    tables["U"] = json!({"dims": ["e", "n"], "values": g.signed(6)});
    tables["V"] = json!({"dims": ["e", "n"], "values": g.signed(6)});
    tables["P"] = json!({"dims": ["i", "n"], "values": g.signed(q * 3)});
    let (xk, yk) = grad("a", "b", "k");
    let rhs = json!(["*", ["+", ["*", coefficient("U", "P", 3), xk], ["*", coefficient("V", "P", 3), yk]], "B[i][j]", "det", "W[i]"]);
    build(Spec { q, n, arity: 2, tables, extra_indices: vec![("n", 3)], rhs })
}

fn load(g: &mut Gen, q: usize, n: usize, with_coefficient: bool) -> Value {
    let mut tables = json!({"B": {"dims": ["i", "j"], "values": g.signed(q * n)}, "W": {"dims": ["i"], "values": g.positive(q)}});
    let mut rhs = vec![json!("*"), json!("B[i][j]"), json!("W[i]"), json!("det")];
    let mut extra = vec![];
    if with_coefficient {
        tables["F"] = json!({"dims": ["e", "n"], "values": g.signed(6)});
        tables["P"] = json!({"dims": ["i", "n"], "values": g.signed(q * 3)});
        rhs.push(coefficient("F", "P", 3));
        extra.push(("n", 3));
    }
    build(Spec { q, n, arity: 1, tables, extra_indices: extra, rhs: Value::Array(rhs) })
}

fn load_gradient(g: &mut Gen, q: usize, n: usize) -> Value {
    let mut tables = stiffness_tables(g, q, n);
    tables["F"] = json!({"dims": ["e", "i"], "values": g.signed(2 * q)});
    let (xj, yj) = grad("a", "b", "j");
    let rhs = json!(["*", ["+", ["*", 0.5, xj], ["*", -1.5, yj]], "F[e][i]", "det", "W[i]"]);
    build(Spec { q, n, arity: 1, tables, extra_indices: vec![], rhs })
}

fn point_coefficient_mass(g: &mut Gen, q: usize, n: usize) -> Value {
    let tables = json!({
        "B": {"dims": ["i", "j"], "values": g.signed(q * n)},
        "W": {"dims": ["i"], "values": g.positive(q)},
        "R": {"dims": ["e", "i"], "values": g.positive(2 * q)}
    });
    let rhs = json!(["*", "B[i][j]", "B[i][k]", "R[e][i]", "W[i]", ["sqrt", ["*", "det", "det"]]]);
    build(Spec { q, n, arity: 2, tables, extra_indices: vec![], rhs })
}

/// Scalar basis padded into two vector components.
fn vector_tables(g: &mut Gen, q: usize, n: usize, names: &[&str]) -> Value {
    let mut t = json!({"W": {"dims": ["i"], "values": g.positive(q)}});
    for name in names {
        let block = g.signed(q * n);
        for c in 0..2 {
            t[format!("{name}{c}")] = json!({"dims": ["i", "j"], "values": pad(&block, q, n, c, 2)});
        }
    }
    t
}

fn vector_mass(g: &mut Gen, q: usize, n: usize) -> Value {
    let tables = vector_tables(g, q, n, &["V"]);
    let rhs = json!(["*", ["+", ["*", "V0[i][j]", "V0[i][k]"], ["*", "V1[i][j]", "V1[i][k]"]], "W[i]", "det"]);
    build(Spec { q, n: 2 * n, arity: 2, tables, extra_indices: vec![], rhs })
}

fn vector_laplace(g: &mut Gen, q: usize, n: usize) -> Value {
    let tables = vector_tables(g, q, n, &["a", "b"]);
    let rhs = json!(["*", ["+", dot_grad("a0", "b0"), dot_grad("a1", "b1")], "W[i]", "det"]);
    build(Spec { q, n: 2 * n, arity: 2, tables, extra_indices: vec![], rhs })
}

fn elastic(g: &mut Gen, q: usize, n: usize) -> Value {
    let tables = vector_tables(g, q, n, &["a", "b"]);
    let div = |f: &str| {
        let (x0, _) = grad("a0", "b0", f);
        let (_, y1) = grad("a1", "b1", f);
        json!(["+", x0, y1])
    };
    let rhs = json!(["*", ["+", ["*", 2.0, ["+", dot_grad("a0", "b0"), dot_grad("a1", "b1")]], ["*", div("k"), div("j")]], "W[i]", "det"]);
    build(Spec { q, n: 2 * n, arity: 2, tables, extra_indices: vec![], rhs })
}

fn vector_load(g: &mut Gen, q: usize, n: usize) -> Value {
    let mut tables = vector_tables(g, q, n, &["V"]);
    tables["F"] = json!({"dims": ["e", "i"], "values": g.signed(2 * q)});
    tables["H"] = json!({"dims": ["e", "i"], "values": g.signed(2 * q)});
    let rhs = json!(["*", ["+", ["*", "F[e][i]", "V0[i][j]"], ["*", "H[e][i]", "V1[i][j]"]], "W[i]", "det"]);
    build(Spec { q, n: 2 * n, arity: 1, tables, extra_indices: vec![], rhs })
}

fn parse<T: Scalar>(v: &Value) -> Result<Kernel<T>> {
    parse_kernel(&v.to_string())
}

/// Documents of all corpus kernels, with arity and padding flags.
pub fn corpus_documents() -> Vec<(&'static str, usize, bool, Value)> {
    let mut g = Gen::new(0x5eed);
    let poisson: Value = serde_json::from_str(POISSON).expect("bundled kernel");
    vec![
        ("poisson", 2, false, poisson),
        ("mass-p1", 2, false, mass(&mut g, 3, 3)),
        ("mass-p2", 2, false, mass(&mut g, 6, 6)),
        ("mass-coefficient", 2, false, weighted_mass(&mut g, 6, 3, 1)),
        ("mass-coefficient-low-order", 2, false, weighted_mass(&mut g, 2, 3, 1)),
        ("mass-two-coefficients", 2, false, weighted_mass(&mut g, 6, 3, 2)),
        ("mass-point-coefficient", 2, false, point_coefficient_mass(&mut g, 4, 3)),
        ("helmholtz", 2, false, helmholtz(&mut g, 6, 6)),
        ("poisson-coefficient", 2, false, coefficient_poisson(&mut g, 6, 3)),
        ("advection", 2, false, advection(&mut g, 4, 3)),
        ("load", 1, false, load(&mut g, 3, 3, false)),
        ("load-coefficient", 1, false, load(&mut g, 6, 6, true)),
        ("load-gradient", 1, false, load_gradient(&mut g, 4, 3)),
        ("vector-mass", 2, true, vector_mass(&mut g, 6, 6)),
        ("vector-laplace", 2, true, vector_laplace(&mut g, 3, 3)),
        ("elastic", 2, true, elastic(&mut g, 3, 3)),
        ("vector-load", 1, true, vector_load(&mut g, 3, 3)),
    ]
}

/// All corpus kernels over the scalar `T`.
pub fn corpus<T: Scalar>() -> Result<Vec<CorpusKernel<T>>> {
    corpus_documents()
        .into_iter()
        .map(|(name, arity, padded, doc)| Ok(CorpusKernel { name, kernel: parse(&doc)?, arity, padded }))
        .collect()
}

/// The corpus entry called `name`.
pub fn corpus_kernel<T: Scalar>(name: &str) -> Option<CorpusKernel<T>> {
    corpus().ok()?.into_iter().find(|c| c.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::validate_fem_nest;

    #[test]
    fn every_entry_is_a_fem_nest() {
        let all = corpus::<f64>().unwrap();
        assert!(all.len() >= 15);
        for c in &all {
            let v = validate_fem_nest(&c.kernel).unwrap_or_else(|e| panic!("{}: {e}", c.name));
            assert_eq!(v.roles.arity, c.arity, "{}", c.name);
        }
    }

    #[test]
    fn padding_flag_matches_reference_tables() {
        for c in corpus::<f64>().unwrap() {
            let mut k = c.kernel.clone();
            k.tables.retain(|_, t| !t.dims.iter().any(|d| d == "e"));
            let layout = crate::backend::detect_zero_blocks(&k).unwrap();
            assert_eq!(layout.has_zeros(&k), c.padded, "{}", c.name);
        }
    }

    #[test]
    fn padding_places_blocks() {
        let p = pad(&[1.0, 2.0, 3.0, 4.0], 2, 2, 1, 2);
        assert_eq!(p, vec![0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 4.0]);
    }
}

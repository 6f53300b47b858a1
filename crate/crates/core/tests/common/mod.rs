#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write;
use std::process::Command;

use femopt::backend::lower;
use femopt::ir::{parse_kernel, Kernel, Provenance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn kernel_file(name: &str) -> Kernel<f64> {
    let path = format!("{}/../../kernels/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_kernel(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn vals(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// A mass-matrix nest whose accumulation holds one to three monomials drawn
/// from separable, coefficient-weighted and point-dependent shapes, at a
/// random quadrature degree.
pub fn plan_family(seed: u64) -> Kernel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = [2usize, 3, 4, 6, 8][rng.gen_range(0..5)];
    let n = rng.gen_range(2..5usize);
    let count = 1 + (seed as usize % 3);
    let mut tables = json!({
        "X": {"dims": ["e"], "values": vals(&mut rng, 2, 0.5, 2.0)},
        "W": {"dims": ["i"], "values": vals(&mut rng, q, 0.1, 0.5)}
    });
    let mut terms = vec![json!("+")];
    for m in 0..count {
        let b = format!("B{m}");
        tables[&b] = json!({"dims": ["i", "j"], "values": vals(&mut rng, q * n, -1.0, 1.0)});
        let bj = format!("{b}[i][j]");
        let bk = format!("{b}[i][k]");
        let term = match rng.gen_range(0..4) {
            0 => json!(["*", bj, bk, "W[i]", "X[e]"]),
            1 => {
                let (f, p) = (format!("F{m}"), format!("P{m}"));
                tables[&f] = json!({"dims": ["e", "c"], "values": vals(&mut rng, 4, -1.0, 1.0)});
                tables[&p] = json!({"dims": ["i", "c"], "values": vals(&mut rng, q * 2, -1.0, 1.0)});
                let coef = json!(["+", ["*", format!("{f}[e][0]"), format!("{p}[i][0]")], ["*", format!("{f}[e][1]"), format!("{p}[i][1]")]]);
                json!(["*", bj, bk, "W[i]", coef])
            }
            2 => {
                let r = format!("R{m}");
                tables[&r] = json!({"dims": ["e", "i"], "values": vals(&mut rng, 2 * q, 0.5, 1.5)});
                json!(["*", bj, bk, "W[i]", format!("{r}[e][i]")])
            }
            _ => json!(["*", bj, ["+", bk, ["*", 0.5, "W[i]"]], "X[e]"]),
        };
        terms.push(term);
    }
    let rhs = if count == 1 { terms.pop().unwrap() } else { Value::Array(terms) };
    let doc = json!({
        "indices": {"e": 2, "i": q, "j": n, "k": n, "c": 2},
        "loops": [{"index": "e", "class": "order-free"}, {"index": "i"}, {"index": "j"}, {"index": "k"}],
        "tables": tables,
        "statements": [{"level": 4, "lhs": "A[e][j][k]", "op": "+=", "rhs": rhs}],
        "outputs": {"A": ["e", "j", "k"]}
    });
    parse_kernel(&doc.to_string()).unwrap()
}

/// Compiles the emitted C with a driver that feeds it the kernel's input
/// tables, runs it, and reads back every output. `None` without a C compiler.
pub fn run_emitted_c(k: &Kernel<f64>) -> Option<BTreeMap<String, Vec<f64>>> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile::tempdir().unwrap();
    let f = lower(k).unwrap();
    let mut src = f.render();
    let size = |dims: &[String]| dims.iter().map(|d| k.indices[d]).product::<usize>();
    let mut args = Vec::new();
    for p in &f.params {
        if p.output {
            let _ = writeln!(src, "static double {}_data[{}];", p.name, size(&k.outputs[&p.name]));
        } else {
            let t = &k.tables[&p.name];
            assert_eq!(t.provenance, Provenance::Input);
            let v: Vec<String> = t.values.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(src, "static const double {}_data[{}] = {{{}}};", p.name, v.len(), v.join(", "));
        }
        args.push(format!("{}_data", p.name));
    }
    src.push_str("#include <stdio.h>\nint main(void)\n{\n");
    let _ = writeln!(src, "  {}({});", f.name, args.join(", "));
    for (name, dims) in &k.outputs {
        let _ = writeln!(src, "  for (int n = 0; n < {}; ++n) printf(\"%.17g\\n\", {name}_data[n]);", size(dims));
    }
    src.push_str("  return 0;\n}\n");
    let c = dir.path().join("k.c");
    let exe = dir.path().join("k");
    std::fs::write(&c, &src).unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-O1", "-ffp-contract=off", "-o"])
        .arg(&exe)
        .arg(&c)
        .arg("-lm")
        .status()
        .ok()?;
    assert!(status.success(), "emitted C failed to compile:\n{src}");
    let out = Command::new(&exe).output().unwrap();
    let mut nums = String::from_utf8(out.stdout).unwrap().lines().map(|l| l.parse::<f64>().unwrap()).collect::<Vec<_>>().into_iter();
    let mut res = BTreeMap::new();
    for (name, dims) in &k.outputs {
        res.insert(name.clone(), nums.by_ref().take(size(dims)).collect());
    }
    Some(res)
}

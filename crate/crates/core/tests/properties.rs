mod common;

use femopt::backend::{detect_zero_blocks, restructure_loops, PipelineOptions};
use femopt::cost::increase_factor;
use femopt::ir::{evaluate, parse_kernel, Kernel};
use femopt::oracle::pipeline_error;
use femopt::sharing::{solve_ilp, SharingGraph};
use proptest::prelude::*;
use serde_json::json;

/// Two tables over `q x n` whose columns outside `[lo, hi)` are zeroed, and
/// a bilinear accumulation mixing them.
fn block_kernel(q: usize, n: usize, u: (usize, usize), v: (usize, usize), values: &[f64]) -> Kernel<f64> {
    let table = |(lo, hi): (usize, usize), off: usize| -> Vec<f64> {
        (0..q * n).map(|p| if (lo..hi).contains(&(p % n)) { values[(p + off) % values.len()] } else { 0.0 }).collect()
    };
    let doc = json!({
        "indices": {"i": q, "j": n, "k": n},
        "loops": [{"index": "i"}, {"index": "j"}, {"index": "k"}],
        "tables": {
            "U": {"dims": ["i", "j"], "values": table(u, 0)},
            "V": {"dims": ["i", "j"], "values": table(v, 7)},
            "W": {"dims": ["i"], "values": values[..q].to_vec()}
        },
        "statements": [{"level": 3, "lhs": "A[j][k]", "op": "+=",
            "rhs": ["*", ["+", ["*", "U[i][j]", "U[i][k]"], ["*", "V[i][j]", ["+", "U[i][k]", "V[i][k]"]]], "W[i]"]}],
        "outputs": {"A": ["j", "k"]}
    });
    parse_kernel(&doc.to_string()).unwrap()
}

fn span(n: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..n, 0..=n).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

fn blocks() -> impl Strategy<Value = Kernel<f64>> {
    (1..5usize, 2..9usize).prop_flat_map(|(q, n)| {
        (span(n), span(n), prop::collection::vec(0.1..2.0f64, 16))
            .prop_map(move |(u, v, values)| block_kernel(q, n, u, v, &values))
    })
}

fn min_cover(g: &SharingGraph) -> usize {
    (0u32..1 << g.vertices.len())
        .filter(|m| g.edges.iter().all(|&(a, b)| m >> a & 1 == 1 || m >> b & 1 == 1))
        .map(|m| m.count_ones() as usize)
        .min()
        .unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_skip_is_exact(k in blocks()) {
        let (out, rep) = restructure_loops(&k, &detect_zero_blocks(&k).unwrap()).unwrap();
        prop_assert!(rep.flops_after <= rep.flops_before);
        prop_assert_eq!(evaluate(&k).unwrap(), evaluate(&out).unwrap());
    }

    #[test]
    fn layout_ranges_cover_exactly_the_nonzero_slices(k in blocks()) {
        let layout = detect_zero_blocks(&k).unwrap();
        for (name, t) in &k.tables {
            let dims: Vec<usize> = t.dims.iter().map(|d| k.indices[d]).collect();
            for (d, ranges) in layout.tables[name].iter().enumerate() {
                prop_assert!(ranges.iter().all(|&(lo, hi)| lo < hi && hi <= dims[d]));
                prop_assert!(ranges.windows(2).all(|w| w[0].1 < w[1].0));
                let stride: usize = dims[d + 1..].iter().product();
                for c in 0..dims[d] {
                    let nonzero = t.values.iter().enumerate().any(|(p, v)| *v != 0.0 && p / stride % dims[d] == c);
                    let covered = ranges.iter().any(|&(lo, hi)| (lo..hi).contains(&c));
                    prop_assert_eq!(nonzero, covered, "{} dim {} column {}", name, d, c);
                }
            }
        }
    }

    #[test]
    fn increase_factor_follows_pascal(n in 2..12usize, k in 1..6usize) {
        prop_assert_eq!(increase_factor(n, k), increase_factor(n - 1, k) + increase_factor(n, k - 1));
        prop_assert_eq!(increase_factor(n, 0), 1);
        prop_assert_eq!(increase_factor(1, k), 1);
    }

    #[test]
    fn ilp_finds_a_minimum_cover(n in 1..11usize, bits in prop::collection::vec(any::<bool>(), 55)) {
        let mut edges = Vec::new();
        let mut it = bits.iter();
        for a in 0..n {
            for b in a + 1..n {
                if *it.next().unwrap() {
                    edges.push((a, b));
                }
            }
        }
        let g = SharingGraph::from_edges((0..n).map(|v| format!("s{v}")).collect(), edges);
        let sol = solve_ilp(&g);
        prop_assert!(sol.is_feasible(&g));
        prop_assert_eq!(sol.objective, min_cover(&g));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_preserves_plan_family(seed in 0..10_000u64, zero_skip in any::<bool>()) {
        let k = common::plan_family(seed);
        let opts = PipelineOptions { zero_skip, ..PipelineOptions::default() };
        let err = pipeline_error(&k, &opts, 0..3).unwrap();
        prop_assert!(err < 1e-10, "seed {} error {}", seed, err);
    }
}

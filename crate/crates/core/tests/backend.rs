mod common;

use femopt::backend::{detect_zero_blocks, emit_c, lower, restructure_loops, run_pipeline, PipelineOptions};
use femopt::corpus::{corpus, corpus_kernel};
use femopt::ir::eval::relative_error;
use femopt::ir::{evaluate, flop_count};

fn golden(name: &str, text: &str) {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    if std::env::var_os("FEMOPT_BLESS").is_some() {
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {path}; rerun with FEMOPT_BLESS=1"));
    assert_eq!(text, want, "{name} differs from the golden file");
}

#[test]
fn optimized_poisson_matches_golden_c() {
    let k = common::kernel_file("poisson.json");
    let out = run_pipeline(&k, &PipelineOptions::default()).unwrap();
    let c = emit_c(&out.kernel).unwrap();
    assert!(c.contains("static const double pre0["));
    golden("poisson.c", &c);
}

#[test]
fn split_vector_mass_matches_golden_c() {
    let k = corpus_kernel::<f64>("vector-mass").unwrap().kernel;
    let out = run_pipeline(&k, &PipelineOptions::default()).unwrap();
    let f = lower(&out.kernel).unwrap();
    let bounds: Vec<(usize, usize)> = f.loop_bounds().into_iter().filter(|(v, _, _)| v == "j").map(|(_, s, e)| (s, e)).collect();
    assert_eq!(bounds, vec![(0, 6), (6, 12)]);
    assert!(f.indirection_free());
    golden("vector_mass.c", &f.render());
}

#[test]
fn compiled_c_agrees_with_interpreter() {
    let mut ran = 0;
    for c in corpus::<f64>().unwrap() {
        let out = run_pipeline(&c.kernel, &PipelineOptions::default()).unwrap();
        let Some(native) = common::run_emitted_c(&out.kernel) else {
            eprintln!("no C compiler, skipping");
            return;
        };
        let err = relative_error(&evaluate(&c.kernel).unwrap(), &native);
        assert!(err < 1e-12, "{}: {err}", c.name);
        ran += 1;
    }
    assert!(ran >= 15);
}

#[test]
fn zero_skip_is_bitwise_on_padded_kernels() {
    for c in corpus::<f64>().unwrap().into_iter().filter(|c| c.padded) {
        let layout = detect_zero_blocks(&c.kernel).unwrap();
        let (out, rep) = restructure_loops(&c.kernel, &layout).unwrap();
        assert!(rep.flops_after < rep.flops_before, "{}", c.name);
        assert_eq!(evaluate(&c.kernel).unwrap(), evaluate(&out).unwrap(), "{}", c.name);
    }
}

#[test]
fn layout_claiming_zeros_that_are_not_is_rejected() {
    let k = corpus_kernel::<f64>("mass-p1").unwrap().kernel;
    let mut layout = detect_zero_blocks(&k).unwrap();
    layout.tables.get_mut("B").unwrap()[1] = vec![(0, 1)];
    assert!(matches!(restructure_loops(&k, &layout), Err(femopt::Error::InconsistentLayout(_))));
    layout.tables.insert("nope".into(), vec![]);
    assert!(restructure_loops(&k, &layout).is_err());
}

#[test]
fn zero_skip_can_be_disabled() {
    let k = corpus_kernel::<f64>("elastic").unwrap().kernel;
    let on = run_pipeline(&k, &PipelineOptions::default()).unwrap();
    let off = run_pipeline(&k, &PipelineOptions { zero_skip: false, ..Default::default() }).unwrap();
    assert!(off.report.zero_skip.is_none());
    assert!(flop_count(&on.kernel) < flop_count(&off.kernel));
}

use femopt::backend::{run_pipeline, PipelineOptions};
use femopt::corpus::corpus;
use femopt::ir::{evaluate, Expr, Node};
use femopt::{Kernel32, KernelQ};

fn has_calls<T>(nodes: &[Node<T>]) -> bool {
    fn call<T>(e: &Expr<T>) -> bool {
        match e {
            Expr::Call(..) => true,
            Expr::Const(_) | Expr::Sym(_) => false,
            Expr::Add(v) | Expr::Mul(v) => v.iter().any(call),
            Expr::Div(a, b) => call(a) || call(b),
        }
    }
    nodes.iter().any(|n| match n {
        Node::Stmt(s) => call(&s.rhs),
        Node::Loop(l) => has_calls(&l.body),
    })
}

#[test]
fn rational_pipeline_is_exact() {
    let mut checked = 0;
    for c in corpus::<num_rational::BigRational>().unwrap() {
        let k: KernelQ = c.kernel;
        if has_calls(&k.body) {
            continue;
        }
        let out = run_pipeline(&k, &PipelineOptions::default()).unwrap();
        assert_eq!(evaluate(&k).unwrap(), evaluate(&out.kernel).unwrap(), "{}", c.name);
        checked += 1;
    }
    assert!(checked >= 15, "{checked}");
}

#[test]
fn single_precision_pipeline_stays_close() {
    for c in corpus::<f32>().unwrap() {
        let k: Kernel32 = c.kernel;
        let out = run_pipeline(&k, &PipelineOptions::default()).unwrap();
        let (want, got) = (evaluate(&k).unwrap(), evaluate(&out.kernel).unwrap());
        for (name, w) in &want {
            let scale = w.iter().fold(0f32, |m, x| m.max(x.abs())).max(f32::MIN_POSITIVE);
            let err = w.iter().zip(&got[name]).fold(0f32, |m, (a, b)| m.max((a - b).abs())) / scale;
            assert!(err < 1e-4, "{} {name}: {err}", c.name);
        }
    }
}

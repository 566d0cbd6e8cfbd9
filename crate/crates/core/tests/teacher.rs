mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treemend_core::graph::{DecEdge, Vocab};
use treemend_core::lang::{ClassInfo, EdgeLabel as E, FuncSig, NodeKind as K, NodeLabel, Type, TypeEnv};
use treemend_core::rules::{node_verdicts, syntax_verdicts, GrammarSchema, NodeVerdicts, PartialTree, Verdict};
use treemend_core::teacher::{shape, shape_by_verdict, shape_step, StepDistributions};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn parent_renormalizes_to_083() {
    // Must-parent plus might-parents holding 0.2 of the mass.
    let s = shape(&[0.1, 0.1, 0.8], &[2], &[0, 1], &[]).unwrap();
    assert!(close(s.probs[2], 0.83, 0.005), "{:?}", s.probs);
}

#[test]
fn edge_renormalizes_to_077_023() {
    let mut d = vec![0.0; 5];
    d[0] = 0.1; // member
    d[1] = 0.3; // qualifier
    d[2] = 0.4;
    d[3] = 0.1;
    d[4] = 0.1;
    let s = shape(&d, &[0], &[1], &[2, 3, 4]).unwrap();
    assert!(close(s.probs[0], 0.77, 0.005), "{:?}", s.probs);
    assert!(close(s.probs[1], 0.23, 0.005), "{:?}", s.probs);
}

/// The three decoding steps of the walkthrough on `FUNC13(VAR1.?)`.
#[test]
fn walkthrough_sequence() {
    let mut env = TypeEnv::default();
    env.classes.insert("TYPE1".into(), ClassInfo::default());
    env.variables.insert("VAR1".into(), Type::Class("TYPE1".into()));
    env.variables.insert("VAR2".into(), Type::Int);
    env.functions.insert(
        "FUNC13".into(),
        FuncSig {
            params: vec![Type::Class("TYPE1".into())],
            ret: Type::Int,
        },
    );
    let schema = GrammarSchema::desk();
    let mut t = PartialTree::new(NodeLabel::Kind(K::BlockStmt));
    let s = t.add(0, E::Statements, NodeLabel::Kind(K::ExprStmt));
    let call = t.add(s, E::Value, NodeLabel::Kind(K::FuncInvoc));
    t.add(call, E::Member, NodeLabel::Token("FUNC13".into()));
    let m = t.add(call, E::Args, NodeLabel::Kind(K::MemberRef));

    let sv = syntax_verdicts(&t, &schema);
    let mut parent = vec![0.04; t.len()];
    parent[m] = 0.84;
    let p = shape_by_verdict(&parent, &sv.parents).unwrap();
    let best = (0..p.probs.len()).max_by(|&a, &b| p.probs[a].total_cmp(&p.probs[b])).unwrap();
    assert_eq!(best, m);
    assert_eq!(sv.p_must(), vec![m]);

    let mut edge = vec![0.7 / 20.0; 22];
    edge[E::Qualifier.index()] = 0.3;
    edge[E::Member.index()] = 0.0;
    let e = shape_by_verdict(&edge, &sv.edges[m]).unwrap();
    assert!(e.probs[E::Member.index()] > e.probs[E::Qualifier.index()]);

    // Argument slot of a fresh call: VAR2 (int) is likelier under the
    // student but invalid.
    let mut t = PartialTree::new(NodeLabel::Kind(K::BlockStmt));
    let s = t.add(0, E::Statements, NodeLabel::Kind(K::ExprStmt));
    let call = t.add(s, E::Value, NodeLabel::Kind(K::FuncInvoc));
    t.add(call, E::Member, NodeLabel::Token("FUNC13".into()));
    let v = t.add(call, E::Args, NodeLabel::Kind(K::VarRef));
    let vocab = Vocab::default();
    let nv = node_verdicts(&t, (v, DecEdge::Label(E::Name)), &env, vocab.labels());
    let mut node = vec![0.001; vocab.len()];
    let var1 = vocab.id(&NodeLabel::Token("VAR1".into())).unwrap();
    let var2 = vocab.id(&NodeLabel::Token("VAR2".into())).unwrap();
    node[var1] = 0.2;
    node[var2] = 0.6;
    let z: f64 = node.iter().sum();
    node.iter_mut().for_each(|x| *x /= z);
    let n = shape_by_verdict(&node, &nv.verdicts).unwrap();
    assert_eq!(n.probs[var2], 0.0);
    let best = (0..n.probs.len()).max_by(|&a, &b| n.probs[a].total_cmp(&n.probs[b])).unwrap();
    assert_eq!(best, var1);
}

#[test]
fn unconstrained_step_is_identity() {
    let student = StepDistributions {
        parent: vec![0.3, 0.7],
        edge: vec![1.0 / 22.0; 22],
        node: vec![0.25; 4],
    };
    let sv = treemend_core::rules::SyntaxVerdicts {
        parents: vec![Verdict::Might; 2],
        edges: vec![[Verdict::Might; 22]; 2],
    };
    let nv = NodeVerdicts {
        verdicts: vec![Verdict::Might; 4],
        fired: vec![],
    };
    let out = shape_step(&student, &sv, &nv, 1).unwrap();
    assert_eq!(out.teacher, student);
    assert_eq!(out.degenerate, [false; 3]);
}

fn random_case<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<Verdict>) {
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let z: f64 = d.iter().sum();
    d.iter_mut().for_each(|x| *x /= z);
    let v = (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => Verdict::Must,
            1 => Verdict::Invalid,
            _ => Verdict::Might,
        })
        .collect();
    (d, v)
}

#[test]
fn teacher_argmax_avoids_invalid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        let n = rng.gen_range(2..40);
        let (d, v) = random_case(&mut rng, n);
        let s = shape_by_verdict(&d, &v).unwrap();
        if s.degenerate {
            continue;
        }
        let best = (0..n).max_by(|&a, &b| s.probs[a].total_cmp(&s.probs[b])).unwrap();
        assert_ne!(v[best], Verdict::Invalid);
    }
}

proptest! {
    #[test]
    fn shaped_distribution_laws(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, v) = random_case(&mut rng, n);
        let s = shape_by_verdict(&d, &v).unwrap();
        prop_assume!(!s.degenerate);
        prop_assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let min_must = (0..n).filter(|&i| v[i] == Verdict::Must).map(|i| s.probs[i]).fold(f64::INFINITY, f64::min);
        for i in 0..n {
            match v[i] {
                Verdict::Invalid => prop_assert_eq!(s.probs[i], 0.0),
                Verdict::Might => prop_assert!(s.probs[i] <= min_must),
                Verdict::Must => {}
            }
        }
        // Ratios among might entries are kept.
        let mights: Vec<usize> = (0..n).filter(|&i| v[i] == Verdict::Might).collect();
        for w in mights.windows(2) {
            let (a, b) = (w[0], w[1]);
            prop_assert_eq!(d[a] < d[b], s.probs[a] < s.probs[b]);
        }
    }

    #[test]
    fn idempotent_without_must(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, mut v) = random_case(&mut rng, n);
        v.iter_mut().filter(|x| **x == Verdict::Must).for_each(|x| *x = Verdict::Might);
        let once = shape_by_verdict(&d, &v).unwrap();
        let twice = shape_by_verdict(&once.probs, &v).unwrap();
        for (a, b) in once.probs.iter().zip(&twice.probs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

mod common;

use common::{edge_row, fol_verdicts, random_partial_tree, rich_env};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treemend_core::graph::{DecEdge, Vocab, NUM_DECODER_EDGES};
use treemend_core::lang::{parse_statements, EdgeLabel as E, NodeKind as K, NodeLabel, Type, TypeEnv, FuncSig, ClassInfo};
use treemend_core::rules::{
    check_tree_valid, node_verdicts, semantic_verdicts, syntax_verdicts, GrammarSchema, PartialTree, RuleTag, Verdict,
};

fn kind(k: K) -> NodeLabel {
    NodeLabel::Kind(k)
}

fn tok(t: &str) -> NodeLabel {
    NodeLabel::Token(t.into())
}

#[test]
fn incremental_verdicts_match_fol_oracle() {
    let schema = GrammarSchema::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let t = random_partial_tree(&mut rng, 12);
        let fast = syntax_verdicts(&t, &schema);
        let slow = fol_verdicts(&t, &schema);
        assert_eq!(fast.parents, slow.parents);
        for p in 0..t.len() {
            assert_eq!(edge_row(&fast, p), slow.edges[p]);
        }
    }
}

#[test]
fn counters_match_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let t = random_partial_tree(&mut rng, 12);
        for p in 0..t.len() {
            for e in E::ALL {
                let scan = t.edges().filter(|&(q, l, _)| q == p && l == *e).count();
                assert_eq!(t.edge_count(p, *e), scan);
            }
        }
    }
}

proptest! {
    #[test]
    fn verdict_sets_partition(seed in any::<u64>()) {
        let schema = GrammarSchema::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_partial_tree(&mut rng, 12);
        let v = syntax_verdicts(&t, &schema);
        let (a, b, c) = (v.p_must(), v.p_might(), v.p_invalid());
        prop_assert_eq!(a.len() + b.len() + c.len(), t.len());
        for p in 0..t.len() {
            let n = v.e_must(p).len() + v.e_might(p).len() + v.e_invalid(p).len();
            prop_assert_eq!(n, NUM_DECODER_EDGES);
        }
    }

    #[test]
    fn adding_an_edge_bumps_one_counter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = random_partial_tree(&mut rng, 10);
        let before: Vec<Vec<usize>> = (0..t.len()).map(|p| E::ALL.iter().map(|e| t.edge_count(p, *e)).collect()).collect();
        let p = seed as usize % t.len();
        let e = E::ALL[(seed >> 8) as usize % E::ALL.len()];
        t.add(p, e, kind(K::VarRef));
        for (q, row) in before.iter().enumerate() {
            for (i, l) in E::ALL.iter().enumerate() {
                let want = row[i] + usize::from(q == p && *l == e);
                prop_assert_eq!(t.edge_count(q, *l), want);
            }
        }
    }
}

/// `TYPE1 VAR3 = FUNC13(VAR1);` where FUNC13 takes a TYPE1.
fn context_env() -> TypeEnv {
    let mut env = TypeEnv::default();
    env.classes.insert("TYPE1".into(), ClassInfo::default());
    env.variables.insert("VAR1".into(), Type::Class("TYPE1".into()));
    env.variables.insert("VAR2".into(), Type::Int);
    env.variables.insert("VAR3".into(), Type::Class("TYPE1".into()));
    env.functions.insert(
        "FUNC13".into(),
        FuncSig {
            params: vec![Type::Class("TYPE1".into())],
            ret: Type::Class("TYPE1".into()),
        },
    );
    env
}

#[test]
fn walkthrough_patch_is_valid() {
    let patch = parse_statements("TYPE1 VAR3 = FUNC13(VAR1);").unwrap();
    let v = check_tree_valid(&patch, &GrammarSchema::desk(), &context_env());
    assert!(v.valid, "{:?}", v.violations);
    let wrong = parse_statements("TYPE1 VAR3 = FUNC13(VAR2);").unwrap();
    assert!(!check_tree_valid(&wrong, &GrammarSchema::desk(), &context_env()).valid);
}

#[test]
fn member_multiplicity_violation() {
    let mut t = PartialTree::new(kind(K::BlockStmt));
    let r = t.add(0, E::Statements, kind(K::ReturnStmt));
    let m = t.add(r, E::Value, kind(K::MemberRef));
    t.add(m, E::Member, tok("VAR1"));
    t.add(m, E::Member, tok("VAR2"));
    let v = check_tree_valid(&t.to_ast(), &GrammarSchema::desk(), &rich_env());
    assert!(!v.valid);
    assert!(v.violations.iter().any(|s| s.contains("2 `member`")), "{:?}", v.violations);
}

#[test]
fn argument_rule_excludes_int_variable() {
    let env = context_env();
    let mut t = PartialTree::new(kind(K::BlockStmt));
    let d = t.add(0, E::Statements, kind(K::LocalVarDecl));
    let ty = t.add(d, E::Type, kind(K::RefType));
    t.add(ty, E::Name, tok("TYPE1"));
    let v = t.add(d, E::Declarators, kind(K::VarDecl));
    t.add(v, E::Name, tok("VAR3"));
    let call = t.add(v, E::Initializer, kind(K::FuncInvoc));
    t.add(call, E::Member, tok("FUNC13"));
    let arg = t.add(call, E::Args, kind(K::VarRef));
    let cands = [tok("VAR1"), tok("VAR2")];
    let sv = semantic_verdicts(&t, (arg, E::Name), &env, &cands);
    assert!(sv.fired.contains(&RuleTag::Argument));
    assert_eq!(sv.n_might, vec![0]);
    assert_eq!(sv.n_invalid, vec![1]);
}

#[test]
fn field_table_oracle() {
    // Class TYPE1 has the single field VAR5 of type int.
    let mut env = TypeEnv::default();
    let mut info = ClassInfo::default();
    info.fields.insert("VAR5".into(), Type::Int);
    env.classes.insert("TYPE1".into(), info);
    env.variables.insert("VAR1".into(), Type::Class("TYPE1".into()));
    for k in 2..=4 {
        env.variables.insert(format!("VAR{k}"), Type::Int);
    }
    let mut t = PartialTree::new(kind(K::BlockStmt));
    let r = t.add(0, E::Statements, kind(K::ReturnStmt));
    let m = t.add(r, E::Value, kind(K::MemberRef));
    let q = t.add(m, E::Qualifier, kind(K::VarRef));
    t.add(q, E::Name, tok("VAR1"));
    let vocab = Vocab::default();
    let nv = node_verdicts(&t, (m, DecEdge::Label(E::Member)), &env, vocab.labels());
    assert_eq!(nv.fired, vec![RuleTag::Member]);
    for (i, l) in vocab.labels().iter().enumerate() {
        let is_var = matches!(l, NodeLabel::Token(s) if s.starts_with("VAR"));
        let want = match l {
            NodeLabel::Token(s) if s == "VAR5" || s == "VAR-UNK" => Verdict::Might,
            _ => Verdict::Invalid,
        };
        assert_eq!(nv.verdicts[i], want, "{l:?} (var: {is_var})");
    }
}

#[test]
fn no_precondition_no_constraint() {
    let mut t = PartialTree::new(kind(K::BlockStmt));
    let w = t.add(0, E::Statements, kind(K::WhileStmt));
    let c = t.add(w, E::Condition, kind(K::VarRef));
    let sv = semantic_verdicts(&t, (c, E::Name), &rich_env(), &[tok("VAR1"), tok("VAR2")]);
    assert!(sv.fired.is_empty() && sv.n_might.is_empty() && sv.n_invalid.is_empty());
}

#[test]
fn unknown_placeholders_stay_admissible() {
    let env = rich_env();
    let vocab = Vocab::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let schema = GrammarSchema::desk();
    let unk = vocab.id(&tok("VAR-UNK")).unwrap();
    let mut checked = 0;
    for i in 0..300 {
        let cfg = treemend_core::rollout::RolloutConfig {
            shaping: true,
            budget: 100,
            max_steps: 3 + i % 12,
        };
        let r = treemend_core::rollout::random_rollout(&mut rng, &env, &schema, vocab.labels(), &cfg);
        let t = &r.tree;
        for p in 0..t.len() {
            if t.kind(p) == Some(K::VarRef) && t.child(p, E::Name).is_none() {
                let nv = node_verdicts(t, (p, DecEdge::Label(E::Name)), &env, vocab.labels());
                assert_eq!(nv.verdicts[unk], Verdict::Might);
                checked += 1;
            }
        }
    }
    assert!(checked > 10, "only {checked} open VarRef slots");
}

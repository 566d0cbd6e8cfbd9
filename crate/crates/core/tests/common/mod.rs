#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use treemend_core::gen::{random_program, GenConfig};
use treemend_core::graph::{DecEdge, EOT_EDGE, NUM_DECODER_EDGES};
use treemend_core::lang::{EdgeLabel, FuncSig, NodeKind, NodeLabel, Type, TypeEnv};
use treemend_core::prepare::prepare;
use treemend_core::graph::Vocab;
use treemend_core::lang::LineSpan;
use treemend_core::rules::{EdgeClass, GrammarSchema, PartialTree, Verdict};

/// Verdicts re-derived from the quantified rule definitions by full scans.
pub struct FolVerdicts {
    pub parents: Vec<Verdict>,
    pub edges: Vec<Vec<Verdict>>,
}

fn scan_count(tree: &PartialTree, p: usize, e: EdgeLabel) -> usize {
    tree.edges().filter(|&(q, l, _)| q == p && l == e).count()
}

pub fn fol_verdicts(tree: &PartialTree, schema: &GrammarSchema) -> FolVerdicts {
    let n = tree.len();
    let mut parents = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n);
    for p in 0..n {
        let mut row = vec![Verdict::Invalid; NUM_DECODER_EDGES];
        let (mut unmet, mut capacity) = (false, false);
        if let Some(k) = tree.kind(p) {
            let in_class = |c: EdgeClass| schema.labels(k, c).collect::<Vec<_>>();
            let (req, req_plus, opt, opt_star) = (
                in_class(EdgeClass::Req),
                in_class(EdgeClass::ReqPlus),
                in_class(EdgeClass::Opt),
                in_class(EdgeClass::OptStar),
            );
            for e in req.iter().chain(&req_plus) {
                if scan_count(tree, p, *e) == 0 {
                    unmet = true;
                    row[e.index()] = Verdict::Must;
                }
            }
            for e in &opt {
                if scan_count(tree, p, *e) == 0 {
                    capacity = true;
                    row[e.index()] = Verdict::Might;
                }
            }
            for e in &opt_star {
                capacity = true;
                row[e.index()] = Verdict::Might;
            }
            for e in &req_plus {
                if scan_count(tree, p, *e) >= 1 {
                    capacity = true;
                    row[e.index()] = Verdict::Might;
                }
            }
        }
        parents.push(if unmet {
            Verdict::Must
        } else if capacity {
            Verdict::Might
        } else {
            Verdict::Invalid
        });
        edges.push(row);
    }
    let no_must = !parents.contains(&Verdict::Must);
    if no_must && !tree.is_finished() {
        edges[0][EOT_EDGE] = Verdict::Might;
        if parents[0] == Verdict::Invalid {
            parents[0] = Verdict::Might;
        }
    }
    FolVerdicts { parents, edges }
}

pub fn label_pool() -> Vec<NodeLabel> {
    let mut pool: Vec<NodeLabel> = NodeKind::ALL
        .iter()
        .filter(|k| **k != NodeKind::Token)
        .map(|k| NodeLabel::Kind(*k))
        .collect();
    for t in ["VAR1", "VAR2", "FUNC1", "TYPE1", "+", "<", "int", "1", "VAR-UNK"] {
        pool.push(NodeLabel::Token(t.into()));
    }
    pool
}

/// A partial tree of at most `max_nodes` nodes grown by uniform choices.
pub fn random_partial_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> PartialTree {
    let pool = label_pool();
    let mut t = PartialTree::new(pool.choose(rng).unwrap().clone());
    let n = rng.gen_range(1..=max_nodes);
    while t.len() < n {
        let p = rng.gen_range(0..t.len());
        let e = *EdgeLabel::ALL.choose(rng).unwrap();
        t.add(p, e, pool.choose(rng).unwrap().clone());
    }
    if rng.gen_bool(0.1) {
        t.finish();
    }
    t
}

/// Edge verdicts of `p` in decoder-edge order.
pub fn edge_row(v: &treemend_core::rules::SyntaxVerdicts, p: usize) -> Vec<Verdict> {
    (0..NUM_DECODER_EDGES)
        .map(|e| {
            let d = DecEdge::from_id(e).unwrap();
            if v.e_must(p).contains(&d) {
                Verdict::Must
            } else if v.e_might(p).contains(&d) {
                Verdict::Might
            } else {
                Verdict::Invalid
            }
        })
        .collect()
}

/// A hand-built placeholder environment with classes, methods and fields.
pub fn rich_env() -> TypeEnv {
    let mut env = TypeEnv::default();
    let c = |n: &str| Type::Class(n.into());
    let mut t1 = treemend_core::lang::ClassInfo::default();
    t1.fields.insert("VAR5".into(), Type::Int);
    t1.fields.insert("VAR6".into(), c("TYPE1"));
    t1.methods.insert(
        "FUNC3".into(),
        FuncSig {
            params: vec![Type::Int],
            ret: Type::Bool,
        },
    );
    let mut t2 = treemend_core::lang::ClassInfo::default();
    t2.fields.insert("VAR7".into(), Type::Str);
    t2.supertype = Some("TYPE1".into());
    env.classes.insert("TYPE1".into(), t1);
    env.classes.insert("TYPE2".into(), t2);
    for (v, t) in [
        ("VAR1", Type::Int),
        ("VAR2", Type::Bool),
        ("VAR3", Type::Str),
        ("VAR4", c("TYPE1")),
        ("VAR8", c("TYPE2")),
    ] {
        env.variables.insert(v.into(), t);
    }
    env.functions.insert(
        "FUNC1".into(),
        FuncSig {
            params: vec![Type::Int, c("TYPE1")],
            ret: Type::Int,
        },
    );
    env.functions.insert(
        "FUNC2".into(),
        FuncSig {
            params: vec![Type::Str],
            ret: Type::Str,
        },
    );
    env
}

/// Placeholder environments of focal functions in generated programs.
pub fn generated_envs<R: Rng>(rng: &mut R, count: usize) -> Vec<TypeEnv> {
    let vocab = Vocab::default();
    let mut out = Vec::new();
    while out.len() < count {
        let g = random_program(rng, &GenConfig::default());
        let f = g.functions.choose(rng).unwrap();
        let program = treemend_core::lang::parse_program(&g.source).unwrap();
        let (func, _) = treemend_core::lang::find_function(&program, &f.name).unwrap();
        let lines = func.child(EdgeLabel::Body).unwrap().lines.unwrap();
        if let Ok(p) = prepare(&g.source, &f.name, LineSpan::new(lines.start, lines.start), &vocab) {
            out.push(p.env);
        }
    }
    out
}

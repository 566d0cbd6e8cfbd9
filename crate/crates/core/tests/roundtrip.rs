mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treemend_core::gen::{random_program, GenConfig};
use treemend_core::graph::{linearize_target, rebuild_tree, Vocab};
use treemend_core::lang::{find_function, parse_program, print_ast, EdgeLabel};
use treemend_core::normalize::{denormalize, normalize};
use treemend_core::rollout::{random_rollout, RolloutConfig};
use treemend_core::rules::GrammarSchema;

#[test]
fn generated_corpus_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vocab = Vocab::default();
    for _ in 0..200 {
        let g = random_program(&mut rng, &GenConfig::default());
        let ast = parse_program(&g.source).unwrap();
        let printed = print_ast(&ast).unwrap();
        let reparsed = parse_program(&printed).unwrap();
        assert_eq!(reparsed, ast, "{printed}");
        assert_eq!(print_ast(&reparsed).unwrap(), printed);

        for f in &g.functions {
            let (func, _) = find_function(&ast, &f.name).unwrap();
            let (norm, map) = normalize(func);
            assert_eq!(&denormalize(&norm, &map).unwrap(), func);

            let body = norm.child(EdgeLabel::Body).unwrap();
            let steps = linearize_target(body);
            assert_eq!(&rebuild_tree(&steps).unwrap(), body);
            if vocab.covers(&map) {
                let decoded = steps.encode(&vocab).unwrap().decode(&vocab).unwrap();
                assert_eq!(decoded, steps);
            }
        }
    }
}

#[test]
fn valid_random_trees_rebuild() {
    let schema = GrammarSchema::desk();
    let vocab = Vocab::default();
    let env = common::rich_env();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let r = random_rollout(&mut rng, &env, &schema, vocab.labels(), &RolloutConfig::default());
        let tree = r.tree.to_ast();
        let steps = linearize_target(&tree);
        assert_eq!(steps.len(), tree.node_count());
        assert_eq!(rebuild_tree(&steps).unwrap(), tree);
    }
}

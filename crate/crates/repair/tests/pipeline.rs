mod common;

use std::sync::OnceLock;

use treemend_core::rules::check_tree_valid;
use treemend_neural::{Model, ModelConfig};
use treemend_repair::pipeline::{generate, BugInput};
use treemend_repair::{beam_search, repair, BeamConfig, Outcome, RepairOptions};

use common::{fixture, overfit, Fixture};

struct Trained {
    f: Fixture,
    models: Vec<Model<f32>>,
}

fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let f = fixture(6, 77);
        let models = vec![overfit(&f, 1, 300), overfit(&f, 2, 300)];
        Trained { f, models }
    })
}

fn beam(width: usize) -> BeamConfig {
    BeamConfig { width, ..BeamConfig::default() }
}

/// Raw model distributions. Shaping sets every required edge to one, which
/// erases the learned order between two required edges of one node.
fn raw(width: usize) -> BeamConfig {
    BeamConfig { width, shaping: false, ..BeamConfig::default() }
}

#[test]
fn greedy_beam_reproduces_training_targets() {
    let t = trained();
    for (b, r) in t.f.bugs.iter().zip(&t.f.records) {
        let p = BugInput::from(b).prepare(&t.f.vocab).unwrap();
        let hyps = beam_search(&t.models[0], &p.asg, &p.env, &t.f.vocab, &t.f.schema, &raw(1)).unwrap();
        assert_eq!(hyps[0].steps, r.gold_steps, "{}", b.id);
        assert!(hyps[0].finished);
    }
}

#[test]
fn wider_beam_keeps_greedy_result() {
    let t = trained();
    for b in &t.f.bugs {
        let p = BugInput::from(b).prepare(&t.f.vocab).unwrap();
        let one = beam_search(&t.models[1], &p.asg, &p.env, &t.f.vocab, &t.f.schema, &raw(1)).unwrap();
        let five = beam_search(&t.models[1], &p.asg, &p.env, &t.f.vocab, &t.f.schema, &raw(5)).unwrap();
        assert!(five.iter().any(|h| h.steps == one[0].steps), "{}", b.id);
        for w in five.windows(2) {
            assert!(w[0].score() >= w[1].score());
        }
    }
}

#[test]
fn shaped_search_yields_only_valid_trees() {
    let f = fixture(8, 78);
    let m: Model<f32> = Model::new(ModelConfig { dropout: 0.0, ..common::small_config(&f.vocab) }, 5).unwrap();
    let mut total = 0;
    for b in &f.bugs {
        let p = BugInput::from(b).prepare(&f.vocab).unwrap();
        let cfg = BeamConfig { width: 6, max_steps: 40, ..BeamConfig::default() };
        for h in beam_search(&m, &p.asg, &p.env, &f.vocab, &f.schema, &cfg).unwrap() {
            total += 1;
            assert!(h.finished);
            let v = check_tree_valid(&h.ast(), &f.schema, &p.env);
            assert!(v.valid, "{:?}", v.violations);
        }
    }
    assert!(total > 0);
}

#[test]
fn merge_ignores_model_order() {
    let t = trained();
    let p = BugInput::from(&t.f.bugs[0]).prepare(&t.f.vocab).unwrap();
    let rev: Vec<Model<f32>> = t.models.iter().rev().cloned().collect();
    let a = generate(&t.models, &p, &t.f.vocab, &t.f.schema, &beam(4)).unwrap();
    let b = generate(&rev, &p, &t.f.vocab, &t.f.schema, &beam(4)).unwrap();
    assert_eq!(a.trees, b.trees);
}

#[test]
fn overfit_ensemble_fixes_seeded_bugs() {
    let t = trained();
    let opts = RepairOptions { beam: beam(5), ..RepairOptions::default() };
    for b in &t.f.bugs {
        let r = repair(&BugInput::from(b), &t.models, &t.f.vocab, &t.f.schema, &opts).unwrap();
        let p = r.plausible.expect("plausible patch");
        assert_eq!(p.outcome, Outcome::PlausibleFull, "{}", b.id);
        assert!(!r.no_tests);
    }
}

#[test]
fn report_counts_are_consistent() {
    let t = trained();
    let opts = RepairOptions { beam: BeamConfig { width: 8, shaping: false, ..BeamConfig::default() }, ..RepairOptions::default() };
    for b in &t.f.bugs[..3] {
        let input = BugInput::from(b);
        let r = repair(&input, &t.models, &t.f.vocab, &t.f.schema, &opts).unwrap();
        let p = input.prepare(&t.f.vocab).unwrap();
        let g = generate(&t.models, &p, &t.f.vocab, &t.f.schema, &opts.beam).unwrap();
        let valid = g.trees.iter().filter(|t| check_tree_valid(&t.ast, &t_schema(), &p.env).valid).count();
        assert_eq!(r.valid_trees, valid);
        assert_eq!(r.unique_trees, g.trees.len());
        assert!((r.validity_rate - valid as f64 / g.trees.len() as f64).abs() < 1e-15);
        assert!(r.trees_generated >= r.unique_trees);
    }
}

fn t_schema() -> treemend_core::rules::GrammarSchema {
    treemend_core::rules::GrammarSchema::desk()
}

#[test]
fn missing_tests_are_flagged() {
    let t = trained();
    let mut input = BugInput::from(&t.f.bugs[0]);
    input.tests.clear();
    let r = repair(&input, &t.models, &t.f.vocab, &t.f.schema, &RepairOptions { beam: beam(3), ..RepairOptions::default() }).unwrap();
    assert!(r.no_tests);
    assert!(r.plausible.is_none());
    assert!(r.verdicts.is_empty());
    assert!(r.candidates > 0);
}

#[test]
fn reports_are_reproducible() {
    let t = trained();
    let opts = RepairOptions { beam: beam(6), ..RepairOptions::default() };
    let input = BugInput::from(&t.f.bugs[1]);
    let a = serde_json::to_string(&repair(&input, &t.models, &t.f.vocab, &t.f.schema, &opts).unwrap()).unwrap();
    let b = serde_json::to_string(&repair(&input, &t.models, &t.f.vocab, &t.f.schema, &opts).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn focal_function_from_span() {
    let t = trained();
    let b = &t.f.bugs[2];
    let mut input = BugInput::from(b);
    input.focal = None;
    assert_eq!(input.prepare(&t.f.vocab).unwrap().focal, b.focal);
    input.span = treemend_core::lang::LineSpan::new(900, 901);
    assert!(input.prepare(&t.f.vocab).is_err());
}

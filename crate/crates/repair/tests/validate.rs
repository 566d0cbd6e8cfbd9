use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use treemend_core::corpus::{toy_corpus, BugFix, CorpusConfig};
use treemend_core::graph::Vocab;
use treemend_core::lang::{LineSpan, TestCase, TestOutcome};
use treemend_repair::validate::{classify, validate, validate_one, Outcome, ValidateOptions};

const PROGRAM: &str = "int f(int a, int b) {\n  int r = a - b;\n  return r;\n}\n";

fn test(a: i64, b: i64, expect: i64, originally_passing: bool) -> TestCase {
    TestCase { entry: "f".into(), args: vec![json!(a), json!(b)], expect: json!(expect), originally_passing }
}

fn suite() -> Vec<TestCase> {
    vec![test(0, 0, 0, true), test(2, 3, 5, false), test(-1, 1, 0, false)]
}

fn span() -> LineSpan {
    LineSpan::new(2, 2)
}

fn bugs() -> Vec<BugFix> {
    toy_corpus(&mut ChaCha8Rng::seed_from_u64(3), 6, &CorpusConfig::default(), &Vocab::default())
}

#[test]
fn gold_fix_first_is_plausible_and_stops() {
    let opts = ValidateOptions::default();
    for b in bugs() {
        let cands = vec![b.patch.clone(), "garbage(".into()];
        let log = validate(&b.buggy_source, b.span, &cands, &b.tests, &opts);
        assert_eq!(log.verdicts.len(), 1, "{}", b.id);
        assert_eq!(log.plausible, Some(0));
        assert_eq!(log.verdicts[0].outcome, Outcome::PlausibleFull);
    }
}

#[test]
fn outcomes_by_case() {
    let opts = ValidateOptions::default();
    let t = suite();
    assert_eq!(validate_one(PROGRAM, span(), "int r = a + b;", &t, &opts).outcome, Outcome::PlausibleFull);
    assert_eq!(validate_one(PROGRAM, span(), "int r = a * b + 1;", &t, &opts).outcome, Outcome::Implausible);
    assert_eq!(validate_one(PROGRAM, span(), "int r = a * 0 + b * 0 + 5;", &t, &opts).outcome, Outcome::Implausible);
    assert_eq!(validate_one(PROGRAM, span(), "int r = a * a + b;", &t, &opts).outcome, Outcome::Implausible);
    // Passes the old test and one of the two new ones.
    assert_eq!(validate_one(PROGRAM, span(), "int r = b * b + a;", &t, &opts).outcome, Outcome::PlausiblePartial);
    assert_eq!(validate_one(PROGRAM, span(), "int r = a + true;", &t, &opts).outcome, Outcome::InvalidTree);
    assert_eq!(validate_one(PROGRAM, span(), "int r = ;", &t, &opts).outcome, Outcome::InvalidTree);
}

#[test]
fn looping_candidates_time_out() {
    let opts = ValidateOptions { fuel: 2_000, ..ValidateOptions::default() };
    let looping = vec![
        "int r = a;\nwhile (true) {\n  r = r + 1;\n}".to_string(),
        "int r = b;\nwhile (r == r) {\n  r = r - 1;\n}".to_string(),
    ];
    let log = validate(PROGRAM, span(), &looping, &suite(), &opts);
    assert_eq!(log.plausible, None);
    assert_eq!(log.verdicts.len(), 2);
    for v in &log.verdicts {
        assert_eq!(v.outcome, Outcome::Timeout);
        assert!(v.tests.iter().all(|o| *o == TestOutcome::Timeout));
    }
}

#[test]
fn no_tests_is_never_plausible() {
    let log = validate(PROGRAM, span(), &["int r = a + b;".to_string()], &[], &ValidateOptions::default());
    assert_eq!(log.plausible, None);
}

fn outcome_strategy() -> impl Strategy<Value = TestOutcome> {
    prop_oneof![
        Just(TestOutcome::Pass),
        Just(TestOutcome::Fail { actual: "0".into() }),
        Just(TestOutcome::Timeout),
        Just(TestOutcome::RuntimeError { message: "x".into() }),
    ]
}

proptest! {
    #[test]
    fn classify_matches_definitions(cases in prop::collection::vec((any::<bool>(), outcome_strategy()), 1..8)) {
        let tests: Vec<TestCase> = cases.iter().map(|(p, _)| test(0, 0, 0, *p)).collect();
        let outs: Vec<TestOutcome> = cases.iter().map(|(_, o)| o.clone()).collect();
        let c = classify(&tests, &outs);
        let all = outs.iter().all(|o| o.passed());
        let old = cases.iter().filter(|(p, _)| *p).all(|(_, o)| o.passed());
        let new = cases.iter().any(|(p, o)| !*p && o.passed());
        match c {
            Outcome::PlausibleFull => prop_assert!(all),
            Outcome::PlausiblePartial => prop_assert!(!all && old && new),
            _ => prop_assert!(!all && !(old && new)),
        }
        if cases.iter().all(|(p, _)| *p) {
            prop_assert_ne!(c, Outcome::PlausiblePartial);
        }
    }
}

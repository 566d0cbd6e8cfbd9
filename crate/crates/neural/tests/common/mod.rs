#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treemend_core::corpus::{toy_corpus, BugFix, CorpusConfig};
use treemend_core::graph::Vocab;
use treemend_core::prepare::prepare;
use treemend_core::rules::GrammarSchema;
use treemend_neural::train::Example;

pub fn examples(n: usize, seed: u64) -> (Vocab, Vec<BugFix>, Vec<Example>) {
    let vocab = Vocab::default();
    let schema = GrammarSchema::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bugs = toy_corpus(&mut rng, n, &CorpusConfig::default(), &vocab);
    let exs = bugs
        .iter()
        .map(|b| {
            let p = prepare(&b.buggy_source, &b.focal, b.span, &vocab).unwrap();
            let r = p.record(&b.id, &b.patch, &vocab).unwrap();
            Example::from_record(&r, &vocab, &schema).unwrap()
        })
        .collect();
    (vocab, bugs, exs)
}

/// The smallest example by encoder and decoder length.
pub fn smallest(exs: &[Example]) -> Example {
    exs.iter().min_by_key(|e| (e.asg.len() * e.inputs.len(), e.id.clone())).unwrap().clone()
}

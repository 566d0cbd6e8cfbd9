#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treemend_core::corpus::{toy_corpus, BugFix, CorpusConfig};
use treemend_core::graph::{Record, Vocab};
use treemend_core::rules::GrammarSchema;
use treemend_neural::train::{train_loop, Example, TrainConfig};
use treemend_neural::{Model, ModelConfig};
use treemend_repair::BugInput;

pub struct Fixture {
    pub vocab: Vocab,
    pub schema: GrammarSchema,
    pub bugs: Vec<BugFix>,
    pub records: Vec<Record>,
    pub examples: Vec<Example>,
}

pub fn fixture(n: usize, seed: u64) -> Fixture {
    let vocab = Vocab::default();
    let schema = GrammarSchema::desk();
    let bugs = toy_corpus(&mut ChaCha8Rng::seed_from_u64(seed), n, &CorpusConfig::default(), &vocab);
    let records: Vec<Record> = bugs
        .iter()
        .map(|b| BugInput::from(b).prepare(&vocab).unwrap().record(&b.id, &b.patch, &vocab).unwrap())
        .collect();
    let examples = records.iter().map(|r| Example::from_record(r, &vocab, &schema).unwrap()).collect();
    Fixture { vocab, schema, bugs, records, examples }
}

pub fn small_config(vocab: &Vocab) -> ModelConfig {
    ModelConfig { d: 32, heads: 4, encoder_layers: 1, dropout: 0.0, ..ModelConfig::desk(vocab) }
}

/// A model trained until it reproduces the given examples.
pub fn overfit(f: &Fixture, seed: u64, epochs: usize) -> Model<f32> {
    let mut m = Model::new(small_config(&f.vocab), seed).unwrap();
    let cfg = TrainConfig { epochs, lr: 3e-3, dropout: 0.0, batch_size: 4, seed, ..TrainConfig::default() };
    train_loop(&mut m, &f.examples, &[], &cfg, None).unwrap();
    m
}

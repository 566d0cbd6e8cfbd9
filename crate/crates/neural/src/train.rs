//! Joint distillation objective, Adam training loop and ensemble selection.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use treemend_core::graph::{Asg, DecEdge, Record, Vocab, EOT_EDGE};
use treemend_core::lang::{NodeLabel, TypeEnv};
use treemend_core::rules::{node_verdicts, syntax_verdicts, GrammarSchema, PartialTree, Verdict};
use treemend_core::teacher::{shape_by_verdict, StepDistributions};

use crate::config::ModelConfig;
use crate::model::{DecInputs, Forward, Model};
use crate::tape::{cross_entropy, kl_divergence, Tape};
use crate::tensor::Tensor;
use crate::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Models kept by ensemble selection.
    pub ensemble_k: usize,
    /// Models trained before selection.
    pub candidates: usize,
    /// Add the divergence from the rule-shaped teacher to the loss.
    pub distill: bool,
    pub kl_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            batch_size: 8,
            epochs: 30,
            dropout: 0.1,
            seed: 1,
            ensemble_k: 2,
            candidates: 2,
            distill: true,
            kl_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.into()));
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.ensemble_k == 0 || self.ensemble_k > self.candidates {
            return bad("ensemble size must lie in 1..=candidates");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Architecture of candidate `index`: the first keeps `base`, the others
/// draw encoder depth from 1..=3 and width from {32, 64, 96}.
pub fn candidate_config(base: &ModelConfig, seed: u64, index: usize) -> ModelConfig {
    if index == 0 {
        return base.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    ModelConfig {
        encoder_layers: rng.gen_range(1..=3),
        d: *[32, 64, 96].choose(&mut rng).expect("nonempty"),
        ..base.clone()
    }
}

/// Rule verdicts of one gold step, computed on the gold prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct StepVerdicts {
    pub parents: Vec<Verdict>,
    pub edges: Vec<Verdict>,
    pub nodes: Vec<Verdict>,
}

/// Verdicts for every step of a gold sequence.
pub fn gold_verdicts(
    inp: &DecInputs,
    root: &NodeLabel,
    vocab: &Vocab,
    schema: &GrammarSchema,
    env: &TypeEnv,
) -> Result<Vec<StepVerdicts>, NeuralError> {
    let mut tree = PartialTree::new(root.clone());
    let mut out = Vec::with_capacity(inp.len());
    for i in 0..inp.len() {
        let (p, e, n) = (inp.parents[i], inp.edges[i], inp.nodes[i]);
        let edge = DecEdge::from_id(e).ok_or(NeuralError::Label(e))?;
        let sv = syntax_verdicts(&tree, schema);
        let nv = node_verdicts(&tree, (p, edge), env, vocab.labels());
        out.push(StepVerdicts {
            parents: sv.parents.clone(),
            edges: sv.edges[p].to_vec(),
            nodes: nv.verdicts,
        });
        match edge.label() {
            Some(l) => {
                tree.add(p, l, vocab.label(n)?.clone());
            }
            None => tree.finish(),
        }
    }
    Ok(out)
}

/// Detached teacher distributions for given student distributions.
pub fn teachers(student: &[StepDistributions], verdicts: &[StepVerdicts]) -> Vec<StepDistributions> {
    student
        .iter()
        .zip(verdicts)
        .map(|(s, v)| {
            let f = |d: &[f64], v: &[Verdict]| shape_by_verdict(d, v).expect("one verdict per candidate").probs;
            StepDistributions {
                parent: f(&s.parent, &v.parents),
                edge: f(&s.edge, &v.edges),
                node: f(&s.node, &v.nodes),
            }
        })
        .collect()
}

/// Mean over steps of the three cross-entropies, plus the weighted
/// divergences when teachers are given.
pub fn joint_loss(
    student: &[StepDistributions],
    gold: &DecInputs,
    teachers: Option<&[StepDistributions]>,
    kl_weight: f64,
) -> f64 {
    let t = student.len() as f64;
    student
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ce = cross_entropy(&s.parent, gold.parents[i])
                + cross_entropy(&s.edge, gold.edges[i])
                + cross_entropy(&s.node, gold.nodes[i]);
            let kl = teachers.map_or(0.0, |ts| {
                kl_divergence(&s.parent, &ts[i].parent)
                    + kl_divergence(&s.edge, &ts[i].edge)
                    + kl_divergence(&s.node, &ts[i].node)
            });
            ce + kl_weight * kl
        })
        .sum::<f64>()
        / t
}

/// One training example ready for the model.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub asg: Asg,
    pub inputs: DecInputs,
    pub verdicts: Vec<StepVerdicts>,
}

impl Example {
    pub fn from_record(r: &Record, vocab: &Vocab, schema: &GrammarSchema) -> Result<Self, NeuralError> {
        let inputs = DecInputs::from_steps(&r.gold_steps);
        let root = vocab.label(r.gold_steps.root)?.clone();
        let verdicts = gold_verdicts(&inputs, &root, vocab, schema, &r.type_env)?;
        Ok(Self {
            id: r.id.clone(),
            asg: r.asg(),
            inputs,
            verdicts,
        })
    }

    /// Whether the target ends with the end-of-tree step.
    pub fn is_complete(&self) -> bool {
        self.inputs.edges.last() == Some(&EOT_EDGE)
    }
}

/// Loss of one example.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub joint: f64,
    pub ce: f64,
    pub kl: f64,
}

/// Forward (and optionally backward) on one example. Returns the loss and
/// the parameter gradients when requested.
pub fn example_loss(
    model: &Model<f32>,
    ex: &Example,
    distill: bool,
    kl_weight: f64,
    dropout_rng: Option<&mut ChaCha8Rng>,
    grads: bool,
) -> Result<(LossValue, Vec<Option<Vec<f32>>>), NeuralError> {
    let mut tape = Tape::new(&model.params.tensors);
    let mut f = Forward::new(&mut tape, model, dropout_rng);
    let enc = f.encode(&ex.asg)?;
    let heads = f.decode(enc, &ex.inputs)?;
    let teach = distill.then(|| teachers(&f.distributions(heads), &ex.verdicts));
    let parts = f.joint_loss(heads, &ex.inputs, teach.as_deref(), kl_weight);
    let total = f.total(parts);
    let (mut ce, mut kl) = (0.0, 0.0);
    for v in [parts.0, parts.1, parts.2] {
        let p = f.tape.loss_parts(v);
        ce += p.ce;
        kl += p.kl;
    }
    let joint = ce + kl_weight * kl;
    let g = if grads { f.tape.backward(total) } else { Vec::new() };
    Ok((LossValue { joint, ce, kl }, g))
}

/// Mean evaluation-mode loss over examples.
pub fn evaluate(model: &Model<f32>, examples: &[Example], distill: bool, kl_weight: f64) -> Result<LossValue, NeuralError> {
    let mut acc = LossValue::default();
    for ex in examples {
        let (l, _) = example_loss(model, ex, distill, kl_weight, None, false)?;
        acc.joint += l.joint;
        acc.ce += l.ce;
        acc.kl += l.kl;
    }
    let n = examples.len().max(1) as f64;
    Ok(LossValue {
        joint: acc.joint / n,
        ce: acc.ce / n,
        kl: acc.kl / n,
    })
}

/// Adam state for one parameter store.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: i32,
}

impl Adam {
    pub fn new(params: &[Tensor<f32>]) -> Self {
        Self {
            m: params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor<f32>], grads: &[Option<Vec<f32>>], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = cfg.lr as f32;
        let eps = cfg.eps as f32;
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let (m, v, p) = (&mut self.m[i], &mut self.v[i], &mut params[i].data);
            for k in 0..g.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub ce: f64,
    pub kl: f64,
}

/// Train `model` in place. One JSON line per epoch goes to `metrics` when
/// given. Shuffling and dropout derive from `cfg.seed`.
pub fn train_loop(
    model: &mut Model<f32>,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    mut metrics: Option<&mut dyn Write>,
) -> Result<Vec<EpochMetrics>, NeuralError> {
    cfg.validate()?;
    model.cfg.dropout = cfg.dropout;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model.params.tensors);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut out = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut acc = LossValue::default();
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut sum: Vec<Option<Vec<f32>>> = vec![None; model.params.len()];
            for &i in chunk {
                let (l, g) = example_loss(model, &train[i], cfg.distill, cfg.kl_weight, Some(&mut rng), true)?;
                if !l.joint.is_finite() {
                    return Err(NeuralError::NonFinite { epoch, batch });
                }
                acc.joint += l.joint;
                acc.ce += l.ce;
                acc.kl += l.kl;
                for (s, g) in sum.iter_mut().zip(g) {
                    let Some(g) = g else { continue };
                    match s {
                        Some(s) => s.iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                        None => *s = Some(g),
                    }
                }
            }
            let scale = 1.0 / chunk.len() as f32;
            for s in sum.iter_mut().flatten() {
                s.iter_mut().for_each(|x| *x *= scale);
            }
            adam.step(&mut model.params.tensors, &sum, cfg);
            if !model.params.all_finite() {
                return Err(NeuralError::NonFinite { epoch, batch });
            }
        }
        let n = train.len().max(1) as f64;
        let val_loss = if val.is_empty() {
            f64::NAN
        } else {
            evaluate(model, val, cfg.distill, cfg.kl_weight)?.joint
        };
        let m = EpochMetrics {
            epoch,
            train_loss: acc.joint / n,
            val_loss,
            ce: acc.ce / n,
            kl: acc.kl / n,
        };
        if let Some(w) = metrics.as_deref_mut() {
            writeln!(w, "{}", serde_json::to_string(&m)?)?;
        }
        out.push(m);
    }
    Ok(out)
}

/// Train `cfg.candidates` models (candidate `i` uses seed `cfg.seed + i`) and
/// keep the `cfg.ensemble_k` best on `val`, in selection order. Metrics of
/// candidate `i` go to `metrics(i)` when given.
pub fn train_ensemble(
    base: &ModelConfig,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    mut metrics: Option<&mut dyn FnMut(usize) -> Option<Box<dyn Write>>>,
) -> Result<Vec<Model<f32>>, NeuralError> {
    cfg.validate()?;
    let mut cands = Vec::with_capacity(cfg.candidates);
    for i in 0..cfg.candidates {
        let seed = cfg.seed.wrapping_add(i as u64);
        let mut m = Model::new(candidate_config(base, cfg.seed, i), seed)?;
        let c = TrainConfig { seed, ..cfg.clone() };
        let mut sink = metrics.as_mut().and_then(|f| f(i));
        train_loop(&mut m, train, val, &c, sink.as_deref_mut().map(|w| w as &mut dyn Write))?;
        m.cfg.dropout = 0.0;
        cands.push(m);
    }
    let pick = if val.is_empty() {
        (0..cfg.ensemble_k).collect()
    } else {
        ensemble_select(&cands, val, cfg.ensemble_k, cfg.distill)?
    };
    let mut slots: Vec<Option<Model<f32>>> = cands.into_iter().map(Some).collect();
    Ok(pick.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect())
}

/// Indices of the `k` candidates with the lowest validation joint loss;
/// ties go to the lower index.
pub fn ensemble_select(candidates: &[Model<f32>], val: &[Example], k: usize, distill: bool) -> Result<Vec<usize>, NeuralError> {
    if k == 0 || k > candidates.len() {
        return Err(NeuralError::Config(format!("cannot select {k} of {} models", candidates.len())));
    }
    let losses = candidates
        .iter()
        .map(|m| evaluate(m, val, distill, 1.0).map(|l| l.joint))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(select_by_loss(&losses, k))
}

/// Stable top-`k` by ascending loss.
pub fn select_by_loss(losses: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    idx.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_is_stable() {
        assert_eq!(select_by_loss(&[0.5, 0.2, 0.2, 0.1], 3), vec![3, 1, 2]);
        assert_eq!(select_by_loss(&[1.0, 1.0], 1), vec![0]);
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { ensemble_k: 3, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn candidates_vary_within_ranges() {
        let base = ModelConfig::desk(&Vocab::default());
        assert_eq!(candidate_config(&base, 5, 0), base);
        for i in 1..20 {
            let c = candidate_config(&base, 5, i);
            assert!((1..=3).contains(&c.encoder_layers));
            assert!([32, 64, 96].contains(&c.d));
            assert!(c.validate().is_ok());
        }
    }
}

//! Beam search over three-stage tree generation.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use treemend_core::graph::{Asg, DecEdge, EncodedSteps, Vocab, EOT_EDGE, EOT_ID};
use treemend_core::lang::{AstNode, NodeKind, NodeLabel, TypeEnv};
use treemend_core::rules::{node_verdicts, syntax_verdicts, GrammarSchema, PartialTree, Verdict};
use treemend_core::teacher::shape_by_verdict;
use treemend_neural::infer::{DecState, Memory, StackPos};
use treemend_neural::{Model, NeuralError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub width: usize,
    pub max_steps: usize,
    /// Sample from rule-shaped distributions instead of the raw student.
    pub shaping: bool,
    /// Parents expanded per hypothesis.
    pub parent_k: usize,
    /// Edges expanded per parent.
    pub edge_k: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            width: 100,
            max_steps: 64,
            shaping: true,
            parent_k: 2,
            edge_k: 2,
        }
    }
}

/// A finished generation.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub tree: PartialTree,
    pub steps: EncodedSteps,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Length-normalized log-probability.
    pub fn score(&self) -> f64 {
        self.log_prob / self.steps.steps.len().max(1) as f64
    }

    pub fn ast(&self) -> AstNode {
        self.tree.to_ast()
    }
}

struct Live {
    tree: PartialTree,
    steps: Vec<(usize, usize, usize)>,
    log_prob: f64,
    state: DecState<f32>,
}

struct Cand {
    src: usize,
    p: usize,
    e: usize,
    n: usize,
    log_prob: f64,
    slot: usize,
}

/// Indices of the `k` largest positive entries, ties to the lower index.
pub fn top_k(dist: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).filter(|&i| dist[i] > 0.0).collect();
    idx.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn shaped(dist: Vec<f64>, verdicts: &[Verdict], on: bool) -> Vec<f64> {
    if !on {
        return dist;
    }
    shape_by_verdict(&dist, verdicts).expect("one verdict per entry").probs
}

fn order(a: &Cand, b: &Cand) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then(a.src.cmp(&b.src))
        .then(a.p.cmp(&b.p))
        .then(a.e.cmp(&b.e))
        .then(a.n.cmp(&b.n))
}

/// Root label of every generated patch.
pub fn patch_root() -> NodeLabel {
    NodeLabel::Kind(NodeKind::BlockStmt)
}

/// Run one model. Only hypotheses that emitted the end-of-tree step are
/// returned, sorted by length-normalized score.
pub fn beam_search(
    model: &Model<f32>,
    asg: &Asg,
    env: &TypeEnv,
    vocab: &Vocab,
    schema: &GrammarSchema,
    cfg: &BeamConfig,
) -> Result<Vec<Hypothesis>, NeuralError> {
    let mem = model.memory(asg)?;
    search(model, &mem, env, vocab, schema, cfg)
}

fn search(
    model: &Model<f32>,
    mem: &Memory<f32>,
    env: &TypeEnv,
    vocab: &Vocab,
    schema: &GrammarSchema,
    cfg: &BeamConfig,
) -> Result<Vec<Hypothesis>, NeuralError> {
    let root = patch_root();
    let root_id = vocab.id(&root)?;
    let mut alive = vec![Live {
        tree: PartialTree::new(root),
        steps: Vec::new(),
        log_prob: 0.0,
        state: DecState::new(root_id),
    }];
    let mut finished = Vec::new();
    let max_steps = cfg.max_steps.min(model.cfg.max_steps);
    let labels = vocab.labels();
    for _ in 0..max_steps {
        if alive.is_empty() || finished.len() >= cfg.width {
            break;
        }
        let mut cands = Vec::new();
        let mut slots: Vec<(Arc<StackPos<f32>>, Arc<StackPos<f32>>)> = Vec::new();
        for (h, live) in alive.iter_mut().enumerate() {
            let sv = syntax_verdicts(&live.tree, schema);
            let pd = shaped(live.state.parent_step(model, mem)?, &sv.parents, cfg.shaping);
            for p in top_k(&pd, cfg.parent_k) {
                let (epos, ed) = live.state.edge_step(model, mem, p);
                let mut ed = shaped(ed, &sv.edges[p], cfg.shaping);
                if !sv.can_finish() {
                    ed[EOT_EDGE] = 0.0;
                }
                for e in top_k(&ed, cfg.edge_k) {
                    let (npos, nd) = live.state.node_step(model, mem, &epos, p, e);
                    let slot = slots.len();
                    slots.push((epos.clone(), npos));
                    let base = live.log_prob + pd[p].ln() + ed[e].ln();
                    if e == EOT_EDGE {
                        cands.push(Cand { src: h, p, e, n: EOT_ID, log_prob: base, slot });
                        continue;
                    }
                    let mut nd = if cfg.shaping {
                        let edge = DecEdge::from_id(e).expect("edge id");
                        shaped(nd, &node_verdicts(&live.tree, (p, edge), env, labels).verdicts, true)
                    } else {
                        nd
                    };
                    nd[EOT_ID] = 0.0;
                    for n in top_k(&nd, cfg.width) {
                        cands.push(Cand { src: h, p, e, n, log_prob: base + nd[n].ln(), slot });
                    }
                }
            }
        }
        cands.sort_by(order);
        cands.truncate(cfg.width);
        let mut next = Vec::with_capacity(cands.len());
        for c in cands {
            let live = &alive[c.src];
            let mut steps = live.steps.clone();
            steps.push((c.p, c.e, c.n));
            let mut tree = live.tree.clone();
            if c.e == EOT_EDGE {
                tree.finish();
                finished.push(Hypothesis {
                    tree,
                    steps: EncodedSteps { root: root_id, steps },
                    log_prob: c.log_prob,
                    finished: true,
                });
                continue;
            }
            let edge = DecEdge::from_id(c.e).and_then(DecEdge::label).expect("label edge");
            tree.add(c.p, edge, labels[c.n].clone());
            let mut state = live.state.clone();
            let (epos, npos) = slots[c.slot].clone();
            state.commit(c.p, c.e, c.n, epos, npos);
            next.push(Live { tree, steps, log_prob: c.log_prob, state });
        }
        alive = next;
    }
    finished.sort_by(|a: &Hypothesis, b: &Hypothesis| {
        b.score().total_cmp(&a.score()).then_with(|| a.steps.steps.cmp(&b.steps.steps))
    });
    Ok(finished)
}

//! Random tree rollouts driven by a noise "student", optionally shaped by the
//! rule verdicts. Used to measure how often generation yields valid trees.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::graph::{DecEdge, NUM_DECODER_EDGES};
use crate::lang::{NodeKind, NodeLabel, TypeEnv};
use crate::rules::{node_verdicts, syntax_verdicts, GrammarSchema, PartialTree};
use crate::teacher::shape_by_verdict;

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    /// Sample from the teacher instead of the raw student.
    pub shaping: bool,
    /// Steps before which the student avoids closing the tree and after
    /// which it prefers closing it.
    pub budget: usize,
    /// Hard cap; an unfinished rollout counts as failed.
    pub max_steps: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            shaping: true,
            budget: 12,
            max_steps: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub tree: PartialTree,
    pub finished: bool,
    pub steps: usize,
    /// Steps where shaping fell back to the student.
    pub degenerate: usize,
}

const QUIET: f64 = 1e-6;

fn noise<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn sample<R: Rng>(rng: &mut R, dist: &[f64]) -> usize {
    WeightedIndex::new(dist).map(|d| d.sample(rng)).unwrap_or(0)
}

fn is_leafy(label: &NodeLabel) -> bool {
    match label {
        NodeLabel::Kind(k) => matches!(
            k,
            NodeKind::Literal | NodeKind::VarRef | NodeKind::BasicType | NodeKind::ReturnStmt
        ),
        _ => true,
    }
}

/// Grow one tree from a `BlockStmt` root.
pub fn random_rollout<R: Rng>(
    rng: &mut R,
    env: &TypeEnv,
    schema: &GrammarSchema,
    labels: &[NodeLabel],
    cfg: &RolloutConfig,
) -> Rollout {
    let mut tree = PartialTree::new(NodeLabel::Kind(NodeKind::BlockStmt));
    let mut degenerate = 0;
    for step in 0..cfg.max_steps {
        let wind_down = step >= cfg.budget;
        let n = tree.len();

        let mut p_dist = noise(rng, n);
        if wind_down {
            for x in p_dist.iter_mut().skip(1) {
                *x *= QUIET;
            }
        }
        let sv = syntax_verdicts(&tree, schema);
        let p = if cfg.shaping {
            let s = shape_by_verdict(&p_dist, &sv.parents).expect("verdict per node");
            degenerate += s.degenerate as usize;
            sample(rng, &s.probs)
        } else {
            sample(rng, &p_dist)
        };

        let mut e_dist = noise(rng, NUM_DECODER_EDGES);
        for (i, x) in e_dist.iter_mut().enumerate() {
            if (i == DecEdge::Eot.id()) != wind_down {
                *x *= QUIET;
            }
        }
        let e = if cfg.shaping {
            let s = shape_by_verdict(&e_dist, &sv.edges[p]).expect("verdict per edge");
            degenerate += s.degenerate as usize;
            sample(rng, &s.probs)
        } else {
            sample(rng, &e_dist)
        };
        let edge = DecEdge::from_id(e).expect("edge id in range");
        let label = match edge {
            DecEdge::Eot => None,
            DecEdge::Label(l) => Some(l),
        };

        let mut n_dist = noise(rng, labels.len());
        if wind_down {
            for (x, l) in n_dist.iter_mut().zip(labels) {
                if !is_leafy(l) {
                    *x *= QUIET;
                }
            }
        }
        let node = if cfg.shaping {
            let nv = node_verdicts(&tree, (p, edge), env, labels);
            let s = shape_by_verdict(&n_dist, &nv.verdicts).expect("verdict per label");
            degenerate += s.degenerate as usize;
            sample(rng, &s.probs)
        } else {
            sample(rng, &n_dist)
        };

        match label {
            None => {
                tree.finish();
                return Rollout {
                    tree,
                    finished: true,
                    steps: step + 1,
                    degenerate,
                };
            }
            Some(l) => {
                tree.add(p, l, labels[node].clone());
            }
        }
    }
    Rollout {
        tree,
        finished: false,
        steps: cfg.max_steps,
        degenerate,
    }
}

/// Whether a finished rollout is a valid tree.
pub fn rollout_valid(r: &Rollout, env: &TypeEnv, schema: &GrammarSchema) -> bool {
    r.finished
        && (0..r.tree.len()).all(|i| *r.tree.label(i) != NodeLabel::Eot)
        && crate::rules::check_tree_valid(&r.tree.to_ast(), schema, env).valid
}

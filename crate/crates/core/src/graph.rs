//! Encoder inputs (abstract syntax graphs) and decoder targets (step
//! sequences) built from normalized trees.

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::lang::{AstNode, EdgeLabel, LineSpan, NodeKind, NodeLabel, BASIC_TYPES, OPERATORS};
use crate::normalize::{Family, NormalizationMap, LITERAL_WHITELIST};
use crate::lang::TypeEnv;

/// Number of AST edge labels.
pub const NUM_EDGE_LABELS: usize = EdgeLabel::ALL.len();
/// Decoder edge vocabulary: every AST label plus the reserved `eot` label.
pub const NUM_DECODER_EDGES: usize = NUM_EDGE_LABELS + 1;
pub const EOT_EDGE: usize = NUM_EDGE_LABELS;
/// Adjacency ids: 0 = none, forward labels, reverse labels, sibling.
pub const SIBLING_ID: usize = 2 * NUM_EDGE_LABELS + 1;
pub const NUM_ADJACENCY_IDS: usize = SIBLING_ID + 1;

pub fn forward_id(label: EdgeLabel) -> usize {
    label.index() + 1
}

pub fn reverse_id(label: EdgeLabel) -> usize {
    NUM_EDGE_LABELS + label.index() + 1
}

/// An edge in the decoder's output space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecEdge {
    Label(EdgeLabel),
    Eot,
}

impl DecEdge {
    pub fn id(self) -> usize {
        match self {
            DecEdge::Label(l) => l.index(),
            DecEdge::Eot => EOT_EDGE,
        }
    }

    pub fn from_id(id: usize) -> Option<DecEdge> {
        if id == EOT_EDGE {
            Some(DecEdge::Eot)
        } else {
            EdgeLabel::ALL.get(id).map(|l| DecEdge::Label(*l))
        }
    }

    pub fn label(self) -> Option<EdgeLabel> {
        match self {
            DecEdge::Label(l) => Some(l),
            DecEdge::Eot => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DecEdge::Label(l) => l.as_str(),
            DecEdge::Eot => "eot",
        }
    }
}

/// How many numbered placeholders of each family the vocabulary holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub max_var: usize,
    pub max_func: usize,
    pub max_type: usize,
    pub max_lit: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            max_var: 16,
            max_func: 8,
            max_type: 8,
            max_lit: 8,
        }
    }
}

/// Closed node-label vocabulary: EOT, node kinds, fixed tokens and
/// placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub config: VocabConfig,
    labels: Vec<NodeLabel>,
    index: std::collections::HashMap<NodeLabel, usize>,
}

pub const EOT_ID: usize = 0;

impl Vocab {
    pub fn new(config: VocabConfig) -> Vocab {
        let mut labels = vec![NodeLabel::Eot];
        for k in NodeKind::ALL {
            if *k != NodeKind::Token {
                labels.push(NodeLabel::Kind(*k));
            }
        }
        let mut tokens: Vec<String> = Vec::new();
        tokens.extend(OPERATORS.iter().map(|s| s.to_string()));
        tokens.extend(BASIC_TYPES.iter().map(|s| s.to_string()));
        tokens.extend(LITERAL_WHITELIST.iter().map(|s| s.to_string()));
        for (family, n) in [
            (Family::Var, config.max_var),
            (Family::Func, config.max_func),
            (Family::Type, config.max_type),
            (Family::Lit, config.max_lit),
        ] {
            tokens.push(family.unk().to_string());
            tokens.extend((1..=n).map(|k| family.placeholder(k)));
        }
        labels.extend(tokens.into_iter().map(NodeLabel::Token));
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Vocab {
            config,
            labels,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn id(&self, label: &NodeLabel) -> Result<usize, GraphError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| GraphError::OutOfVocabulary(label.text().to_string()))
    }

    pub fn label(&self, id: usize) -> Result<&NodeLabel, GraphError> {
        self.labels.get(id).ok_or(GraphError::BadLabelId(id))
    }

    /// Whether every placeholder of `map` fits the numbered ranges.
    pub fn covers(&self, map: &NormalizationMap) -> bool {
        map.vars.len() <= self.config.max_var
            && map.funcs.len() <= self.config.max_func
            && map.types.len() <= self.config.max_type
            && map.literals.len() <= self.config.max_lit
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::new(VocabConfig::default())
    }
}

/// Encoder input: pre-order labels, sparse labeled adjacency and buggy-line
/// flags (1 = on a buggy line, 2 = elsewhere).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asg {
    pub node_seq: Vec<usize>,
    /// `(i, j, id)` triplets, sorted, each with `id != 0`.
    pub adjacency: Vec<(usize, usize, usize)>,
    pub buggy_loc: Vec<u8>,
}

impl Asg {
    pub fn len(&self) -> usize {
        self.node_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_seq.is_empty()
    }

    /// Dense `L x L` adjacency matrix.
    pub fn dense(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut m = vec![vec![0; n]; n];
        for &(i, j, id) in &self.adjacency {
            m[i][j] = id;
        }
        m
    }

    /// Neighbor lists `(j, id)` for each node, ordered by `j`.
    pub fn neighbors(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.len()];
        for &(i, j, id) in &self.adjacency {
            out[i].push((j, id));
        }
        out
    }
}

/// Build the graph of `tree` with nodes inside `buggy_span` flagged.
pub fn build_asg(tree: &AstNode, buggy_span: LineSpan, vocab: &Vocab) -> Result<Asg, GraphError> {
    let root_lines = tree.lines.ok_or(GraphError::MissingLines)?;
    if buggy_span.start > buggy_span.end || !root_lines.contains(&buggy_span) {
        return Err(GraphError::SpanOutside {
            start: buggy_span.start,
            end: buggy_span.end,
            first: root_lines.start,
            last: root_lines.end,
        });
    }
    let mut asg = Asg {
        node_seq: Vec::new(),
        adjacency: Vec::new(),
        buggy_loc: Vec::new(),
    };
    fn walk(node: &AstNode, span: LineSpan, vocab: &Vocab, asg: &mut Asg) -> Result<usize, GraphError> {
        let me = asg.node_seq.len();
        asg.node_seq.push(vocab.id(&node.label())?);
        let lines = node.lines.ok_or(GraphError::MissingLines)?;
        asg.buggy_loc.push(if span.contains(&lines) { 1 } else { 2 });
        let mut prev: Option<usize> = None;
        for (label, child) in &node.children {
            let c = walk(child, span, vocab, asg)?;
            asg.adjacency.push((me, c, forward_id(*label)));
            asg.adjacency.push((c, me, reverse_id(*label)));
            if let Some(p) = prev {
                asg.adjacency.push((p, c, SIBLING_ID));
                asg.adjacency.push((c, p, SIBLING_ID));
            }
            prev = Some(c);
        }
        Ok(me)
    }
    walk(tree, buggy_span, vocab, &mut asg)?;
    asg.adjacency.sort_unstable();
    Ok(asg)
}

/// One decoder step: attach `node` under `parent` via `edge`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub parent: usize,
    pub edge: DecEdge,
    pub node: NodeLabel,
}

/// Decoder targets. Node `0` is the root; the node produced by step `i` has
/// index `i + 1`. A complete sequence ends with `(0, eot, EOT)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldSteps {
    pub root: NodeLabel,
    pub steps: Vec<Step>,
}

impl GoldSteps {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn encode(&self, vocab: &Vocab) -> Result<EncodedSteps, GraphError> {
        Ok(EncodedSteps {
            root: vocab.id(&self.root)?,
            steps: self
                .steps
                .iter()
                .map(|s| Ok((s.parent, s.edge.id(), vocab.id(&s.node)?)))
                .collect::<Result<_, GraphError>>()?,
        })
    }
}

/// Id form of [`GoldSteps`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSteps {
    pub root: usize,
    pub steps: Vec<(usize, usize, usize)>,
}

impl EncodedSteps {
    pub fn decode(&self, vocab: &Vocab) -> Result<GoldSteps, GraphError> {
        Ok(GoldSteps {
            root: vocab.label(self.root)?.clone(),
            steps: self
                .steps
                .iter()
                .map(|&(p, e, n)| {
                    Ok(Step {
                        parent: p,
                        edge: DecEdge::from_id(e).ok_or(GraphError::BadLabelId(e))?,
                        node: vocab.label(n)?.clone(),
                    })
                })
                .collect::<Result<_, GraphError>>()?,
        })
    }
}

/// Pre-order, left-to-right emission of every non-root node, closed by the
/// end-of-tree step.
pub fn linearize_target(patch: &AstNode) -> GoldSteps {
    let mut steps = Vec::new();
    fn walk(node: &AstNode, me: usize, steps: &mut Vec<Step>) {
        for (label, child) in &node.children {
            steps.push(Step {
                parent: me,
                edge: DecEdge::Label(*label),
                node: child.label(),
            });
            let idx = steps.len();
            walk(child, idx, steps);
        }
    }
    walk(patch, 0, &mut steps);
    steps.push(Step {
        parent: 0,
        edge: DecEdge::Eot,
        node: NodeLabel::Eot,
    });
    GoldSteps {
        root: patch.label(),
        steps,
    }
}

/// Inverse of [`linearize_target`]; a trailing end-of-tree step is optional.
pub fn rebuild_tree(steps: &GoldSteps) -> Result<AstNode, GraphError> {
    let mut labels = vec![steps.root.clone()];
    let mut children: Vec<Vec<(EdgeLabel, usize)>> = vec![Vec::new()];
    if steps.root == NodeLabel::Eot {
        return Err(GraphError::BadStep {
            step: 0,
            message: "root cannot be the end-of-tree label".into(),
        });
    }
    for (i, s) in steps.steps.iter().enumerate() {
        if s.parent >= labels.len() {
            return Err(GraphError::MalformedSteps {
                step: i,
                parent: s.parent,
                available: labels.len(),
            });
        }
        match (s.edge, &s.node) {
            (DecEdge::Eot, NodeLabel::Eot) => {
                if i + 1 != steps.steps.len() {
                    return Err(GraphError::EarlyEnd(i));
                }
                if s.parent != 0 {
                    return Err(GraphError::BadStep {
                        step: i,
                        message: "end-of-tree must attach to the root".into(),
                    });
                }
            }
            (DecEdge::Eot, _) | (_, NodeLabel::Eot) => {
                return Err(GraphError::BadStep {
                    step: i,
                    message: "end-of-tree edge and label must go together".into(),
                })
            }
            (DecEdge::Label(l), node) => {
                children[s.parent].push((l, labels.len()));
                labels.push(node.clone());
                children.push(Vec::new());
            }
        }
    }
    fn build(i: usize, labels: &[NodeLabel], children: &[Vec<(EdgeLabel, usize)>]) -> AstNode {
        let mut n = AstNode::from_label(&labels[i]).expect("non-EOT label");
        for &(l, c) in &children[i] {
            n.children.push((l, build(c, labels, children)));
        }
        n
    }
    Ok(build(0, &labels, &children))
}

/// One preprocessed training or inference example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub node_seq: Vec<usize>,
    pub adjacency: Vec<(usize, usize, usize)>,
    pub buggy_loc: Vec<u8>,
    pub gold_steps: EncodedSteps,
    pub normalization_map: NormalizationMap,
    /// Type facts of the focal function in placeholder space.
    pub type_env: TypeEnv,
}

impl Record {
    pub fn asg(&self) -> Asg {
        Asg {
            node_seq: self.node_seq.clone(),
            adjacency: self.adjacency.clone(),
            buggy_loc: self.buggy_loc.clone(),
        }
    }
}

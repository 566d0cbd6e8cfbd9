use crate::lang::{AstNode, EdgeLabel, NodeKind, NodeLabel};

const LABELS: usize = EdgeLabel::ALL.len();

/// A tree under construction. Nodes are numbered in emission order (root is
/// 0) and per-(node, label) edge counters are kept up to date on every
/// insertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialTree {
    labels: Vec<NodeLabel>,
    parents: Vec<Option<(usize, EdgeLabel)>>,
    children: Vec<Vec<(EdgeLabel, usize)>>,
    counts: Vec<[u16; LABELS]>,
    finished: bool,
}

impl PartialTree {
    pub fn new(root: NodeLabel) -> Self {
        Self {
            labels: vec![root],
            parents: vec![None],
            children: vec![Vec::new()],
            counts: vec![[0; LABELS]],
            finished: false,
        }
    }

    /// Flatten an AST in pre-order.
    pub fn from_ast(ast: &AstNode) -> Self {
        let mut t = PartialTree::new(ast.label());
        fn walk(t: &mut PartialTree, node: &AstNode, me: usize) {
            for (l, c) in &node.children {
                let id = t.add(me, *l, c.label());
                walk(t, c, id);
            }
        }
        walk(&mut t, ast, 0);
        t
    }

    pub fn to_ast(&self) -> AstNode {
        self.subtree(0)
    }

    pub fn subtree(&self, i: usize) -> AstNode {
        let mut n = AstNode::from_label(&self.labels[i]).unwrap_or_else(|| AstNode::token(""));
        for &(l, c) in &self.children[i] {
            n.children.push((l, self.subtree(c)));
        }
        n
    }

    /// Attach a new node and return its index.
    pub fn add(&mut self, parent: usize, edge: EdgeLabel, label: NodeLabel) -> usize {
        assert!(parent < self.labels.len(), "parent {parent} not emitted");
        let id = self.labels.len();
        self.labels.push(label);
        self.parents.push(Some((parent, edge)));
        self.children.push(Vec::new());
        self.counts.push([0; LABELS]);
        self.children[parent].push((edge, id));
        self.counts[parent][edge.index()] += 1;
        id
    }

    /// Undo the most recent [`PartialTree::add`].
    pub fn pop(&mut self) {
        assert!(self.labels.len() > 1, "cannot remove the root");
        let (parent, edge) = self.parents.pop().unwrap().unwrap();
        self.labels.pop();
        self.children.pop();
        self.counts.pop();
        self.children[parent].pop();
        self.counts[parent][edge.index()] -= 1;
    }

    pub fn finish(&mut self) {
        self.finished = true;
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, i: usize) -> &NodeLabel {
        &self.labels[i]
    }

    pub fn kind(&self, i: usize) -> Option<NodeKind> {
        self.labels[i].kind()
    }

    pub fn token(&self, i: usize) -> Option<&str> {
        self.labels[i].token()
    }

    pub fn parent(&self, i: usize) -> Option<(usize, EdgeLabel)> {
        self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[(EdgeLabel, usize)] {
        &self.children[i]
    }

    pub fn children_with(&self, i: usize, label: EdgeLabel) -> impl Iterator<Item = usize> + '_ {
        self.children[i]
            .iter()
            .filter(move |(l, _)| *l == label)
            .map(|(_, c)| *c)
    }

    pub fn child(&self, i: usize, label: EdgeLabel) -> Option<usize> {
        self.children_with(i, label).next()
    }

    /// Text of the first token child under `label`.
    pub fn child_token(&self, i: usize, label: EdgeLabel) -> Option<&str> {
        self.child(i, label).and_then(|c| self.token(c))
    }

    /// `F(p, e)`: number of `e`-labeled edges leaving `p`.
    pub fn edge_count(&self, p: usize, e: EdgeLabel) -> usize {
        self.counts[p][e.index()] as usize
    }

    /// Ancestors of `i`, nearest first, excluding `i` itself.
    pub fn ancestors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.parents[i].map(|(p, _)| p);
        std::iter::from_fn(move || {
            let c = cur?;
            cur = self.parents[c].map(|(p, _)| p);
            Some(c)
        })
    }

    /// All `(parent, label, child)` edges in emission order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, EdgeLabel, usize)> + '_ {
        (1..self.len()).map(|c| {
            let (p, l) = self.parents[c].unwrap();
            (p, l, c)
        })
    }
}

use super::schema::{EdgeClass, GrammarSchema};
use super::tree::PartialTree;
use super::Verdict;
use crate::graph::{DecEdge, EOT_EDGE, NUM_DECODER_EDGES};
use crate::lang::EdgeLabel;

/// Parent and per-parent edge verdicts for one decoding iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxVerdicts {
    /// Verdict of every emitted node as the next parent.
    pub parents: Vec<Verdict>,
    /// Per node, the verdict of every decoder edge id (AST labels then `eot`).
    pub edges: Vec<[Verdict; NUM_DECODER_EDGES]>,
}

impl SyntaxVerdicts {
    fn nodes_with(&self, v: Verdict) -> Vec<usize> {
        (0..self.parents.len()).filter(|&i| self.parents[i] == v).collect()
    }

    pub fn p_must(&self) -> Vec<usize> {
        self.nodes_with(Verdict::Must)
    }

    pub fn p_might(&self) -> Vec<usize> {
        self.nodes_with(Verdict::Might)
    }

    pub fn p_invalid(&self) -> Vec<usize> {
        self.nodes_with(Verdict::Invalid)
    }

    pub fn edges_with(&self, p: usize, v: Verdict) -> Vec<DecEdge> {
        (0..NUM_DECODER_EDGES)
            .filter(|&e| self.edges[p][e] == v)
            .map(|e| DecEdge::from_id(e).unwrap())
            .collect()
    }

    pub fn e_must(&self, p: usize) -> Vec<DecEdge> {
        self.edges_with(p, Verdict::Must)
    }

    pub fn e_might(&self, p: usize) -> Vec<DecEdge> {
        self.edges_with(p, Verdict::Might)
    }

    pub fn e_invalid(&self, p: usize) -> Vec<DecEdge> {
        self.edges_with(p, Verdict::Invalid)
    }

    /// Whether the end-of-tree step is currently allowed.
    pub fn can_finish(&self) -> bool {
        self.edges[0][EOT_EDGE] != Verdict::Invalid
    }
}

/// Verdict of one AST edge label for a node, from its class and count.
pub fn edge_verdict(class: Option<EdgeClass>, count: usize) -> Verdict {
    match (class, count) {
        (Some(EdgeClass::Req), 0) | (Some(EdgeClass::ReqPlus), 0) => Verdict::Must,
        (Some(EdgeClass::ReqPlus), _) | (Some(EdgeClass::Opt), 0) | (Some(EdgeClass::OptStar), _) => {
            Verdict::Might
        }
        _ => Verdict::Invalid,
    }
}

/// Apply the four syntax rules to every emitted node.
///
/// An unmet required label makes the node a must-parent; otherwise any open
/// optional capacity makes it a might-parent; a node with neither is invalid.
/// The `eot` edge is open on the root exactly when no node is a must-parent.
pub fn syntax_verdicts(tree: &PartialTree, schema: &GrammarSchema) -> SyntaxVerdicts {
    let n = tree.len();
    let mut edges = vec![[Verdict::Invalid; NUM_DECODER_EDGES]; n];
    let mut parents = vec![Verdict::Invalid; n];
    let mut any_must = false;
    for (i, row) in edges.iter_mut().enumerate() {
        if let Some(kind) = tree.kind(i) {
            for l in EdgeLabel::ALL {
                row[l.index()] = edge_verdict(schema.class(kind, *l), tree.edge_count(i, *l));
            }
        }
        parents[i] = row
            .iter()
            .copied()
            .min()
            .unwrap_or(Verdict::Invalid);
        any_must |= parents[i] == Verdict::Must;
    }
    if !any_must && !tree.is_finished() {
        edges[0][EOT_EDGE] = Verdict::Might;
        if parents[0] == Verdict::Invalid {
            parents[0] = Verdict::Might;
        }
    }
    SyntaxVerdicts { parents, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{NodeKind, NodeLabel};

    fn kind(k: NodeKind) -> NodeLabel {
        NodeLabel::Kind(k)
    }

    #[test]
    fn member_ref_rows() {
        let schema = GrammarSchema::desk();
        let mut t = PartialTree::new(kind(NodeKind::BlockStmt));
        let s = t.add(0, EdgeLabel::Statements, kind(NodeKind::ExprStmt));
        let c = t.add(s, EdgeLabel::Value, kind(NodeKind::FuncInvoc));
        let m = t.add(c, EdgeLabel::Args, kind(NodeKind::MemberRef));
        let v = syntax_verdicts(&t, &schema);
        assert!(v.p_must().contains(&m));
        assert_eq!(v.e_must(m), vec![DecEdge::Label(EdgeLabel::Member)]);
        assert!(!v.can_finish());

        t.add(m, EdgeLabel::Member, NodeLabel::Token("VAR1".into()));
        let v = syntax_verdicts(&t, &schema);
        assert!(!v.p_must().contains(&m));
        assert!(v.p_might().contains(&m));
        let might = v.e_might(m);
        assert!(might.contains(&DecEdge::Label(EdgeLabel::Qualifier)));
        assert!(might.contains(&DecEdge::Label(EdgeLabel::Selectors)));
        assert!(v.e_invalid(m).contains(&DecEdge::Label(EdgeLabel::Condition)));
        assert!(v.e_invalid(m).contains(&DecEdge::Label(EdgeLabel::Member)));
    }

    #[test]
    fn leaf_kinds_are_exhausted() {
        let schema = GrammarSchema::desk();
        let mut t = PartialTree::new(kind(NodeKind::BlockStmt));
        let r = t.add(0, EdgeLabel::Statements, kind(NodeKind::ReturnStmt));
        let l = t.add(r, EdgeLabel::Value, kind(NodeKind::Literal));
        let tok = t.add(l, EdgeLabel::Value, NodeLabel::Token("1".into()));
        let v = syntax_verdicts(&t, &schema);
        assert_eq!(v.parents[l], Verdict::Invalid);
        assert_eq!(v.parents[tok], Verdict::Invalid);
        assert_eq!(v.parents[r], Verdict::Invalid);
        assert_eq!(v.parents[0], Verdict::Might);
        assert!(v.can_finish());
        assert_eq!(v.e_might(0), vec![DecEdge::Label(EdgeLabel::Statements), DecEdge::Eot]);
    }
}

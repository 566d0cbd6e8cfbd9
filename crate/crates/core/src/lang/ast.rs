use std::fmt;

use serde::{Deserialize, Serialize};

use super::grammar::{EdgeLabel, NodeKind};

/// Inclusive source line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: u32,
    pub end: u32,
}

impl LineSpan {
    pub fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn merge(self, other: LineSpan) -> LineSpan {
        LineSpan::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// A labeled-edge syntax tree node.
///
/// Equality is structural: kind, token and the ordered children. Line
/// annotations are carried along but never compared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<(EdgeLabel, AstNode)>,
    #[serde(default, skip)]
    pub lines: Option<LineSpan>,
}

impl PartialEq for AstNode {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.token == other.token && self.children == other.children
    }
}

impl Eq for AstNode {}

/// The decoder-facing label of a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeLabel {
    Kind(NodeKind),
    Token(String),
    /// Reserved end-of-tree marker.
    Eot,
}

pub const EOT_TEXT: &str = "<EOT>";

impl NodeLabel {
    pub fn kind(&self) -> Option<NodeKind> {
        match self {
            NodeLabel::Kind(k) => Some(*k),
            NodeLabel::Token(_) => Some(NodeKind::Token),
            NodeLabel::Eot => None,
        }
    }

    pub fn token(&self) -> Option<&str> {
        match self {
            NodeLabel::Token(t) => Some(t),
            _ => None,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            NodeLabel::Kind(k) => k.as_str(),
            NodeLabel::Token(t) => t,
            NodeLabel::Eot => EOT_TEXT,
        }
    }

    /// Inverse of [`NodeLabel::text`]: kind names win over identical tokens.
    pub fn from_text(text: &str) -> NodeLabel {
        if text == EOT_TEXT {
            NodeLabel::Eot
        } else if let Ok(kind) = text.parse::<NodeKind>() {
            if kind == NodeKind::Token {
                NodeLabel::Token(text.to_string())
            } else {
                NodeLabel::Kind(kind)
            }
        } else {
            NodeLabel::Token(text.to_string())
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

impl AstNode {
    pub fn new(kind: NodeKind) -> Self {
        Self {
            kind,
            token: None,
            children: Vec::new(),
            lines: None,
        }
    }

    pub fn token(text: impl Into<String>) -> Self {
        Self {
            kind: NodeKind::Token,
            token: Some(text.into()),
            children: Vec::new(),
            lines: None,
        }
    }

    pub fn from_label(label: &NodeLabel) -> Option<Self> {
        match label {
            NodeLabel::Kind(k) => Some(AstNode::new(*k)),
            NodeLabel::Token(t) => Some(AstNode::token(t.clone())),
            NodeLabel::Eot => None,
        }
    }

    pub fn with(mut self, label: EdgeLabel, child: AstNode) -> Self {
        self.children.push((label, child));
        self
    }

    pub fn with_lines(mut self, lines: LineSpan) -> Self {
        self.lines = Some(lines);
        self
    }

    pub fn label(&self) -> NodeLabel {
        match (&self.kind, &self.token) {
            (NodeKind::Token, Some(t)) => NodeLabel::Token(t.clone()),
            (NodeKind::Token, None) => NodeLabel::Token(String::new()),
            (k, _) => NodeLabel::Kind(*k),
        }
    }

    pub fn text(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn child(&self, label: EdgeLabel) -> Option<&AstNode> {
        self.children
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| c)
    }

    pub fn child_mut(&mut self, label: EdgeLabel) -> Option<&mut AstNode> {
        self.children
            .iter_mut()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| c)
    }

    pub fn children_with(&self, label: EdgeLabel) -> impl Iterator<Item = &AstNode> {
        self.children
            .iter()
            .filter(move |(l, _)| *l == label)
            .map(|(_, c)| c)
    }

    pub fn count(&self, label: EdgeLabel) -> usize {
        self.children.iter().filter(|(l, _)| *l == label).count()
    }

    /// Text of the token leaf under `label`, if any.
    pub fn child_text(&self, label: EdgeLabel) -> Option<&str> {
        self.child(label).and_then(|c| c.text())
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|(_, c)| c.node_count())
            .sum::<usize>()
    }

    /// Pre-order traversal.
    pub fn preorder(&self) -> Vec<&AstNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            for (_, c) in n.children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut AstNode)) {
        f(self);
        for (_, c) in &mut self.children {
            c.visit_mut(f);
        }
    }

    /// Stable-sort every child list into the kind's canonical label order.
    pub fn canonicalize(&mut self) {
        let kind = self.kind;
        self.children.sort_by_key(|(l, _)| kind.child_rank(*l));
        for (_, c) in &mut self.children {
            c.canonicalize();
        }
    }

    pub fn canonical(&self) -> AstNode {
        let mut c = self.clone();
        c.canonicalize();
        c
    }

    pub fn strip_lines(&mut self) {
        self.visit_mut(&mut |n| n.lines = None);
    }

    /// Compact s-expression rendering, e.g. `(VarRef name:x)`.
    pub fn sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s);
        s
    }

    fn write_sexpr(&self, out: &mut String) {
        if self.kind == NodeKind::Token {
            out.push_str(self.text().unwrap_or(""));
            return;
        }
        out.push('(');
        out.push_str(self.kind.as_str());
        for (l, c) in &self.children {
            out.push(' ');
            out.push_str(l.as_str());
            out.push(':');
            c.write_sexpr(out);
        }
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_ignores_lines() {
        let a = AstNode::new(NodeKind::VarRef).with(EdgeLabel::Name, AstNode::token("x"));
        let b = a.clone().with_lines(LineSpan::new(3, 3));
        assert_eq!(a, b);
        assert_ne!(
            a,
            AstNode::new(NodeKind::VarRef).with(EdgeLabel::Name, AstNode::token("y"))
        );
    }

    #[test]
    fn canonical_order_is_stable_within_label() {
        let call = AstNode::new(NodeKind::FuncInvoc)
            .with(EdgeLabel::Args, AstNode::token("a"))
            .with(EdgeLabel::Member, AstNode::token("f"))
            .with(EdgeLabel::Args, AstNode::token("b"));
        let c = call.canonical();
        assert_eq!(c.sexpr(), "(FuncInvoc member:f args:a args:b)");
    }

    #[test]
    fn label_text_roundtrip() {
        for l in [
            NodeLabel::Kind(NodeKind::IfStmt),
            NodeLabel::Token("VAR1".into()),
            NodeLabel::Eot,
        ] {
            assert_eq!(NodeLabel::from_text(l.text()), l);
        }
    }
}

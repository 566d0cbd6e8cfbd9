use super::schema::{EdgeClass, GrammarSchema};
use super::semantic::{semantic_verdicts, violated_sites, RuleTag};
use super::tree::PartialTree;
use super::Verdict;
use crate::graph::DecEdge;
use crate::lang::{classify_token, slot_kind, AstNode, EdgeLabel, NodeLabel, SlotKind, TypeEnv};

/// Whether `candidate` may fill edge `edge` of a node labeled `parent`.
pub fn slot_admits(parent: &NodeLabel, edge: DecEdge, candidate: &NodeLabel) -> bool {
    let label = match edge {
        DecEdge::Eot => return *candidate == NodeLabel::Eot,
        DecEdge::Label(l) => l,
    };
    let slot = match parent.kind().and_then(|k| slot_kind(k, label)) {
        Some(s) => s,
        None => return false,
    };
    match (slot, candidate) {
        (SlotKind::Kinds(ks), NodeLabel::Kind(k)) => ks.contains(k),
        (SlotKind::Token(class), NodeLabel::Token(t)) => classify_token(t).fits(class),
        _ => false,
    }
}

/// Node verdicts over a whole label list for one pending slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeVerdicts {
    /// One entry per label; never `Must`.
    pub verdicts: Vec<Verdict>,
    pub fired: Vec<RuleTag>,
}

impl NodeVerdicts {
    pub fn with(&self, v: Verdict) -> Vec<usize> {
        (0..self.verdicts.len()).filter(|&i| self.verdicts[i] == v).collect()
    }
}

/// Slot admissibility followed by the type rules over the admissible labels.
pub fn node_verdicts(
    tree: &PartialTree,
    pending: (usize, DecEdge),
    env: &TypeEnv,
    labels: &[NodeLabel],
) -> NodeVerdicts {
    let (p, edge) = pending;
    let parent = tree.label(p);
    let admissible: Vec<usize> = (0..labels.len())
        .filter(|&i| slot_admits(parent, edge, &labels[i]))
        .collect();
    let mut verdicts = vec![Verdict::Invalid; labels.len()];
    for &i in &admissible {
        verdicts[i] = Verdict::Might;
    }
    let mut fired = Vec::new();
    if let DecEdge::Label(l) = edge {
        let cands: Vec<NodeLabel> = admissible.iter().map(|&i| labels[i].clone()).collect();
        let sem = semantic_verdicts(tree, (p, l), env, &cands);
        for j in sem.n_invalid {
            verdicts[admissible[j]] = Verdict::Invalid;
        }
        fired = sem.fired;
    }
    NodeVerdicts { verdicts, fired }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validity {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Check a complete tree against edge multiplicities, slot admissibility and
/// every type site.
pub fn check_tree_valid(ast: &AstNode, schema: &GrammarSchema, env: &TypeEnv) -> Validity {
    let tree = PartialTree::from_ast(ast);
    let mut violations = Vec::new();
    for i in 0..tree.len() {
        let label = tree.label(i);
        match tree.kind(i) {
            Some(kind) => {
                for l in EdgeLabel::ALL {
                    let n = tree.edge_count(i, *l);
                    let bad = match schema.class(kind, *l) {
                        Some(EdgeClass::Req) => n != 1,
                        Some(EdgeClass::ReqPlus) => n == 0,
                        Some(EdgeClass::Opt) => n > 1,
                        Some(EdgeClass::OptStar) => false,
                        None => n > 0,
                    };
                    if bad {
                        violations.push(format!("{kind}: {n} `{l}` edge(s)"));
                    }
                }
            }
            None if !tree.children(i).is_empty() => {
                violations.push(format!("token `{}` has children", label.text()));
            }
            None => {}
        }
        for &(l, c) in tree.children(i) {
            if !slot_admits(label, DecEdge::Label(l), tree.label(c)) {
                violations.push(format!(
                    "`{}` not admissible under {}.{l}",
                    tree.label(c).text(),
                    label.text()
                ));
            }
        }
    }
    violations.extend(violated_sites(&tree, env).into_iter().map(|s| s.detail));
    Validity {
        valid: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, NodeKind, Type};

    fn env() -> TypeEnv {
        let mut env = TypeEnv::default();
        env.variables.insert("VAR1".into(), Type::Int);
        env.variables.insert("VAR2".into(), Type::Str);
        env
    }

    #[test]
    fn type_error_is_reported() {
        let schema = GrammarSchema::desk();
        let ok = parse_program("{ VAR1 = VAR1 + 1; }").unwrap();
        assert!(check_tree_valid(&ok, &schema, &env()).valid);
        let bad = parse_program("{ VAR1 = VAR2; }").unwrap();
        let v = check_tree_valid(&bad, &schema, &env());
        assert!(!v.valid);
        assert_eq!(v.violations.len(), 1);
    }

    #[test]
    fn missing_required_edge() {
        let mut t = PartialTree::new(NodeLabel::Kind(NodeKind::BlockStmt));
        t.add(0, EdgeLabel::Statements, NodeLabel::Kind(NodeKind::ExprStmt));
        let v = check_tree_valid(&t.to_ast(), &GrammarSchema::desk(), &env());
        assert!(!v.valid);
    }

    #[test]
    fn slot_classes() {
        let var = NodeLabel::Kind(NodeKind::VarRef);
        let name = DecEdge::Label(EdgeLabel::Name);
        assert!(slot_admits(&var, name, &NodeLabel::Token("VAR3".into())));
        assert!(!slot_admits(&var, name, &NodeLabel::Token("FUNC1".into())));
        assert!(!slot_admits(&var, name, &NodeLabel::Kind(NodeKind::VarRef)));
        assert!(!slot_admits(&var, DecEdge::Eot, &NodeLabel::Token("VAR3".into())));
    }
}

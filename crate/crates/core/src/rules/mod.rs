//! Grammar and type rules that classify decoding choices.

mod schema;
mod semantic;
mod syntax;
mod tree;
mod valid;

pub use schema::{EdgeClass, GrammarSchema};
pub use semantic::{semantic_verdicts, violated_sites, RuleTag, SemanticVerdicts, SiteKey, SiteState, TySet};
pub use syntax::{edge_verdict, syntax_verdicts, SyntaxVerdicts};
pub use tree::PartialTree;
pub use valid::{check_tree_valid, node_verdicts, slot_admits, NodeVerdicts, Validity};

/// Ordered so that `min` picks the strongest verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Must,
    Might,
    Invalid,
}

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::SchemaError;
use crate::lang::{EdgeLabel, NodeKind};

/// Multiplicity class of an edge label under one node kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Exactly one.
    Req,
    /// One or more.
    ReqPlus,
    /// At most one.
    Opt,
    /// Any number.
    OptStar,
}

const KINDS: usize = NodeKind::ALL.len();
const LABELS: usize = EdgeLabel::ALL.len();

/// Per-kind partition of edge labels into the four multiplicity classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarSchema {
    table: [[Option<EdgeClass>; LABELS]; KINDS],
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RowDoc {
    #[serde(default)]
    req: Vec<String>,
    #[serde(default)]
    req_plus: Vec<String>,
    #[serde(default)]
    opt: Vec<String>,
    #[serde(default)]
    opt_star: Vec<String>,
}

impl GrammarSchema {
    pub fn empty() -> Self {
        Self {
            table: [[None; LABELS]; KINDS],
        }
    }

    /// The edge-class table of the mini-language.
    pub fn desk() -> Self {
        use EdgeClass::*;
        use EdgeLabel as E;
        use NodeKind as K;
        let rows: &[(K, &[(EdgeClass, &[E])])] = &[
            (K::CompilationUnit, &[(OptStar, &[E::Types])]),
            (
                K::ClassDecl,
                &[(Req, &[E::Name]), (Opt, &[E::Type]), (OptStar, &[E::Fields, E::Methods])],
            ),
            (
                K::FuncDecl,
                &[(Req, &[E::Type, E::Name, E::Body]), (OptStar, &[E::Parameters])],
            ),
            (K::Param, &[(Req, &[E::Type, E::Name])]),
            (K::BlockStmt, &[(OptStar, &[E::Statements])]),
            (K::LocalVarDecl, &[(Req, &[E::Type]), (ReqPlus, &[E::Declarators])]),
            (K::VarDecl, &[(Req, &[E::Name]), (Opt, &[E::Initializer])]),
            (K::IfStmt, &[(Req, &[E::Condition, E::Then]), (Opt, &[E::Else])]),
            (K::WhileStmt, &[(Req, &[E::Condition, E::Body])]),
            (K::ReturnStmt, &[(Opt, &[E::Value])]),
            (K::ExprStmt, &[(Req, &[E::Value])]),
            (K::Assignment, &[(Req, &[E::Left, E::Right])]),
            (K::BinaryOp, &[(Req, &[E::Left, E::Operator, E::Right])]),
            (K::Literal, &[(Req, &[E::Value])]),
            (K::VarRef, &[(Req, &[E::Name])]),
            (
                K::MemberRef,
                &[(Req, &[E::Member]), (Opt, &[E::Qualifier]), (OptStar, &[E::Selectors])],
            ),
            (
                K::FuncInvoc,
                &[
                    (Req, &[E::Member]),
                    (Opt, &[E::Qualifier]),
                    (OptStar, &[E::Args, E::Selectors]),
                ],
            ),
            (K::RefType, &[(Req, &[E::Name])]),
            (K::BasicType, &[(Req, &[E::Name])]),
        ];
        let mut s = Self::empty();
        for (kind, classes) in rows {
            for (class, labels) in *classes {
                for l in *labels {
                    s.table[kind.index()][l.index()] = Some(*class);
                }
            }
        }
        s
    }

    /// Load `{kind: {req, req_plus, opt, opt_star}}`; kinds absent from the
    /// document get four empty sets.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let doc: BTreeMap<String, RowDoc> = serde_json::from_str(text)?;
        let mut s = Self::empty();
        for (kind, row) in doc {
            let k: NodeKind = kind.parse()?;
            for (class, labels) in [
                (EdgeClass::Req, &row.req),
                (EdgeClass::ReqPlus, &row.req_plus),
                (EdgeClass::Opt, &row.opt),
                (EdgeClass::OptStar, &row.opt_star),
            ] {
                for l in labels {
                    let e: EdgeLabel = l.parse()?;
                    let slot = &mut s.table[k.index()][e.index()];
                    if slot.is_some() {
                        return Err(SchemaError::Overlap {
                            kind: kind.clone(),
                            label: l.clone(),
                        });
                    }
                    *slot = Some(class);
                }
            }
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut doc = serde_json::Map::new();
        for k in NodeKind::ALL {
            let mut row = serde_json::Map::new();
            for (name, class) in [
                ("req", EdgeClass::Req),
                ("req_plus", EdgeClass::ReqPlus),
                ("opt", EdgeClass::Opt),
                ("opt_star", EdgeClass::OptStar),
            ] {
                let labels: Vec<serde_json::Value> = self
                    .labels(*k, class)
                    .map(|l| l.as_str().into())
                    .collect();
                row.insert(name.into(), labels.into());
            }
            doc.insert(k.as_str().into(), row.into());
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("schema serializes")
    }

    pub fn class(&self, kind: NodeKind, label: EdgeLabel) -> Option<EdgeClass> {
        self.table[kind.index()][label.index()]
    }

    pub fn labels(&self, kind: NodeKind, class: EdgeClass) -> impl Iterator<Item = EdgeLabel> + '_ {
        EdgeLabel::ALL
            .iter()
            .copied()
            .filter(move |l| self.class(kind, *l) == Some(class))
    }
}

impl Default for GrammarSchema {
    fn default() -> Self {
        Self::desk()
    }
}

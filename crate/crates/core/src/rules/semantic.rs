//! Type-directed constraints on node generation.
//!
//! Every constraint is a *site*: a pair (required type, candidate type) that
//! lives at one tree node and becomes decidable once both types are known.
//!
//! | tag           | anchored at                 | required            | candidate     |
//! |---------------|-----------------------------|---------------------|---------------|
//! | `Argument`    | `FuncInvoc` (per argument)  | parameter type      | argument type |
//! | `Member`      | `MemberRef` / `FuncInvoc`   | member of qualifier | member name   |
//! | `Initializer` | `LocalVarDecl` (per decl)   | declared type       | initializer   |
//! | `Assignment`  | `Assignment`                | left side type      | right side    |
//!
//! Types are tracked as sets of possible types so that a partially built
//! expression already rules out choices no completion could repair.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::tree::PartialTree;
use crate::lang::{is_unk, type_compatible, EdgeLabel as E, NodeKind as K, NodeLabel, Type, TypeEnv, OPERATORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleTag {
    /// Argument type against the callee's parameter.
    Argument,
    /// Member name against the qualifier's class.
    Member,
    /// Initializer against the declared variable type.
    Initializer,
    /// Right side against the assignment target.
    Assignment,
}

/// Possible static types of a (partial) expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TySet {
    Any,
    Of(BTreeSet<Type>),
}

impl TySet {
    fn one(t: Type) -> TySet {
        TySet::Of([t].into_iter().collect())
    }

    fn of(ts: impl IntoIterator<Item = Type>) -> TySet {
        TySet::Of(ts.into_iter().collect())
    }

    fn allows(&self, t: &Type) -> bool {
        match self {
            TySet::Any => true,
            TySet::Of(s) => s.contains(t),
        }
    }

    fn single(&self) -> Option<&Type> {
        match self {
            TySet::Of(s) if s.len() == 1 => s.iter().next(),
            _ => None,
        }
    }
}

/// `Some(ok)` when both sides are decided, `None` otherwise.
fn compat(cand: &TySet, req: &TySet, env: &TypeEnv) -> Option<bool> {
    match (cand, req) {
        (TySet::Of(c), TySet::Of(r)) => Some(
            c.iter()
                .any(|ct| r.iter().any(|rt| type_compatible(ct, rt, env))),
        ),
        _ => None,
    }
}

/// Key identifying one site: anchor node, rule, position.
pub type SiteKey = (usize, RuleTag, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteState {
    pub key: SiteKey,
    /// Both sides decided.
    pub engaged: bool,
    pub violated: bool,
    pub detail: String,
}

pub(crate) struct Typer<'a> {
    pub tree: &'a PartialTree,
    pub env: &'a TypeEnv,
}

fn known(tok: Option<&str>) -> Option<&str> {
    tok.filter(|t| !t.is_empty() && !is_unk(t))
}

impl Typer<'_> {
    fn is_selector(&self, i: usize) -> bool {
        matches!(self.tree.parent(i), Some((_, E::Selectors)))
    }

    pub fn ty(&self, i: usize) -> TySet {
        let t = self.tree;
        match t.label(i) {
            NodeLabel::Kind(K::Literal) => match t.child_token(i, E::Value) {
                None => TySet::of([Type::Int, Type::Bool, Type::Str, Type::Null]),
                Some(text) => match Type::of_literal(text) {
                    Some(ty) => TySet::one(ty),
                    None => TySet::Any,
                },
            },
            NodeLabel::Kind(K::VarRef) => match known(t.child_token(i, E::Name))
                .and_then(|n| self.env.variables.get(n))
            {
                Some(ty) => TySet::one(ty.clone()),
                None => TySet::Any,
            },
            NodeLabel::Kind(k @ (K::MemberRef | K::FuncInvoc)) => {
                let k = *k;
                if t.child(i, E::Selectors).is_some() {
                    return TySet::Any;
                }
                let member = match known(t.child_token(i, E::Member)) {
                    Some(m) => m,
                    None => return TySet::Any,
                };
                match t.child(i, E::Qualifier) {
                    None if k == K::FuncInvoc && !self.is_selector(i) => {
                        match self.env.functions.get(member) {
                            Some(sig) => TySet::one(sig.ret.clone()),
                            None => TySet::Any,
                        }
                    }
                    None => TySet::Any,
                    Some(q) => match self.ty(q) {
                        TySet::Any => TySet::Any,
                        TySet::Of(qs) => {
                            let found: BTreeSet<Type> = qs
                                .iter()
                                .filter_map(|qt| match qt {
                                    Type::Class(c) if k == K::MemberRef => {
                                        self.env.field(c, member).cloned()
                                    }
                                    Type::Class(c) => self.env.method(c, member).map(|s| s.ret.clone()),
                                    _ => None,
                                })
                                .collect();
                            if found.is_empty() {
                                TySet::Any
                            } else {
                                TySet::Of(found)
                            }
                        }
                    },
                }
            }
            NodeLabel::Kind(K::BinaryOp) => {
                let side = |l| t.child(i, l).map(|c| self.ty(c)).unwrap_or(TySet::Any);
                let (l, r) = (side(E::Left), side(E::Right));
                let ops: Vec<&str> = match t.child_token(i, E::Operator) {
                    Some(op) => vec![op],
                    None => OPERATORS.to_vec(),
                };
                let mut out = BTreeSet::new();
                for op in ops {
                    out.extend(binary_result(op, &l, &r));
                }
                TySet::Of(out)
            }
            _ => TySet::Any,
        }
    }

    /// Declared type of a `LocalVarDecl`.
    fn declared(&self, d: usize) -> TySet {
        let t = self.tree;
        let ty = match t.child(d, E::Type) {
            Some(ty) => ty,
            None => return TySet::Any,
        };
        match (t.kind(ty), t.child_token(ty, E::Name)) {
            (Some(K::BasicType), None) => TySet::of([Type::Int, Type::Bool, Type::Str]),
            (Some(K::BasicType), Some(n)) if matches!(n, "int" | "bool" | "string") => {
                TySet::one(Type::from_name(n))
            }
            (Some(K::RefType), Some(n)) if !is_unk(n) && self.env.classes.contains_key(n) => {
                TySet::one(Type::Class(n.to_string()))
            }
            _ => TySet::Any,
        }
    }

    /// States of all sites anchored at node `i`.
    pub fn sites(&self, i: usize) -> Vec<SiteState> {
        let t = self.tree;
        let mut out = Vec::new();
        let mut push = |key: SiteKey, res: Option<bool>, detail: String| {
            out.push(SiteState {
                key,
                engaged: res.is_some(),
                violated: res == Some(false),
                detail,
            })
        };
        match t.kind(i) {
            Some(k @ (K::MemberRef | K::FuncInvoc)) => {
                let member = known(t.child_token(i, E::Member));
                let qualifier = t.child(i, E::Qualifier);
                if let (Some(m), Some(q)) = (member, qualifier) {
                    let res = match self.ty(q) {
                        TySet::Any => None,
                        TySet::Of(qs) => Some(qs.iter().any(|qt| match qt {
                            Type::Class(c) if k == K::MemberRef => self.env.field(c, m).is_some(),
                            Type::Class(c) => self.env.method(c, m).is_some(),
                            _ => false,
                        })),
                    };
                    push((i, RuleTag::Member, 0), res, format!("{k}: `{m}` is not a member of the qualifier's type"));
                }
                if k == K::FuncInvoc {
                    if let Some(m) = member {
                        let sig = match qualifier {
                            None if !self.is_selector(i) => self.env.functions.get(m),
                            None => None,
                            Some(q) => match self.ty(q).single() {
                                Some(Type::Class(c)) => self.env.method(c, m),
                                _ => None,
                            },
                        };
                        if let Some(sig) = sig {
                            for (pos, a) in t.children_with(i, E::Args).enumerate() {
                                if let Some(p) = sig.params.get(pos) {
                                    let res = compat(&self.ty(a), &TySet::one(p.clone()), self.env);
                                    push(
                                        (i, RuleTag::Argument, pos),
                                        res,
                                        format!("FuncInvoc: argument {} of `{m}` is not compatible with {p}", pos + 1),
                                    );
                                }
                            }
                        }
                    }
                }
            }
            Some(K::LocalVarDecl) => {
                let req = self.declared(i);
                for (pos, v) in t.children_with(i, E::Declarators).enumerate() {
                    if let Some(init) = t.child(v, E::Initializer) {
                        let res = compat(&self.ty(init), &req, self.env);
                        push(
                            (i, RuleTag::Initializer, pos),
                            res,
                            format!("LocalVarDecl: initializer {} is not compatible with the declared type", pos + 1),
                        );
                    }
                }
            }
            Some(K::Assignment) => {
                if let (Some(l), Some(r)) = (t.child(i, E::Left), t.child(i, E::Right)) {
                    let res = compat(&self.ty(r), &self.ty(l), self.env);
                    push(
                        (i, RuleTag::Assignment, 0),
                        res,
                        "Assignment: right side is not compatible with the target".into(),
                    );
                }
            }
            _ => {}
        }
        out
    }
}

fn binary_result(op: &str, l: &TySet, r: &TySet) -> Vec<Type> {
    use Type::*;
    let both = |t: &Type| l.allows(t) && r.allows(t);
    match op {
        "&&" | "||" if both(&Bool) => vec![Bool],
        "==" | "!=" => vec![Bool],
        "<" | "<=" | ">" | ">=" if both(&Int) => vec![Bool],
        "-" | "*" | "/" | "%" if both(&Int) => vec![Int],
        "+" => {
            let mut v = Vec::new();
            if both(&Int) {
                v.push(Int);
            }
            let scalar = |s: &TySet| s.allows(&Int) || s.allows(&Bool) || s.allows(&Str);
            if (l.allows(&Str) && scalar(r)) || (r.allows(&Str) && scalar(l)) {
                v.push(Str);
            }
            v
        }
        _ => Vec::new(),
    }
}

/// Node verdicts from the type rules for one pending slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticVerdicts {
    /// Indices into the candidate list.
    pub n_might: Vec<usize>,
    pub n_invalid: Vec<usize>,
    /// Rules whose sites were decided for at least one candidate.
    pub fired: Vec<RuleTag>,
}

impl SemanticVerdicts {
    pub fn is_empty(&self) -> bool {
        self.fired.is_empty()
    }
}

/// Trial-place each candidate at `pending` and mark it invalid when it makes
/// some site at or above the slot newly unsatisfiable. Unknown placeholders
/// never decide a site, so they always stay admissible.
pub fn semantic_verdicts(
    tree: &PartialTree,
    pending: (usize, E),
    env: &TypeEnv,
    candidates: &[NodeLabel],
) -> SemanticVerdicts {
    let (p, edge) = pending;
    let mut work = tree.clone();
    let chain: Vec<usize> = std::iter::once(p).chain(tree.ancestors(p)).collect();
    let before: BTreeSet<SiteKey> = {
        let typer = Typer { tree: &work, env };
        chain
            .iter()
            .flat_map(|&a| typer.sites(a))
            .filter(|s| s.violated)
            .map(|s| s.key)
            .collect()
    };
    let mut fired = BTreeSet::new();
    let mut verdict = Vec::with_capacity(candidates.len());
    for c in candidates {
        if *c == NodeLabel::Eot {
            verdict.push(true);
            continue;
        }
        work.add(p, edge, c.clone());
        let typer = Typer { tree: &work, env };
        let mut ok = true;
        for &a in &chain {
            for s in typer.sites(a) {
                if s.engaged {
                    fired.insert(s.key.1);
                }
                if s.violated && !before.contains(&s.key) {
                    ok = false;
                }
            }
        }
        work.pop();
        verdict.push(ok);
    }
    if fired.is_empty() {
        return SemanticVerdicts::default();
    }
    let mut out = SemanticVerdicts {
        fired: fired.into_iter().collect(),
        ..SemanticVerdicts::default()
    };
    for (i, ok) in verdict.into_iter().enumerate() {
        if ok {
            out.n_might.push(i);
        } else {
            out.n_invalid.push(i);
        }
    }
    out
}

/// Every violated site in a complete tree.
pub fn violated_sites(tree: &PartialTree, env: &TypeEnv) -> Vec<SiteState> {
    let typer = Typer { tree, env };
    (0..tree.len())
        .flat_map(|i| typer.sites(i))
        .filter(|s| s.violated)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{FuncSig, NodeKind};

    fn kind(k: NodeKind) -> NodeLabel {
        NodeLabel::Kind(k)
    }

    fn tok(t: &str) -> NodeLabel {
        NodeLabel::Token(t.into())
    }

    fn ctx_env() -> TypeEnv {
        let mut env = TypeEnv::default();
        env.classes.insert("TYPE1".into(), Default::default());
        env.variables.insert("VAR1".into(), Type::Class("TYPE1".into()));
        env.variables.insert("VAR2".into(), Type::Int);
        env.functions.insert(
            "FUNC13".into(),
            FuncSig {
                params: vec![Type::Class("TYPE1".into())],
                ret: Type::Int,
            },
        );
        env
    }

    #[test]
    fn argument_rule_filters_by_parameter_type() {
        let env = ctx_env();
        let mut t = PartialTree::new(kind(NodeKind::BlockStmt));
        let s = t.add(0, E::Statements, kind(NodeKind::ExprStmt));
        let call = t.add(s, E::Value, kind(NodeKind::FuncInvoc));
        t.add(call, E::Member, tok("FUNC13"));
        let arg = t.add(call, E::Args, kind(NodeKind::VarRef));
        let cands = [tok("VAR1"), tok("VAR2"), tok("VAR-UNK")];
        let v = semantic_verdicts(&t, (arg, E::Name), &env, &cands);
        assert_eq!(v.fired, vec![RuleTag::Argument]);
        assert_eq!(v.n_might, vec![0, 2]);
        assert_eq!(v.n_invalid, vec![1]);
    }

    #[test]
    fn no_precondition_means_no_verdicts() {
        let env = ctx_env();
        let mut t = PartialTree::new(kind(NodeKind::BlockStmt));
        let r = t.add(0, E::Statements, kind(NodeKind::ReturnStmt));
        let v = t.add(r, E::Value, kind(NodeKind::VarRef));
        let out = semantic_verdicts(&t, (v, E::Name), &env, &[tok("VAR1"), tok("VAR2")]);
        assert!(out.is_empty());
        assert!(out.n_might.is_empty() && out.n_invalid.is_empty());
    }

    #[test]
    fn binary_operator_types_propagate() {
        let env = ctx_env();
        // string s = VAR2 <op> VAR2;
        let mut t = PartialTree::new(kind(NodeKind::BlockStmt));
        let d = t.add(0, E::Statements, kind(NodeKind::LocalVarDecl));
        let ty = t.add(d, E::Type, kind(NodeKind::BasicType));
        t.add(ty, E::Name, tok("string"));
        let v = t.add(d, E::Declarators, kind(NodeKind::VarDecl));
        let b = t.add(v, E::Initializer, kind(NodeKind::BinaryOp));
        let l = t.add(b, E::Left, kind(NodeKind::VarRef));
        t.add(l, E::Name, tok("VAR2"));
        let r = t.add(b, E::Right, kind(NodeKind::Literal));
        // int + int cannot become a string, so an int literal is rejected here.
        let out = semantic_verdicts(&t, (r, E::Value), &env, &[tok("1"), tok("\"\""), tok("LIT-UNK")]);
        assert_eq!(out.n_invalid, vec![0]);
        assert_eq!(out.n_might, vec![1, 2]);
    }
}

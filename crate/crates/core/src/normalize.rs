//! Identifier abstraction: concrete names become numbered placeholders
//! (`TYPEk`, `FUNCk`, `VARk`, `LITk`) so that the model sees a small closed
//! vocabulary, and generated trees can be mapped back afterwards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::NormalizeError;
use crate::lang::{
    is_unk, placeholder_index, slot_kind, AstNode, EdgeLabel, NodeKind, SlotKind, TokenClass, TypeEnv,
};

/// Literals that stay verbatim instead of entering the literal pool.
pub const LITERAL_WHITELIST: &[&str] = &["0", "1", "true", "false", "null", "\"\""];

pub const VAR_UNK: &str = "VAR-UNK";
pub const FUNC_UNK: &str = "FUNC-UNK";
pub const TYPE_UNK: &str = "TYPE-UNK";
pub const LIT_UNK: &str = "LIT-UNK";

/// The four placeholder families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Type,
    Func,
    Var,
    Lit,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Type, Family::Func, Family::Var, Family::Lit];

    pub fn prefix(self) -> &'static str {
        match self {
            Family::Type => "TYPE",
            Family::Func => "FUNC",
            Family::Var => "VAR",
            Family::Lit => "LIT",
        }
    }

    pub fn unk(self) -> &'static str {
        match self {
            Family::Type => TYPE_UNK,
            Family::Func => FUNC_UNK,
            Family::Var => VAR_UNK,
            Family::Lit => LIT_UNK,
        }
    }

    pub fn placeholder(self, k: usize) -> String {
        format!("{}{k}", self.prefix())
    }

    pub fn of_class(class: TokenClass) -> Option<Family> {
        match class {
            TokenClass::Type => Some(Family::Type),
            TokenClass::Func => Some(Family::Func),
            TokenClass::Var => Some(Family::Var),
            TokenClass::Literal => Some(Family::Lit),
            _ => None,
        }
    }

    /// Family of a placeholder token (`VAR3`, `LIT-UNK`, ...).
    pub fn of_placeholder(text: &str) -> Option<Family> {
        let class = match placeholder_index(text) {
            Some((class, _)) => class,
            None if is_unk(text) => crate::lang::classify_token(text),
            None => return None,
        };
        Family::of_class(class)
    }
}

/// One injective association between placeholders and concrete spellings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    forward: BTreeMap<String, String>,
    backward: BTreeMap<String, String>,
}

impl Association {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Placeholder for a concrete spelling.
    pub fn placeholder(&self, name: &str) -> Option<&str> {
        self.forward.get(name).map(String::as_str)
    }

    /// Concrete spelling for a placeholder.
    pub fn concrete(&self, placeholder: &str) -> Option<&str> {
        self.backward.get(placeholder).map(String::as_str)
    }

    /// `(placeholder, concrete)` pairs in placeholder-number order.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<(&str, &str)> = self
            .backward
            .iter()
            .map(|(p, c)| (p.as_str(), c.as_str()))
            .collect();
        v.sort_by_key(|(p, _)| placeholder_index(p).map(|(_, k)| k).unwrap_or(usize::MAX));
        v
    }

    fn insert(&mut self, family: Family, name: &str) -> String {
        if let Some(p) = self.forward.get(name) {
            return p.clone();
        }
        let p = family.placeholder(self.forward.len() + 1);
        self.forward.insert(name.to_string(), p.clone());
        self.backward.insert(p.clone(), name.to_string());
        p
    }
}

impl Serialize for Association {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.backward.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Association {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let backward = BTreeMap::<String, String>::deserialize(d)?;
        let forward: BTreeMap<String, String> =
            backward.iter().map(|(p, c)| (c.clone(), p.clone())).collect();
        if forward.len() != backward.len() {
            return Err(serde::de::Error::custom("association is not injective"));
        }
        Ok(Association { forward, backward })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationMap {
    pub types: Association,
    pub funcs: Association,
    pub vars: Association,
    pub literals: Association,
}

impl NormalizationMap {
    pub fn family(&self, family: Family) -> &Association {
        match family {
            Family::Type => &self.types,
            Family::Func => &self.funcs,
            Family::Var => &self.vars,
            Family::Lit => &self.literals,
        }
    }

    fn family_mut(&mut self, family: Family) -> &mut Association {
        match family {
            Family::Type => &mut self.types,
            Family::Func => &mut self.funcs,
            Family::Var => &mut self.vars,
            Family::Lit => &mut self.literals,
        }
    }

    pub fn is_empty(&self) -> bool {
        Family::ALL.iter().all(|f| self.family(*f).is_empty())
    }

    /// Rename a concrete type environment into placeholder space. Names that
    /// do not occur in the map keep their spelling.
    pub fn normalize_env(&self, env: &TypeEnv) -> TypeEnv {
        env.renamed(
            |n| self.vars.placeholder(n).map(str::to_string),
            |n| self.funcs.placeholder(n).map(str::to_string),
            |n| self.types.placeholder(n).map(str::to_string),
        )
    }
}

/// Placeholder family of the token leaf reached through `(parent, edge)`, or
/// `None` for tokens that are never abstracted (operators, builtin types,
/// whitelisted literals).
fn family_at(parent: NodeKind, edge: EdgeLabel, text: &str) -> Option<Family> {
    match slot_kind(parent, edge)? {
        SlotKind::Token(TokenClass::Literal) if LITERAL_WHITELIST.contains(&text) => None,
        SlotKind::Token(class) => Family::of_class(class),
        SlotKind::Kinds(_) => None,
    }
}

type Rewrite<'a> = dyn FnMut(Family, &str) -> Option<String> + 'a;

fn rewrite(node: &mut AstNode, f: &mut Rewrite<'_>) {
    let parent = node.kind;
    for (edge, child) in &mut node.children {
        if let Some(text) = child.token.as_deref() {
            if child.children.is_empty() {
                if let Some(family) = family_at(parent, *edge, text) {
                    if let Some(new) = f(family, text) {
                        child.token = Some(new);
                    }
                }
                continue;
            }
        }
        rewrite(child, f);
    }
}

/// Abstract every identifier and pooled literal of `buggy_fn`, numbering each
/// family separately by pre-order first occurrence.
pub fn normalize(buggy_fn: &AstNode) -> (AstNode, NormalizationMap) {
    let mut map = NormalizationMap::default();
    let mut out = buggy_fn.clone();
    rewrite(&mut out, &mut |family, text| {
        if is_unk(text) {
            return None;
        }
        Some(map.family_mut(family).insert(family, text))
    });
    (out, map)
}

/// Abstract a patch with an existing map; spellings unknown to the map become
/// the family's UNK placeholder.
pub fn normalize_patch(patch: &AstNode, map: &NormalizationMap) -> AstNode {
    let mut out = patch.clone();
    rewrite(&mut out, &mut |family, text| {
        Some(match map.family(family).placeholder(text) {
            Some(p) => p.to_string(),
            None if is_unk(text) => text.to_string(),
            None => family.unk().to_string(),
        })
    });
    out
}

/// Restore concrete spellings; UNK placeholders are left for later expansion.
pub fn denormalize(tree: &AstNode, map: &NormalizationMap) -> Result<AstNode, NormalizeError> {
    let mut out = tree.clone();
    let mut result = Ok(());
    out.visit_mut(&mut |n| {
        if result.is_err() {
            return;
        }
        if let Some(text) = n.token.as_deref() {
            if is_unk(text) {
                return;
            }
            if let Some(family) = Family::of_placeholder(text) {
                match map.family(family).concrete(text) {
                    Some(c) => n.token = Some(c.to_string()),
                    None => result = Err(NormalizeError::UnmappedPlaceholder(text.to_string())),
                }
            }
        }
    });
    result.map(|_| out)
}
